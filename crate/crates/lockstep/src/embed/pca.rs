//! Principal component analysis via a cyclic Jacobi eigendecomposition of
//! the covariance matrix (or of the Gram matrix when rows < dims).

use crate::error::{Error, Result};

use super::EmbeddingMatrix;

/// PCA projection plus diagnostics.
#[derive(Debug, Clone)]
pub struct PcaResult {
    pub matrix: EmbeddingMatrix,
    /// Fraction of total variance captured by each kept component,
    /// non-increasing.
    pub explained_variance_ratio: Vec<f64>,
    /// Components beyond the data's numerical rank, emitted as zero columns.
    pub zero_padded: usize,
}

/// Center the rows and project them onto the top `target_dim` principal
/// directions. Rank-deficient inputs are padded with zero components rather
/// than rejected.
pub fn pca_reduce(m: &EmbeddingMatrix, target_dim: usize) -> Result<PcaResult> {
    let n = m.rows();
    let d = m.dim();
    if target_dim == 0 || target_dim > n.min(d) {
        return Err(Error::PcaTarget {
            target: target_dim,
            limit: n.min(d),
        });
    }

    // column means
    let mut means = vec![0.0; d];
    for i in 0..n {
        for (k, v) in m.row(i).iter().enumerate() {
            means[k] += v;
        }
    }
    for mean in &mut means {
        *mean /= n as f64;
    }
    let centered: Vec<f64> = (0..n)
        .flat_map(|i| m.row(i).iter().zip(&means).map(|(v, mu)| v - mu))
        .collect();

    // Eigendecompose on the smaller side. Covariance side gives directions
    // directly; Gram side maps its eigenvectors u to directions X^T u.
    let (eigenvalues, directions, total_variance) = if d <= n {
        let cov = gram(&centered, n, d, true);
        let (vals, vecs) = jacobi_eigen_sorted(cov, d);
        let total = vals.iter().filter(|v| **v > 0.0).sum::<f64>();
        (vals, vecs, total)
    } else {
        let gram_matrix = gram(&centered, n, d, false);
        let (vals, vecs) = jacobi_eigen_sorted(gram_matrix, n);
        let total = vals.iter().filter(|v| **v > 0.0).sum::<f64>();
        // direction_i = X^T u_i / ||X^T u_i||
        let mut directions = Vec::with_capacity(vals.len());
        for u in &vecs {
            let mut dir = vec![0.0; d];
            for (row, &ui) in u.iter().enumerate() {
                for k in 0..d {
                    dir[k] += centered[row * d + k] * ui;
                }
            }
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut dir {
                    *v /= norm;
                }
            }
            directions.push(dir);
        }
        (vals, directions, total)
    };

    let tolerance = eigenvalues.first().copied().unwrap_or(0.0).max(0.0) * 1e-12;
    let mut zero_padded = 0usize;
    let mut ratios = Vec::with_capacity(target_dim);
    let mut kept: Vec<&[f64]> = Vec::with_capacity(target_dim);
    let zero_direction = vec![0.0; d];
    for c in 0..target_dim {
        let live = c < eigenvalues.len() && eigenvalues[c] > tolerance;
        if live {
            kept.push(&directions[c]);
            ratios.push(if total_variance > 0.0 {
                eigenvalues[c] / total_variance
            } else {
                0.0
            });
        } else {
            kept.push(&zero_direction);
            ratios.push(0.0);
            zero_padded += 1;
        }
    }

    let mut values = Vec::with_capacity(n * target_dim);
    for i in 0..n {
        let row = &centered[i * d..(i + 1) * d];
        for dir in &kept {
            values.push(row.iter().zip(dir.iter()).map(|(a, b)| a * b).sum());
        }
    }

    Ok(PcaResult {
        matrix: EmbeddingMatrix::new(m.row_ids().to_vec(), target_dim, values)?,
        explained_variance_ratio: ratios,
        zero_padded,
    })
}

/// `X^T X / n` (covariance side) or `X X^T / n` (Gram side) of a centered
/// row-major n x d matrix, as a dense symmetric matrix.
fn gram(centered: &[f64], n: usize, d: usize, covariance: bool) -> Vec<f64> {
    if covariance {
        let mut out = vec![0.0; d * d];
        for i in 0..n {
            let row = &centered[i * d..(i + 1) * d];
            for a in 0..d {
                let ra = row[a];
                for b in a..d {
                    out[a * d + b] += ra * row[b];
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = out[a * d + b] / n as f64;
                out[a * d + b] = v;
                out[b * d + a] = v;
            }
        }
        out
    } else {
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            let ra = &centered[a * d..(a + 1) * d];
            for b in a..n {
                let rb = &centered[b * d..(b + 1) * d];
                let v = ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>() / n as f64;
                out[a * n + b] = v;
                out[b * n + a] = v;
            }
        }
        out
    }
}

/// Eigenvalues (descending) and matching unit eigenvectors of a symmetric
/// matrix, by cyclic Jacobi rotations.
fn jacobi_eigen_sorted(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n > 1 {
        for _sweep in 0..64 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p * n + q] * a[p * n + q];
                }
            }
            let scale: f64 = (0..n).map(|i| a[i * n + i].abs()).sum::<f64>().max(1e-300);
            if off.sqrt() <= 1e-14 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        a[y * n + y]
            .partial_cmp(&a[x * n + x])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    (values, vectors)
}
