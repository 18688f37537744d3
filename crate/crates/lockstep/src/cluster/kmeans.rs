//! K-means with k-means++ seeding and Lloyd iteration to an assignment
//! fixed point. All ties break toward the lowest index, so runs are
//! reproducible given the seed and input order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embed::{squared_distance, EmbeddingMatrix};
use crate::error::{Error, Result};

use super::{ClusterAssignment, Stage};

const MAX_ITERATIONS: usize = 300;

/// Clustering plus diagnostics.
#[derive(Debug, Clone)]
pub struct KmeansOutcome {
    pub assignment: ClusterAssignment,
    pub inertia: f64,
    pub iterations: usize,
    pub centroids: Vec<Vec<f64>>,
    /// inertia measured at each assignment pass; non-increasing
    pub inertia_trace: Vec<f64>,
}

/// k-means++ seeding: first center uniform, later centers sampled with
/// probability proportional to squared distance from the chosen set.
pub fn kmeans_pp_centers(m: &EmbeddingMatrix, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = m.rows();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, rows: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];

    let first = rng.random_range(0..n);
    centers.push(m.row(first).to_vec());
    chosen[first] = true;

    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(m.row(i), &centers[0]))
        .collect();

    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut draw = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if draw < w {
                    pick = i;
                    break;
                }
                draw -= w;
            }
            pick
        } else {
            // everything coincides with a chosen center: lowest unchosen index
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[next] = true;
        centers.push(m.row(next).to_vec());
        let newest = centers.last().expect("non-empty");
        for (i, slot) in d2.iter_mut().enumerate() {
            let d = squared_distance(m.row(i), newest);
            if d < *slot {
                *slot = d;
            }
        }
    }
    Ok(centers)
}

/// Lloyd iteration from the given centers until the assignment stops
/// changing or [`MAX_ITERATIONS`] is hit. Empty clusters keep their centroid.
pub fn lloyd_from_centers(m: &EmbeddingMatrix, mut centroids: Vec<Vec<f64>>) -> KmeansOutcome {
    let n = m.rows();
    let k = centroids.len();
    let dim = m.dim();
    let mut assignment = vec![0usize; n];
    let mut iterations = 0;
    let mut inertia_trace = Vec::new();

    loop {
        iterations += 1;
        let mut changed = false;
        let mut pass_inertia = 0.0;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centroids.iter().enumerate() {
                let d = squared_distance(m.row(i), center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            pass_inertia += best_d;
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        inertia_trace.push(pass_inertia);
        if !changed && iterations > 1 {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(m.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        if iterations >= MAX_ITERATIONS {
            break;
        }
    }

    let inertia = (0..n)
        .map(|i| squared_distance(m.row(i), &centroids[assignment[i]]))
        .sum();
    KmeansOutcome {
        assignment: ClusterAssignment::new(
            m.row_ids().to_vec(),
            assignment.into_iter().map(|a| a as i32).collect(),
            Stage::Semantic,
        ),
        inertia,
        iterations,
        centroids,
        inertia_trace,
    }
}

/// k-means++ seeding followed by Lloyd iteration.
pub fn kmeans(m: &EmbeddingMatrix, k: usize, seed: u64) -> Result<KmeansOutcome> {
    let centers = kmeans_pp_centers(m, k, seed)?;
    Ok(lloyd_from_centers(m, centers))
}

/// Default cluster count when the caller does not pin one.
pub fn default_k(n: usize) -> usize {
    ((n as f64 / 2.0).sqrt().ceil() as usize).max(1)
}
