//! Embedding matrices and their alignment.
//!
//! All modalities end up in an [`EmbeddingMatrix`]: one named row per
//! entity, fixed width, no non-finite entries. Text vectors come from
//! [`pv_dbow`], network vectors from [`train_sgns`] over walk corpora,
//! sentence vectors from [`load_external_embeddings`]. [`concat_align`]
//! reduces both modalities to a common width and concatenates them.

mod pca;
mod sgns;

pub use pca::{pca_reduce, PcaResult};
pub use sgns::{pv_dbow, train_sgns, PvDbowModel, SgnsConfig, SgnsModel, TokenCorpus};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::data::{Dataset, PostRecord};
use crate::error::{Error, Result};

/// Dense row-major matrix with named, unique rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    row_ids: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Build from parts, validating shape, finiteness, and id uniqueness.
    pub fn new(row_ids: Vec<String>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != row_ids.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: row_ids.len() * dim,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("embedding contains non-finite values".into()));
        }
        let index: HashMap<String, usize> = row_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        if index.len() != row_ids.len() {
            return Err(Error::Config("duplicate row ids in embedding".into()));
        }
        Ok(EmbeddingMatrix {
            row_ids,
            index,
            dim,
            values,
        })
    }

    pub fn zeros(row_ids: Vec<String>, dim: usize) -> Self {
        let values = vec![0.0; row_ids.len() * dim];
        Self::new(row_ids, dim, values).expect("zeros are valid")
    }

    pub fn rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_by_id(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Extract the named rows, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<EmbeddingMatrix> {
        let mut values = Vec::with_capacity(ids.len() * self.dim);
        let mut missing = Vec::new();
        for id in ids {
            match self.row_by_id(id) {
                Some(row) => values.extend_from_slice(row),
                None => missing.push(id.clone()),
            }
        }
        if !missing.is_empty() {
            missing.truncate(16);
            return Err(Error::MissingRows { count: missing.len(), ids: missing });
        }
        EmbeddingMatrix::new(ids.to_vec(), self.dim, values)
    }

    /// Same rows under new names (order preserved).
    pub fn renamed(&self, ids: Vec<String>) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::new(ids, self.dim, self.values.clone())
    }

    /// Scale every row to unit L2 norm; zero rows stay zero.
    pub fn l2_normalized(&self) -> EmbeddingMatrix {
        let mut out = self.clone();
        for i in 0..out.rows() {
            let norm = out.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in out.row_mut(i) {
                    *v /= norm;
                }
            }
        }
        out
    }

    /// Euclidean distance between two rows.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        squared_distance(self.row(a), self.row(b)).sqrt()
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Write a matrix in the external-vectors text format:
/// `dim=<d> count=<n>` header, then `id v1 ... vd` per row.
pub fn write_embeddings(path: &Path, m: &EmbeddingMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "dim={} count={}", m.dim(), m.rows())?;
    for i in 0..m.rows() {
        write!(out, "{}", m.row_ids()[i])?;
        for v in m.row(i) {
            write!(out, " {v}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct JsonVectorRow {
    id: String,
    vector: Vec<f64>,
}

/// Load externally produced vectors and reorder them to `expected_ids`.
///
/// Accepts either the text table (`dim=<d> count=<n>` header) or JSON-lines
/// `{id, vector}` rows; the two are distinguished by the first byte.
pub fn load_external_embeddings(path: &Path, expected_ids: &[String]) -> Result<EmbeddingMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();

    let mut ids = Vec::new();
    let mut dim: Option<usize> = None;
    let mut values = Vec::new();

    let mut push_row = |id: String, row: Vec<f64>, line_no: usize| -> Result<()> {
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                })
            }
            _ => {}
        }
        ids.push(id);
        values.extend(row);
        let _ = line_no;
        Ok(())
    };

    let first = loop {
        match lines.next() {
            None => break None,
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break Some(line);
                }
            }
        }
    };
    let Some(first) = first else {
        return Err(Error::MalformedRecord {
            line: 1,
            reason: "empty embedding file".into(),
        });
    };

    if first.trim_start().starts_with('{') {
        // JSON-lines
        for (i, line) in std::iter::once(Ok(first)).chain(lines).enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: JsonVectorRow =
                serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            push_row(row.id, row.vector, i + 1)?;
        }
    } else {
        // text table; header is `dim=<d> count=<n>`
        let header_dim = parse_header(&first)?;
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let id = parts
                .next()
                .ok_or_else(|| Error::MalformedRecord {
                    line: i + 2,
                    reason: "missing id".into(),
                })?
                .to_string();
            let row: Vec<f64> = parts
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| Error::MalformedRecord {
                        line: i + 2,
                        reason: format!("bad float `{tok}`"),
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != header_dim {
                return Err(Error::DimensionMismatch {
                    expected: header_dim,
                    found: row.len(),
                });
            }
            push_row(id, row, i + 2)?;
        }
    }

    let dim = dim.ok_or(Error::MalformedRecord {
        line: 1,
        reason: "no vector rows".into(),
    })?;
    let full = EmbeddingMatrix::new(ids, dim, values)?;
    full.select(expected_ids)
}

fn parse_header(line: &str) -> Result<usize> {
    let mut dim = None;
    for part in line.split_whitespace() {
        if let Some(v) = part.strip_prefix("dim=") {
            dim = v.parse::<usize>().ok();
        }
    }
    dim.ok_or(Error::MalformedRecord {
        line: 1,
        reason: "header must be `dim=<d> count=<n>`".into(),
    })
}

/// Slice the post rows out of a node-embedding matrix (rows named with the
/// `p:` prefix) and rename them to bare post ids, in dataset order.
pub fn post_rows_from_nodes(nodes: &EmbeddingMatrix, posts: &[PostRecord]) -> Result<EmbeddingMatrix> {
    let prefixed: Vec<String> = posts.iter().map(|p| format!("p:{}", p.post_id)).collect();
    let sliced = nodes.select(&prefixed)?;
    sliced.renamed(posts.iter().map(|p| p.post_id.clone()).collect())
}

/// Reduce both modalities to `target_dim` with PCA, L2-normalize each half
/// row-wise, and concatenate. Output width is `2 * target_dim`.
pub fn concat_align(
    text: &EmbeddingMatrix,
    network: &EmbeddingMatrix,
    target_dim: usize,
) -> Result<EmbeddingMatrix> {
    if text.rows() != network.rows() {
        return Err(Error::RowMismatch);
    }
    let network = network.select(text.row_ids()).map_err(|_| Error::RowMismatch)?;

    let text_half = pca_reduce(text, target_dim)?.matrix.l2_normalized();
    let net_half = pca_reduce(&network, target_dim)?.matrix.l2_normalized();

    let mut values = Vec::with_capacity(text.rows() * target_dim * 2);
    for i in 0..text.rows() {
        values.extend_from_slice(text_half.row(i));
        values.extend_from_slice(net_half.row(i));
    }
    EmbeddingMatrix::new(text.row_ids().to_vec(), 2 * target_dim, values)
}

/// Text embeddings for every post: PV-DBOW document vectors, with the zero
/// vector for empty-text posts.
pub fn text_embeddings(ds: &Dataset, cfg: &SgnsConfig) -> Result<EmbeddingMatrix> {
    Ok(pv_dbow(ds, cfg)?.docs)
}
