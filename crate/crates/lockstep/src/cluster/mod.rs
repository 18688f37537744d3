//! Two-stage clustering: a semantic stage over embeddings (k-means or
//! density-based) and a temporal stage that subdivides each semantic
//! cluster by posting time.

mod hdbscan;
mod kmeans;
mod temporal;

pub use hdbscan::{condensed_tree, hdbscan_simplified, CondensedTree, TreeCluster};
pub use kmeans::{default_k, kmeans, kmeans_pp_centers, lloyd_from_centers, KmeansOutcome};
pub use temporal::{dbscan_1d, temporal_subdivide, TemporalParams};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which stage produced an assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Semantic,
    Temporal,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Semantic => "semantic",
            Stage::Temporal => "temporal",
        })
    }
}

/// Post-to-cluster mapping. Label -1 is noise; non-noise labels are
/// contiguous from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    ids: Vec<String>,
    labels: Vec<i32>,
    stage: Stage,
}

impl ClusterAssignment {
    /// Build an assignment, compacting labels to be contiguous from 0.
    pub fn new(ids: Vec<String>, labels: Vec<i32>, stage: Stage) -> Self {
        assert_eq!(ids.len(), labels.len());
        let mut assignment = ClusterAssignment { ids, labels, stage };
        assignment.compact();
        assignment
    }

    fn compact(&mut self) {
        let mut remap: BTreeMap<i32, i32> = BTreeMap::new();
        for &label in self.labels.iter().filter(|&&l| l >= 0) {
            let next = remap.len() as i32;
            remap.entry(label).or_insert(next);
        }
        for label in &mut self.labels {
            if *label >= 0 {
                *label = remap[label];
            }
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn label_of(&self, idx: usize) -> i32 {
        self.labels[idx]
    }

    /// Number of distinct non-noise clusters.
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().filter(|&&l| l >= 0).max().map_or(0, |&m| m as usize + 1)
    }

    /// Row indices per cluster label, ascending.
    pub fn members(&self) -> BTreeMap<i32, Vec<usize>> {
        let mut map: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (i, &label) in self.labels.iter().enumerate() {
            if label >= 0 {
                map.entry(label).or_default().push(i);
            }
        }
        map
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    /// Persist as CSV `post_id,label,stage`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["post_id", "label", "stage"])?;
        for (id, label) in self.ids.iter().zip(&self.labels) {
            writer.write_record([id.as_str(), &label.to_string(), &self.stage.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<ClusterAssignment> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut stage = Stage::Semantic;
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            ids.push(row.get(0).unwrap_or("").to_string());
            labels.push(
                row.get(1)
                    .unwrap_or("")
                    .parse::<i32>()
                    .map_err(|_| Error::MalformedRecord {
                        line: i + 2,
                        reason: "label is not an integer".into(),
                    })?,
            );
            stage = match row.get(2).unwrap_or("semantic") {
                "temporal" => Stage::Temporal,
                _ => Stage::Semantic,
            };
        }
        Ok(ClusterAssignment { ids, labels, stage })
    }
}

/// Relabel size-1 clusters to noise and compact the rest.
pub fn drop_singletons(assignment: &ClusterAssignment) -> ClusterAssignment {
    let mut sizes: BTreeMap<i32, usize> = BTreeMap::new();
    for &label in assignment.labels.iter().filter(|&&l| l >= 0) {
        *sizes.entry(label).or_insert(0) += 1;
    }
    let labels: Vec<i32> = assignment
        .labels
        .iter()
        .map(|&l| if l >= 0 && sizes[&l] >= 2 { l } else { -1 })
        .collect();
    ClusterAssignment::new(assignment.ids.clone(), labels, assignment.stage)
}
