//! Cluster-quality metrics and report assembly: silhouette score,
//! factuality-dispersion statistics, size/time-gap distributions, channel
//! frequency, and the ablation grid over method variants.

mod ablation;

pub use ablation::{
    epsilon_sweep, run_ablation, run_method, semantic_stage, verify_refinement, write_sweep,
    MethodConfig, NetworkRoute, RouteCache, StageParams, SweepReport, SweepRow, TextRoute,
};

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::cluster::ClusterAssignment;
use crate::data::{population_std, Dataset};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Mean silhouette over all clustered (non-noise) points, using Euclidean
/// distances on the supplied embedding matrix. Points in singleton clusters
/// score 0 by convention.
pub fn silhouette(m: &EmbeddingMatrix, assignment: &ClusterAssignment) -> Result<f64> {
    silhouette_sampled(m, assignment, 50_000, 0)
}

/// [`silhouette`] with an explicit cap: above `max_points` clustered points,
/// a seeded uniform sample of that size is scored instead of the full set.
pub fn silhouette_sampled(
    m: &EmbeddingMatrix,
    assignment: &ClusterAssignment,
    max_points: usize,
    seed: u64,
) -> Result<f64> {
    let samples = silhouette_values(m, assignment, max_points, seed)?;
    Ok(samples.iter().map(|&(_, s)| s).sum::<f64>() / samples.len() as f64)
}

/// Per-point silhouette values `(matrix row, s)` for clustered points.
pub fn silhouette_values(
    m: &EmbeddingMatrix,
    assignment: &ClusterAssignment,
    max_points: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    // clustered points resolved to matrix rows
    let mut rows: Vec<(usize, i32)> = Vec::new();
    for (id, &label) in assignment.ids().iter().zip(assignment.labels()) {
        if label < 0 {
            continue;
        }
        let row = m
            .position(id)
            .ok_or_else(|| Error::MissingRows { count: 1, ids: vec![id.clone()] })?;
        rows.push((row, label));
    }

    let n_clusters = {
        let mut seen = std::collections::BTreeSet::new();
        for &(_, label) in &rows {
            seen.insert(label);
        }
        seen.len()
    };
    if n_clusters < 2 {
        return Err(Error::TooFewClusters(n_clusters));
    }

    if rows.len() > max_points {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rows.shuffle(&mut rng);
        rows.truncate(max_points);
        rows.sort_unstable();
    }

    let mut by_label: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for &(row, label) in &rows {
        by_label.entry(label).or_default().push(row);
    }

    let mut out = Vec::with_capacity(rows.len());
    for &(row, label) in &rows {
        let own = &by_label[&label];
        if own.len() == 1 {
            out.push((row, 0.0));
            continue;
        }
        let a = own
            .iter()
            .filter(|&&other| other != row)
            .map(|&other| m.distance(row, other))
            .sum::<f64>()
            / (own.len() - 1) as f64;
        let b = by_label
            .iter()
            .filter(|(&l, _)| l != label)
            .map(|(_, members)| {
                members.iter().map(|&other| m.distance(row, other)).sum::<f64>()
                    / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let s = if a == 0.0 && b == 0.0 {
            0.0
        } else {
            (b - a) / a.max(b)
        };
        out.push((row, s));
    }
    Ok(out)
}

/// Per-cluster factuality dispersion: population std over the labeled
/// members of each qualifying cluster (size >= 2 with >= 2 labeled posts).
#[derive(Debug, Clone, Serialize)]
pub struct FactualityStats {
    /// (label, labeled member count, population std) per qualifying cluster.
    pub per_cluster: Vec<(i32, usize, f64)>,
    pub avg: f64,
    pub median: f64,
    /// std of the per-cluster stds
    pub std: f64,
    /// proportion of qualifying clusters with std exactly 0
    pub prop_zero: f64,
    pub qualifying: usize,
    /// clusters skipped for lacking two labeled members
    pub skipped_unlabeled: usize,
}

pub fn factuality_stats(assignment: &ClusterAssignment, ds: &Dataset) -> Result<FactualityStats> {
    let label_of_post: std::collections::HashMap<&str, u8> = {
        let stats = crate::data::join_factuality(ds);
        ds.posts
            .iter()
            .filter_map(|p| stats.per_post.get(&p.post_id).map(|&s| (p.post_id.as_str(), s)))
            .collect()
    };

    let mut per_cluster = Vec::new();
    let mut skipped = 0usize;
    for (label, rows) in assignment.members() {
        if rows.len() < 2 {
            continue;
        }
        let scores: Vec<f64> = rows
            .iter()
            .filter_map(|&row| {
                label_of_post
                    .get(assignment.ids()[row].as_str())
                    .map(|&s| s as f64)
            })
            .collect();
        if scores.len() < 2 {
            skipped += 1;
            continue;
        }
        let std = population_std(scores.iter().copied(), scores.len());
        per_cluster.push((label, scores.len(), std));
    }
    if per_cluster.is_empty() {
        return Err(Error::NoQualifyingClusters);
    }

    let mut stds: Vec<f64> = per_cluster.iter().map(|&(_, _, s)| s).collect();
    stds.sort_by(|a, b| a.partial_cmp(b).expect("finite stds"));
    let n = stds.len();
    let avg = stds.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        stds[n / 2]
    } else {
        (stds[n / 2 - 1] + stds[n / 2]) / 2.0
    };
    let std = population_std(stds.iter().copied(), n);
    let prop_zero = stds.iter().filter(|&&s| s == 0.0).count() as f64 / n as f64;

    Ok(FactualityStats {
        per_cluster,
        avg,
        median,
        std,
        prop_zero,
        qualifying: n,
        skipped_unlabeled: skipped,
    })
}

/// Cluster-shape distributions over the kept clusters.
#[derive(Debug, Clone, Serialize, Default)]
pub struct Distributions {
    /// size -> number of clusters of that size
    pub size_histogram: BTreeMap<usize, usize>,
    /// (label, max pairwise time gap in seconds) per cluster
    pub max_gaps: Vec<(i32, i64)>,
    /// platform name -> post count over kept posts
    pub platform_counts: BTreeMap<String, usize>,
    pub clusters: usize,
    pub posts: usize,
    pub mean_cluster_size: f64,
}

pub fn cluster_distributions(assignment: &ClusterAssignment, ds: &Dataset) -> Distributions {
    let post_of: std::collections::HashMap<&str, &crate::data::PostRecord> =
        ds.posts.iter().map(|p| (p.post_id.as_str(), p)).collect();

    let mut out = Distributions::default();
    for (label, rows) in assignment.members() {
        *out.size_histogram.entry(rows.len()).or_insert(0) += 1;
        out.clusters += 1;
        out.posts += rows.len();
        let mut min_t = i64::MAX;
        let mut max_t = i64::MIN;
        for &row in &rows {
            if let Some(post) = post_of.get(assignment.ids()[row].as_str()) {
                min_t = min_t.min(post.published_time);
                max_t = max_t.max(post.published_time);
                *out.platform_counts
                    .entry(post.platform.as_str().to_string())
                    .or_insert(0) += 1;
            }
        }
        out.max_gaps
            .push((label, if max_t >= min_t { max_t - min_t } else { 0 }));
    }
    out.mean_cluster_size = if out.clusters == 0 {
        0.0
    } else {
        out.posts as f64 / out.clusters as f64
    };
    out
}

/// Channels ranked by how many kept posts link to them.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelFrequencyRow {
    pub channel_id: String,
    pub name: String,
    pub factuality: Option<u8>,
    pub posts: usize,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct ChannelFrequency {
    pub rows: Vec<ChannelFrequencyRow>,
    /// among kept posts whose channel is labeled, the fraction linking a
    /// factuality-0 channel
    pub fraction_factuality_zero: f64,
}

pub fn channel_frequency(
    assignment: &ClusterAssignment,
    ds: &Dataset,
    top_n: usize,
) -> ChannelFrequency {
    let post_of: std::collections::HashMap<&str, &crate::data::PostRecord> =
        ds.posts.iter().map(|p| (p.post_id.as_str(), p)).collect();

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut labeled_posts = 0usize;
    let mut zero_posts = 0usize;
    for (_, rows) in assignment.members() {
        for &row in &rows {
            let Some(post) = post_of.get(assignment.ids()[row].as_str()) else {
                continue;
            };
            let Some(channel_id) = ds.post_channel(post) else {
                continue;
            };
            *counts.entry(channel_id).or_insert(0) += 1;
            if let Some(score) = ds.post_factuality(post) {
                labeled_posts += 1;
                if score == 0 {
                    zero_posts += 1;
                }
            }
        }
    }

    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top_n);

    ChannelFrequency {
        rows: ranked
            .into_iter()
            .map(|(channel_id, posts)| {
                let channel = ds.channels.get(channel_id);
                ChannelFrequencyRow {
                    channel_id: channel_id.to_string(),
                    name: channel.map(|c| c.name.clone()).unwrap_or_default(),
                    factuality: channel.and_then(|c| c.factuality),
                    posts,
                }
            })
            .collect(),
        fraction_factuality_zero: if labeled_posts == 0 {
            0.0
        } else {
            zero_posts as f64 / labeled_posts as f64
        },
    }
}

/// Everything reported for one method configuration (one ablation row).
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub method: String,
    pub silhouette: f64,
    pub fact_avg: f64,
    pub fact_median: f64,
    pub fact_std: f64,
    pub fact_prop_zero: f64,
    /// clusters before singleton dropping
    pub clusters_total: usize,
    pub clusters_kept: usize,
    pub posts_kept: usize,
    pub distributions: Distributions,
    pub channels: ChannelFrequency,
    /// K used by the k-means route, when applicable
    pub k_used: Option<usize>,
}

/// Assemble a report for a finalized (singleton-dropped) assignment.
/// `matrix` must be the semantic-stage embeddings: the silhouette is always
/// computed against those, even after temporal subdivision.
pub fn evaluate_assignment(
    method: &str,
    matrix: &EmbeddingMatrix,
    finalized: &ClusterAssignment,
    clusters_total: usize,
    ds: &Dataset,
    k_used: Option<usize>,
) -> Result<EvaluationReport> {
    let silhouette = silhouette(matrix, finalized)?;
    let facts = factuality_stats(finalized, ds)?;
    let distributions = cluster_distributions(finalized, ds);
    let channels = channel_frequency(finalized, ds, 10);
    Ok(EvaluationReport {
        method: method.to_string(),
        silhouette,
        fact_avg: facts.avg,
        fact_median: facts.median,
        fact_std: facts.std,
        fact_prop_zero: facts.prop_zero,
        clusters_total,
        clusters_kept: distributions.clusters,
        posts_kept: distributions.posts,
        distributions,
        channels,
        k_used,
    })
}

/// `table2.csv`: one row per method with the silhouette and factuality
/// dispersion columns. The dataset-level baseline std rides along as a
/// leading `#` comment.
pub fn write_table2(path: &Path, reports: &[EvaluationReport], baseline_std: Option<f64>) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(std) = baseline_std {
        writeln!(out, "# dataset_factuality_std={std}")?;
    }
    writeln!(out, "method,silhouette,avg,median,std,prop0")?;
    for r in reports {
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.method, r.silhouette, r.fact_avg, r.fact_median, r.fact_std, r.fact_prop_zero
        )?;
    }
    out.flush()?;
    Ok(())
}

/// `fig3_sizes.csv` (`size,count`) and `fig3_gaps.csv`
/// (`label,max_gap_seconds`) for one report.
pub fn write_fig3(dir: &Path, report: &EvaluationReport) -> Result<()> {
    use std::io::Write;
    let mut sizes = std::io::BufWriter::new(std::fs::File::create(dir.join("fig3_sizes.csv"))?);
    writeln!(sizes, "size,count")?;
    for (size, count) in &report.distributions.size_histogram {
        writeln!(sizes, "{size},{count}")?;
    }
    sizes.flush()?;

    let mut gaps = std::io::BufWriter::new(std::fs::File::create(dir.join("fig3_gaps.csv"))?);
    writeln!(gaps, "label,max_gap_seconds")?;
    for (label, gap) in &report.distributions.max_gaps {
        writeln!(gaps, "{label},{gap}")?;
    }
    gaps.flush()?;
    Ok(())
}

/// `table3.csv`: the most frequent channels among kept posts.
pub fn write_table3(path: &Path, channels: &ChannelFrequency) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "rank,channel_id,name,factuality,posts")?;
    for (i, row) in channels.rows.iter().enumerate() {
        let fact = row.factuality.map(|f| f.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            row.channel_id,
            row.name.replace(',', " "),
            fact,
            row.posts
        )?;
    }
    out.flush()?;
    Ok(())
}
