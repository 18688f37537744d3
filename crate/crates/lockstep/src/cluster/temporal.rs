//! Temporal subdivision: 1-D DBSCAN over posting times, run independently
//! inside each semantic cluster. The temporal partition always refines the
//! semantic one.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

use super::{ClusterAssignment, Stage};

/// DBSCAN parameters for the time axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemporalParams {
    pub epsilon_seconds: f64,
    pub min_pts: usize,
}

impl Default for TemporalParams {
    /// eps = 52 s, the inter-arrival threshold between a video's first share
    /// and its successive shares; min_pts = 2 to keep 2-post clusters.
    fn default() -> Self {
        TemporalParams {
            epsilon_seconds: 52.0,
            min_pts: 2,
        }
    }
}

/// Classic DBSCAN on a line with the absolute-difference metric.
///
/// The eps-neighborhood of a point counts the point itself, so a point is
/// core when at least `min_pts - 1` others lie within eps. Border points
/// join the cluster that reaches them first in (time, index) order.
/// Returns -1 for noise.
pub fn dbscan_1d(times: &[i64], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = times.len();
    let mut labels = vec![-1i32; n];
    if n == 0 {
        return labels;
    }

    // sort by (time, original index); neighborhoods are contiguous runs
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (times[i], i));
    let sorted_times: Vec<i64> = order.iter().map(|&i| times[i]).collect();

    // neighborhood of sorted position s = [lo[s], hi[s])
    let mut lo = vec![0usize; n];
    let mut hi = vec![0usize; n];
    {
        let mut start = 0usize;
        let mut end = 0usize;
        for s in 0..n {
            while (sorted_times[s] - sorted_times[start]) as f64 > eps {
                start += 1;
            }
            if end < s + 1 {
                end = s + 1;
            }
            while end < n && (sorted_times[end] - sorted_times[s]) as f64 <= eps {
                end += 1;
            }
            lo[s] = start;
            hi[s] = end;
        }
    }
    let is_core = |s: usize| hi[s] - lo[s] >= min_pts;

    let mut sorted_labels = vec![-1i32; n];
    let mut visited = vec![false; n];
    let mut cluster = 0i32;
    for s in 0..n {
        if visited[s] || !is_core(s) {
            continue;
        }
        // expand a new cluster from this core point
        let mut queue = std::collections::VecDeque::from([s]);
        visited[s] = true;
        sorted_labels[s] = cluster;
        while let Some(p) = queue.pop_front() {
            for q in lo[p]..hi[p] {
                if sorted_labels[q] < 0 {
                    sorted_labels[q] = cluster;
                }
                if !visited[q] && is_core(q) {
                    visited[q] = true;
                    queue.push_back(q);
                }
            }
        }
        cluster += 1;
    }

    for (s, &original) in order.iter().enumerate() {
        labels[original] = sorted_labels[s];
    }
    labels
}

/// Subdivide every semantic cluster by posting time. Each DBSCAN sub-cluster
/// gets a fresh global label; DBSCAN noise and leftovers become size-1
/// clusters (kept, so that singleton dropping remains an explicit step).
/// Posts that were semantic noise stay noise.
pub fn temporal_subdivide(
    base: &ClusterAssignment,
    ds: &Dataset,
    params: &TemporalParams,
) -> ClusterAssignment {
    let time_of: std::collections::HashMap<&str, i64> = ds
        .posts
        .iter()
        .map(|p| (p.post_id.as_str(), p.published_time))
        .collect();

    let mut labels = vec![-1i32; base.len()];
    let mut next = 0i32;
    for (_, member_rows) in base.members() {
        let times: Vec<i64> = member_rows
            .iter()
            .map(|&row| *time_of.get(base.ids()[row].as_str()).unwrap_or(&0))
            .collect();
        let sub = dbscan_1d(&times, params.epsilon_seconds, params.min_pts);

        // fresh labels: sub-clusters in first-appearance order by
        // (time, row), then each noise point as its own singleton
        let mut remap = std::collections::HashMap::new();
        let mut scan: Vec<usize> = (0..times.len()).collect();
        scan.sort_by_key(|&i| (times[i], member_rows[i]));
        for &i in &scan {
            if sub[i] >= 0 && !remap.contains_key(&sub[i]) {
                remap.insert(sub[i], next);
                next += 1;
            }
        }
        for &i in &scan {
            let row = member_rows[i];
            if sub[i] >= 0 {
                labels[row] = remap[&sub[i]];
            } else {
                labels[row] = next;
                next += 1;
            }
        }
    }
    ClusterAssignment::new(base.ids().to_vec(), labels, Stage::Temporal)
}
