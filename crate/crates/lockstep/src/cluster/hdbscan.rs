//! Simplified hierarchical density clustering.
//!
//! Pipeline: core distances (distance to the `min_samples`-th nearest other
//! point) -> mutual-reachability distances -> minimum spanning tree ->
//! single-linkage hierarchy -> condensed tree at `min_cluster_size` ->
//! flat clusters by the excess-of-mass criterion. Points outside every
//! selected cluster are labeled -1.

use crate::embed::{squared_distance, EmbeddingMatrix};
use crate::error::Result;

use super::{ClusterAssignment, Stage};

/// A cluster node of the condensed tree.
#[derive(Debug, Clone)]
pub struct TreeCluster {
    /// Index into [`CondensedTree::clusters`]; 0 is the root.
    pub id: usize,
    pub parent: Option<usize>,
    /// Lambda (= 1/distance) at which this cluster split off its parent.
    pub birth_lambda: f64,
    pub size: usize,
    /// Excess-of-mass stability: sum over members of (lambda at which the
    /// member leaves this cluster) - birth_lambda, with child clusters
    /// contributing their whole size at the split lambda.
    pub stability: f64,
    /// Points that fall out of this cluster directly (index, exit lambda).
    pub point_exits: Vec<(usize, f64)>,
    /// Child cluster ids (0 or 2).
    pub children: Vec<usize>,
}

/// Condensed cluster hierarchy, exposed so that selection strategies other
/// than excess-of-mass can be compared against the built-in one.
#[derive(Debug, Clone)]
pub struct CondensedTree {
    pub clusters: Vec<TreeCluster>,
    pub n_points: usize,
}

impl CondensedTree {
    /// Ids of all strict descendants of `id`.
    pub fn descendants(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut queue = vec![id];
        while let Some(current) = queue.pop() {
            for &child in &self.clusters[current].children {
                out.push(child);
                queue.push(child);
            }
        }
        out
    }

    /// All member points of cluster `id`: direct exits plus descendants'.
    pub fn member_points(&self, id: usize) -> Vec<usize> {
        let mut points: Vec<usize> = self.clusters[id]
            .point_exits
            .iter()
            .map(|&(p, _)| p)
            .collect();
        for d in self.descendants(id) {
            points.extend(self.clusters[d].point_exits.iter().map(|&(p, _)| p));
        }
        points.sort_unstable();
        points
    }

    /// Selectable cluster ids: every cluster except the root.
    pub fn candidates(&self) -> Vec<usize> {
        (1..self.clusters.len()).collect()
    }

    /// Flat labels induced by a selection of cluster ids (assumed to be an
    /// antichain). Clusters are numbered by their smallest member point.
    pub fn labels_for_selection(&self, selection: &[usize]) -> Vec<i32> {
        let mut groups: Vec<Vec<usize>> = selection
            .iter()
            .map(|&id| self.member_points(id))
            .filter(|points| !points.is_empty())
            .collect();
        groups.sort_by_key(|points| points[0]);
        let mut labels = vec![-1i32; self.n_points];
        for (label, points) in groups.iter().enumerate() {
            for &p in points {
                labels[p] = label as i32;
            }
        }
        labels
    }

    /// Built-in flat extraction: bottom-up excess of mass. A cluster is
    /// selected when its own stability strictly exceeds the combined
    /// (propagated) stability of its child clusters; ties keep the children.
    pub fn excess_of_mass_selection(&self) -> Vec<usize> {
        let n = self.clusters.len();
        let mut propagated: Vec<f64> = self.clusters.iter().map(|c| c.stability).collect();
        let mut selected = vec![false; n];
        // children always have larger ids than their parent
        for id in (1..n).rev() {
            let cluster = &self.clusters[id];
            if cluster.children.is_empty() {
                selected[id] = true;
                continue;
            }
            let child_sum: f64 = cluster.children.iter().map(|&c| propagated[c]).sum();
            if cluster.stability > child_sum {
                selected[id] = true;
                for d in self.descendants(id) {
                    selected[d] = false;
                }
            } else {
                propagated[id] = child_sum;
            }
        }
        (1..n).filter(|&id| selected[id]).collect()
    }
}

struct MstEdge {
    a: usize,
    b: usize,
    distance: f64,
}

fn core_distances(m: &EmbeddingMatrix, min_samples: usize) -> Vec<f64> {
    let n = m.rows();
    let mut core = vec![0.0; n];
    if n < 2 {
        return core;
    }
    let k = min_samples.min(n - 1);
    let mut dists = Vec::with_capacity(n - 1);
    for (i, core_dist) in core.iter_mut().enumerate() {
        dists.clear();
        for j in 0..n {
            if j != i {
                dists.push(m.distance(i, j));
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        *core_dist = dists[k - 1];
    }
    core
}

/// Prim's algorithm over the implicit mutual-reachability graph.
fn mutual_reachability_mst(m: &EmbeddingMatrix, core: &[f64]) -> Vec<MstEdge> {
    let n = m.rows();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));

    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = squared_distance(m.row(current), m.row(j))
                .sqrt()
                .max(core[current])
                .max(core[j]);
            if d < best[j] {
                best[j] = d;
                best_from[j] = current;
            }
            if best[j] < next_d {
                next_d = best[j];
                next = j;
            }
        }
        edges.push(MstEdge {
            a: best_from[next],
            b: next,
            distance: next_d,
        });
        in_tree[next] = true;
        current = next;
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    /// dendrogram node currently representing each root
    node: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
            node: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

struct Dendrogram {
    /// (left child node, right child node, merge distance, size); node ids
    /// 0..n are points, n+i is the i-th merge.
    merges: Vec<(usize, usize, f64, usize)>,
    n: usize,
}

fn single_linkage(mut edges: Vec<MstEdge>, n: usize) -> Dendrogram {
    edges.sort_by(|x, y| {
        x.distance
            .partial_cmp(&y.distance)
            .expect("finite distances")
            .then_with(|| (x.a.min(x.b), x.a.max(x.b)).cmp(&(y.a.min(y.b), y.a.max(y.b))))
    });
    let mut uf = UnionFind::new(n);
    let mut merges = Vec::with_capacity(edges.len());
    for edge in &edges {
        let ra = uf.find(edge.a);
        let rb = uf.find(edge.b);
        let (na, nb) = (uf.node[ra], uf.node[rb]);
        let size = uf.size[ra] + uf.size[rb];
        merges.push((na, nb, edge.distance, size));
        let new_node = n + merges.len() - 1;
        uf.parent[ra] = rb;
        uf.size[rb] = size;
        uf.node[rb] = new_node;
    }
    Dendrogram { merges, n }
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

fn condense(dendrogram: &Dendrogram, min_cluster_size: usize) -> CondensedTree {
    let n = dendrogram.n;
    let node_size = |node: usize| -> usize {
        if node < n {
            1
        } else {
            dendrogram.merges[node - n].3
        }
    };

    let mut clusters = vec![TreeCluster {
        id: 0,
        parent: None,
        birth_lambda: 0.0,
        size: n,
        stability: 0.0,
        point_exits: Vec::new(),
        children: Vec::new(),
    }];

    // walk down from the top merge; (dendrogram node, owning cluster id)
    let root_node = if dendrogram.merges.is_empty() {
        // single point or empty input: all points exit the root immediately
        for p in 0..n {
            clusters[0].point_exits.push((p, f64::INFINITY));
        }
        return finish(CondensedTree {
            clusters,
            n_points: n,
        });
    } else {
        n + dendrogram.merges.len() - 1
    };

    let mut stack = vec![(root_node, 0usize)];
    while let Some((node, owner)) = stack.pop() {
        debug_assert!(node >= n, "only merge nodes are walked");
        let (left, right, distance, _) = dendrogram.merges[node - n];
        let lambda = lambda_of(distance);
        let left_big = node_size(left) >= min_cluster_size;
        let right_big = node_size(right) >= min_cluster_size;

        // a "big" child (size >= min_cluster_size >= 2) is always a merge
        // node, never a bare point
        match (left_big, right_big) {
            (true, true) => {
                // true split: two new clusters under `owner`
                for child_node in [left, right] {
                    let id = clusters.len();
                    clusters.push(TreeCluster {
                        id,
                        parent: Some(owner),
                        birth_lambda: lambda,
                        size: node_size(child_node),
                        stability: 0.0,
                        point_exits: Vec::new(),
                        children: Vec::new(),
                    });
                    clusters[owner].children.push(id);
                    stack.push((child_node, id));
                }
            }
            (true, false) => {
                spill_points(dendrogram, right, lambda, owner, &mut clusters);
                stack.push((left, owner));
            }
            (false, true) => {
                spill_points(dendrogram, left, lambda, owner, &mut clusters);
                stack.push((right, owner));
            }
            (false, false) => {
                // cluster dissolves: every point below exits at this lambda
                spill_points(dendrogram, left, lambda, owner, &mut clusters);
                spill_points(dendrogram, right, lambda, owner, &mut clusters);
            }
        }
    }

    finish(CondensedTree {
        clusters,
        n_points: n,
    })
}

/// Record every point under `node` as exiting `owner` at `lambda`.
fn spill_points(
    dendrogram: &Dendrogram,
    node: usize,
    lambda: f64,
    owner: usize,
    clusters: &mut [TreeCluster],
) {
    let n = dendrogram.n;
    let mut stack = vec![node];
    while let Some(current) = stack.pop() {
        if current < n {
            clusters[owner].point_exits.push((current, lambda));
        } else {
            let (l, r, _, _) = dendrogram.merges[current - n];
            stack.push(l);
            stack.push(r);
        }
    }
}

fn finish(mut tree: CondensedTree) -> CondensedTree {
    for id in 0..tree.clusters.len() {
        let birth = tree.clusters[id].birth_lambda;
        let mut stability: f64 = tree.clusters[id]
            .point_exits
            .iter()
            .map(|&(_, exit)| (clamp_lambda(exit) - birth).max(0.0))
            .sum();
        for &child in &tree.clusters[id].children.clone() {
            let child_birth = tree.clusters[child].birth_lambda;
            let child_size = tree.clusters[child].size;
            stability += (clamp_lambda(child_birth) - birth).max(0.0) * child_size as f64;
        }
        tree.clusters[id].stability = stability;
    }
    tree
}

/// Infinite exit lambdas (duplicate points merging at distance 0) would
/// make every ancestor's stability infinite; cap them.
fn clamp_lambda(lambda: f64) -> f64 {
    lambda.min(1e12)
}

/// Build the condensed tree for the given matrix.
pub fn condensed_tree(
    m: &EmbeddingMatrix,
    min_cluster_size: usize,
    min_samples: usize,
) -> CondensedTree {
    let n = m.rows();
    let core = core_distances(m, min_samples.max(1));
    let edges = if n < 2 {
        Vec::new()
    } else {
        mutual_reachability_mst(m, &core)
    };
    let dendrogram = single_linkage(edges, n);
    condense(&dendrogram, min_cluster_size.max(2))
}

/// Density clustering with excess-of-mass cluster extraction. Points outside
/// every selected cluster get label -1.
pub fn hdbscan_simplified(
    m: &EmbeddingMatrix,
    min_cluster_size: usize,
    min_samples: usize,
) -> Result<ClusterAssignment> {
    let n = m.rows();
    if n == 0 || n < min_cluster_size {
        return Ok(ClusterAssignment::new(
            m.row_ids().to_vec(),
            vec![-1; n],
            Stage::Semantic,
        ));
    }
    let tree = condensed_tree(m, min_cluster_size, min_samples);
    let selection = tree.excess_of_mass_selection();
    let labels = tree.labels_for_selection(&selection);
    Ok(ClusterAssignment::new(
        m.row_ids().to_vec(),
        labels,
        Stage::Semantic,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix(points: &[(f64, f64)]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            (0..points.len()).map(|i| format!("p{i}")).collect(),
            2,
            points.iter().flat_map(|&(x, y)| [x, y]).collect(),
        )
        .unwrap()
    }

    fn two_blobs(n_each: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        for _ in 0..n_each {
            points.push((rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)));
        }
        for _ in 0..n_each {
            points.push((
                10.0 + rng.random_range(-0.2..0.2),
                10.0 + rng.random_range(-0.2..0.2),
            ));
        }
        points
    }

    #[test]
    fn two_tight_groups_no_noise() {
        let points = two_blobs(10, 1);
        let m = matrix(&points);
        let assignment = hdbscan_simplified(&m, 5, 1).unwrap();
        assert_eq!(assignment.n_clusters(), 2);
        assert_eq!(assignment.noise_count(), 0);
        let labels = assignment.labels();
        for i in 1..10 {
            assert_eq!(labels[i], labels[0]);
        }
        for i in 11..20 {
            assert_eq!(labels[i], labels[10]);
        }
        assert_ne!(labels[0], labels[10]);
    }

    #[test]
    fn cannot_meet_min_cluster_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<(f64, f64)> = (0..10)
            .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
            .collect();
        let m = matrix(&points);
        let assignment = hdbscan_simplified(&m, 11, 1).unwrap();
        assert_eq!(assignment.n_clusters(), 0);
        assert_eq!(assignment.noise_count(), 10);
    }

    #[test]
    fn noise_fraction_monotone_in_min_cluster_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<(f64, f64)> = (0..24)
            .map(|_| (rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)))
            .collect();
        let m = matrix(&points);
        let mut last_noise = 0usize;
        for mcs in [2usize, 3, 5, 8, 13, 25] {
            let assignment = hdbscan_simplified(&m, mcs, 1).unwrap();
            let noise = assignment.noise_count();
            assert!(
                noise >= last_noise,
                "noise dropped from {last_noise} to {noise} at mcs={mcs}"
            );
            last_noise = noise;
        }
    }

    #[test]
    fn deterministic() {
        let points = two_blobs(8, 4);
        let m = matrix(&points);
        let a = hdbscan_simplified(&m, 3, 2).unwrap();
        let b = hdbscan_simplified(&m, 3, 2).unwrap();
        assert_eq!(a, b);
    }

    /// Exhaustive-stability oracle: enumerate every antichain of condensed
    /// tree clusters and keep the selection with maximal total stability.
    pub(crate) fn best_selection_brute_force(tree: &CondensedTree) -> (f64, Vec<usize>) {
        let candidates = tree.candidates();
        let mut best = (0.0f64, Vec::new());
        let count = candidates.len();
        assert!(count <= 20, "fixture too large for brute force");
        'subsets: for mask in 0u32..(1 << count) {
            let selection: Vec<usize> = (0..count)
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| candidates[i])
                .collect();
            // antichain check
            for &id in &selection {
                for d in tree.descendants(id) {
                    if selection.contains(&d) {
                        continue 'subsets;
                    }
                }
            }
            let total: f64 = selection.iter().map(|&id| tree.clusters[id].stability).sum();
            if total > best.0 {
                best = (total, selection);
            }
        }
        best
    }

    #[test]
    fn eom_matches_bruteforce_on_small_fixtures() {
        for seed in 0..30u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(4..=12);
            let points: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)))
                .collect();
            let m = matrix(&points);
            let tree = condensed_tree(&m, 2, 1);
            let eom = tree.excess_of_mass_selection();
            let eom_total: f64 = eom.iter().map(|&id| tree.clusters[id].stability).sum();
            let (best_total, best) = best_selection_brute_force(&tree);
            assert!(
                (eom_total - best_total).abs() <= 1e-9 * best_total.max(1.0),
                "seed {seed}: eom {eom_total} vs brute force {best_total}"
            );
            assert_eq!(
                tree.labels_for_selection(&eom),
                tree.labels_for_selection(&best),
                "seed {seed}"
            );
        }
    }
}
