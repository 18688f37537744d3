//! Random-walk corpus generation: second-order biased walks and
//! meta-path-constrained walks over the multipartite graph.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{HeteroGraph, NodeType};

/// Parameters for walk generation. `p` is the return parameter, `q` the
/// in-out parameter of the second-order bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 80,
            p: 0.25,
            q: 4.0,
            seed: 42,
        }
    }
}

impl WalkConfig {
    fn validate(&self) -> Result<()> {
        if self.p <= 0.0 || self.q <= 0.0 {
            return Err(Error::Config("walk p and q must be positive".into()));
        }
        if self.walk_length < 2 {
            return Err(Error::Config("walk_length must be at least 2".into()));
        }
        if self.walks_per_node == 0 {
            return Err(Error::Config("walks_per_node must be positive".into()));
        }
        Ok(())
    }
}

/// Node-type sequences that constrain meta-path walks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaPathSet {
    pub paths: Vec<Vec<NodeType>>,
}

impl Default for MetaPathSet {
    /// The four canonical paths over the user-post-video-channel network.
    fn default() -> Self {
        use NodeType::*;
        MetaPathSet {
            paths: vec![
                vec![User, Post, Video, Post, User],
                vec![Video, Channel, Video],
                vec![Post, User, Post],
                vec![Channel, Video, Channel],
            ],
        }
    }
}

impl MetaPathSet {
    fn validate(&self, graph: &HeteroGraph) -> Result<()> {
        for path in &self.paths {
            if path.len() < 2 {
                return Err(Error::InvalidMetaPath("path shorter than 2 types".into()));
            }
            for pair in path.windows(2) {
                if !NodeType::permits_edge(pair[0], pair[1]) {
                    return Err(Error::InvalidMetaPath(format!(
                        "no {:?}-{:?} edges exist in this graph family",
                        pair[0], pair[1]
                    )));
                }
            }
            if graph.nodes_of(path[0]).is_empty() {
                return Err(Error::NoAdmissibleStart(path[0]));
            }
        }
        Ok(())
    }
}

/// A set of generated walks over node indices, with the node names needed
/// to turn them into a token corpus.
#[derive(Debug, Clone)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<u32>>,
    pub names: Vec<String>,
    pub header: String,
}

/// splitmix64-style mixing so that per-walk seeds derived from
/// (seed, node, walk) never collide the way a plain XOR would.
fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(b.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn weighted_choice(rng: &mut ChaCha8Rng, candidates: &[u32], weights: &[f64]) -> u32 {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random_range(0.0..total);
    for (node, w) in candidates.iter().zip(weights) {
        if draw < *w {
            return *node;
        }
        draw -= w;
    }
    *candidates.last().expect("non-empty candidates")
}

/// Generate `walks_per_node` second-order biased walks from every node.
///
/// From current node `v` reached via `t`, the unnormalized weight of stepping
/// to `x` is `1/p` if `x == t`, `1` if `x` is a common neighbor of `t` and
/// `v`, and `1/q` otherwise. Isolated nodes emit length-1 walks.
pub fn node2vec_walks(graph: &HeteroGraph, cfg: &WalkConfig) -> Result<WalkCorpus> {
    node2vec_walks_threaded(graph, cfg, 1)
}

/// [`node2vec_walks`] with the work split across start-node ranges. Every
/// walk's generator is seeded from (seed, node, walk), so any thread count
/// emits the identical corpus.
pub fn node2vec_walks_threaded(
    graph: &HeteroGraph,
    cfg: &WalkConfig,
    threads: usize,
) -> Result<WalkCorpus> {
    cfg.validate()?;
    if graph.is_empty() {
        return Err(Error::Config("graph is empty".into()));
    }

    let n = graph.node_count();
    let per_node = cfg.walks_per_node;
    let walks = if threads <= 1 || n < 2 {
        let mut walks = Vec::with_capacity(n * per_node);
        for start in 0..n as u32 {
            for walk_idx in 0..per_node {
                let seed = derive_seed(cfg.seed, start as u64, walk_idx as u64);
                walks.push(single_node2vec_walk(graph, start, cfg, seed));
            }
        }
        walks
    } else {
        let chunk = n.div_ceil(threads);
        let mut chunks: Vec<Vec<Vec<u32>>> = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..threads {
                let lo = t * chunk;
                let hi = ((t + 1) * chunk).min(n);
                if lo >= hi {
                    break;
                }
                handles.push(scope.spawn(move || {
                    let mut walks = Vec::with_capacity((hi - lo) * per_node);
                    for start in lo..hi {
                        for walk_idx in 0..per_node {
                            let seed = derive_seed(cfg.seed, start as u64, walk_idx as u64);
                            walks.push(single_node2vec_walk(graph, start as u32, cfg, seed));
                        }
                    }
                    walks
                }));
            }
            for handle in handles {
                chunks.push(handle.join().expect("walk thread panicked"));
            }
        });
        chunks.into_iter().flatten().collect()
    };

    Ok(WalkCorpus {
        walks,
        names: graph.names().to_vec(),
        header: format!(
            "kind=node2vec walks_per_node={} walk_length={} p={} q={} seed={}",
            cfg.walks_per_node, cfg.walk_length, cfg.p, cfg.q, cfg.seed
        ),
    })
}

fn single_node2vec_walk(graph: &HeteroGraph, start: u32, cfg: &WalkConfig, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    if graph.neighbors(start).is_empty() {
        return walk;
    }

    let first_neighbors = graph.neighbors(start);
    let mut current = first_neighbors[rng.random_range(0..first_neighbors.len())];
    let mut previous = start;
    walk.push(current);

    let mut weights = Vec::new();
    while walk.len() < cfg.walk_length {
        let candidates = graph.neighbors(current);
        if candidates.is_empty() {
            break;
        }
        weights.clear();
        weights.extend(candidates.iter().map(|&x| {
            if x == previous {
                1.0 / cfg.p
            } else if graph.has_edge(x, previous) {
                1.0
            } else {
                1.0 / cfg.q
            }
        }));
        let next = weighted_choice(&mut rng, candidates, &weights);
        walk.push(next);
        previous = current;
        current = next;
    }
    walk
}

/// Generate meta-path-constrained walks: uniform choice among neighbors of
/// the type the path prescribes next. Paths whose last type equals their
/// first cycle with overlap; dead ends truncate the walk.
pub fn metapath_walks(
    graph: &HeteroGraph,
    paths: &MetaPathSet,
    cfg: &WalkConfig,
) -> Result<WalkCorpus> {
    cfg.validate()?;
    if graph.is_empty() {
        return Err(Error::Config("graph is empty".into()));
    }
    paths.validate(graph)?;

    let mut walks = Vec::new();
    for (path_idx, path) in paths.paths.iter().enumerate() {
        for start in graph.nodes_of(path[0]) {
            for walk_idx in 0..cfg.walks_per_node {
                let seed = derive_seed(
                    cfg.seed ^ (path_idx as u64).wrapping_mul(0x5851_f42d_4c95_7f2d),
                    start as u64,
                    walk_idx as u64,
                );
                walks.push(single_metapath_walk(graph, start, path, cfg, seed));
            }
        }
    }
    Ok(WalkCorpus {
        walks,
        names: graph.names().to_vec(),
        header: format!(
            "kind=metapath walks_per_node={} walk_length={} seed={} paths={}",
            cfg.walks_per_node,
            cfg.walk_length,
            cfg.seed,
            paths
                .paths
                .iter()
                .map(|p| p
                    .iter()
                    .map(|t| t.prefix().to_string())
                    .collect::<Vec<_>>()
                    .join("-"))
                .collect::<Vec<_>>()
                .join(",")
        ),
    })
}

fn single_metapath_walk(
    graph: &HeteroGraph,
    start: u32,
    path: &[NodeType],
    cfg: &WalkConfig,
    seed: u64,
) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cycles = path.first() == path.last();
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    let mut current = start;
    let mut pos = 0usize; // index into `path` of the current node's type

    while walk.len() < cfg.walk_length {
        let next_pos = if pos + 1 < path.len() {
            pos + 1
        } else if cycles {
            1 // last type == first type, so continue as if restarted
        } else {
            break;
        };
        let want = path[next_pos];
        let candidates: Vec<u32> = graph
            .neighbors(current)
            .iter()
            .copied()
            .filter(|&x| graph.node_type(x) == want)
            .collect();
        if candidates.is_empty() {
            break;
        }
        current = candidates[rng.random_range(0..candidates.len())];
        walk.push(current);
        pos = next_pos;
    }
    walk
}

/// Persist a corpus as text: a `#` header line recording the config, then
/// one walk per line as space-separated node names.
pub fn write_walk_corpus(path: &Path, corpus: &WalkCorpus) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {}", corpus.header)?;
    for walk in &corpus.walks {
        let line: Vec<&str> = walk
            .iter()
            .map(|&n| corpus.names[n as usize].as_str())
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Read a persisted corpus back. Node names become a fresh vocabulary in
/// first-appearance order.
pub fn read_walk_corpus(path: &Path) -> Result<WalkCorpus> {
    let reader = BufReader::new(File::open(path)?);
    let mut names: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut walks = Vec::new();
    let mut header = String::new();
    for line in reader.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            header = rest.trim().to_string();
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let walk: Vec<u32> = line
            .split_whitespace()
            .map(|token| {
                *index.entry(token.to_string()).or_insert_with(|| {
                    names.push(token.to_string());
                    (names.len() - 1) as u32
                })
            })
            .collect();
        walks.push(walk);
    }
    Ok(WalkCorpus {
        walks,
        names,
        header,
    })
}
