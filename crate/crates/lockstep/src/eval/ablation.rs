//! The method grid: {Doc2Vec, BERTopic} x {-, +PostTime} x {-, +N2V, +MP2V},
//! executed end to end with shared seeds, plus the epsilon sweep for the
//! temporal stage.

use std::collections::HashMap;
use std::path::Path;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::cluster::{
    drop_singletons, hdbscan_simplified, kmeans, temporal_subdivide, ClusterAssignment,
    TemporalParams,
};
use crate::data::Dataset;
use crate::embed::{
    concat_align, pca_reduce, post_rows_from_nodes, pv_dbow, train_sgns, EmbeddingMatrix,
    SgnsConfig, TokenCorpus,
};
use crate::error::{Error, Result};
use crate::graph::{build_graph, metapath_walks, node2vec_walks_threaded, MetaPathSet, WalkConfig};

use super::{evaluate_assignment, EvaluationReport};

/// Which text embedding feeds the semantic stage. `PvDbow` pairs with
/// k-means; `External` (sentence vectors produced outside this tool) pairs
/// with density clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextRoute {
    PvDbow,
    External,
}

/// Which network embedding, if any, is concatenated to the text embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkRoute {
    None,
    Node2Vec,
    MetaPath,
}

/// One ablation row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub text: TextRoute,
    pub network: NetworkRoute,
    pub post_time: bool,
}

impl MethodConfig {
    /// Row name in the conventional form, e.g. `BERTopic+PostTime+N2V`.
    pub fn name(&self) -> String {
        let mut name = match self.text {
            TextRoute::PvDbow => "Doc2Vec".to_string(),
            TextRoute::External => "BERTopic".to_string(),
        };
        if self.post_time {
            name.push_str("+PostTime");
        }
        match self.network {
            NetworkRoute::None => {}
            NetworkRoute::Node2Vec => name.push_str("+N2V"),
            NetworkRoute::MetaPath => name.push_str("+MP2V"),
        }
        name
    }

    /// The full 12-row grid, in presentation order.
    pub fn full_grid() -> Vec<MethodConfig> {
        let mut rows = Vec::new();
        for network in [NetworkRoute::None, NetworkRoute::Node2Vec, NetworkRoute::MetaPath] {
            for text in [TextRoute::PvDbow, TextRoute::External] {
                for post_time in [false, true] {
                    rows.push(MethodConfig {
                        text,
                        network,
                        post_time,
                    });
                }
            }
        }
        rows
    }

    /// Parse a row name produced by [`MethodConfig::name`].
    pub fn parse(name: &str) -> Result<MethodConfig> {
        let mut text = None;
        let mut network = NetworkRoute::None;
        let mut post_time = false;
        for part in name.split('+') {
            match part.to_ascii_lowercase().as_str() {
                "doc2vec" => text = Some(TextRoute::PvDbow),
                "bertopic" => text = Some(TextRoute::External),
                "posttime" => post_time = true,
                "n2v" => network = NetworkRoute::Node2Vec,
                "mp2v" => network = NetworkRoute::MetaPath,
                other => {
                    return Err(Error::Config(format!("unknown method component `{other}`")))
                }
            }
        }
        Ok(MethodConfig {
            text: text.ok_or_else(|| {
                Error::Config("method must name Doc2Vec or BERTopic".into())
            })?,
            network,
            post_time,
        })
    }
}

/// Everything the pipeline stages need besides the dataset itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageParams {
    pub text_sgns: SgnsConfig,
    pub network_sgns: SgnsConfig,
    pub walks: WalkConfig,
    pub metapaths: MetaPathSet,
    /// K for the k-means route; `None` = ceil(sqrt(n/2)).
    pub kmeans_k: Option<usize>,
    pub hdbscan_min_cluster_size: usize,
    pub hdbscan_min_samples: usize,
    pub temporal: TemporalParams,
    /// Common width both modalities are reduced to before concatenation.
    pub align_dim: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for StageParams {
    fn default() -> Self {
        StageParams {
            text_sgns: SgnsConfig::default(),
            network_sgns: SgnsConfig {
                dim: 128,
                ..SgnsConfig::default()
            },
            walks: WalkConfig::default(),
            metapaths: MetaPathSet::default(),
            kmeans_k: None,
            hdbscan_min_cluster_size: 2,
            hdbscan_min_samples: 1,
            temporal: TemporalParams::default(),
            align_dim: 64,
            seed: 42,
            threads: 1,
        }
    }
}

impl StageParams {
    fn text_config(&self) -> SgnsConfig {
        SgnsConfig {
            seed: self.seed,
            threads: self.threads,
            ..self.text_sgns.clone()
        }
    }

    fn network_config(&self) -> SgnsConfig {
        SgnsConfig {
            seed: self.seed.wrapping_add(1),
            threads: self.threads,
            ..self.network_sgns.clone()
        }
    }

    fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            seed: self.seed.wrapping_add(2),
            ..self.walks.clone()
        }
    }
}

/// Computes and memoizes the per-modality matrices so that ablation rows
/// sharing a route also share the trained embeddings (and seeds).
pub struct RouteCache<'a> {
    ds: &'a Dataset,
    params: &'a StageParams,
    external: Option<&'a EmbeddingMatrix>,
    text: HashMap<TextRoute, Rc<EmbeddingMatrix>>,
    network: HashMap<NetworkRoute, Rc<EmbeddingMatrix>>,
    combined: HashMap<(TextRoute, NetworkRoute), Rc<EmbeddingMatrix>>,
}

impl<'a> RouteCache<'a> {
    pub fn new(
        ds: &'a Dataset,
        params: &'a StageParams,
        external: Option<&'a EmbeddingMatrix>,
    ) -> Self {
        RouteCache {
            ds,
            params,
            external,
            text: HashMap::new(),
            network: HashMap::new(),
            combined: HashMap::new(),
        }
    }

    pub fn text_matrix(&mut self, route: TextRoute) -> Result<Rc<EmbeddingMatrix>> {
        if let Some(m) = self.text.get(&route) {
            return Ok(Rc::clone(m));
        }
        let matrix = match route {
            TextRoute::PvDbow => pv_dbow(self.ds, &self.params.text_config())?.docs,
            TextRoute::External => {
                let m = self.external.ok_or_else(|| {
                    Error::Config(
                        "method needs external sentence vectors but none were supplied".into(),
                    )
                })?;
                let ids: Vec<String> = self.ds.posts.iter().map(|p| p.post_id.clone()).collect();
                m.select(&ids)?
            }
        };
        let rc = Rc::new(matrix);
        self.text.insert(route, Rc::clone(&rc));
        Ok(rc)
    }

    pub fn network_matrix(&mut self, route: NetworkRoute) -> Result<Option<Rc<EmbeddingMatrix>>> {
        if route == NetworkRoute::None {
            return Ok(None);
        }
        if let Some(m) = self.network.get(&route) {
            return Ok(Some(Rc::clone(m)));
        }
        let graph = build_graph(self.ds);
        let corpus = match route {
            NetworkRoute::Node2Vec => {
                node2vec_walks_threaded(&graph, &self.params.walk_config(), self.params.threads)?
            }
            NetworkRoute::MetaPath => {
                metapath_walks(&graph, &self.params.metapaths, &self.params.walk_config())?
            }
            NetworkRoute::None => unreachable!(),
        };
        let model = train_sgns(&TokenCorpus::from(&corpus), &self.params.network_config())?;
        let posts = post_rows_from_nodes(&model.embeddings, &self.ds.posts)?;
        let rc = Rc::new(posts);
        self.network.insert(route, Rc::clone(&rc));
        Ok(Some(rc))
    }

    /// The matrix the semantic clustering runs on: text alone (reduced to
    /// `align_dim` when wider) or text concatenated with network embeddings.
    pub fn combined_matrix(
        &mut self,
        text: TextRoute,
        network: NetworkRoute,
    ) -> Result<Rc<EmbeddingMatrix>> {
        if let Some(m) = self.combined.get(&(text, network)) {
            return Ok(Rc::clone(m));
        }
        let text_matrix = self.text_matrix(text)?;
        let matrix = match self.network_matrix(network)? {
            None => {
                if text_matrix.dim() > self.params.align_dim {
                    pca_reduce(&text_matrix, self.params.align_dim)?.matrix
                } else {
                    (*text_matrix).clone()
                }
            }
            Some(net) => concat_align(&text_matrix, &net, self.params.align_dim)?,
        };
        let rc = Rc::new(matrix);
        self.combined.insert((text, network), Rc::clone(&rc));
        Ok(rc)
    }
}

/// Semantic-stage clustering for a method: k-means on the Doc2Vec route,
/// density clustering on the BERTopic route. Returns the assignment and the
/// K used, when applicable.
pub fn semantic_stage(
    matrix: &EmbeddingMatrix,
    text: TextRoute,
    params: &StageParams,
) -> Result<(ClusterAssignment, Option<usize>)> {
    match text {
        TextRoute::PvDbow => {
            let k = params
                .kmeans_k
                .unwrap_or_else(|| crate::cluster::default_k(matrix.rows()))
                .min(matrix.rows());
            let out = kmeans(matrix, k, params.seed)?;
            Ok((out.assignment, Some(k)))
        }
        TextRoute::External => {
            let assignment = hdbscan_simplified(
                matrix,
                params.hdbscan_min_cluster_size,
                params.hdbscan_min_samples,
            )?;
            Ok((assignment, None))
        }
    }
}

/// Run one method end to end and evaluate it.
pub fn run_method(
    cache: &mut RouteCache<'_>,
    method: MethodConfig,
    ds: &Dataset,
    params: &StageParams,
) -> Result<EvaluationReport> {
    let matrix = cache.combined_matrix(method.text, method.network)?;
    let (semantic, k_used) = semantic_stage(&matrix, method.text, params)?;
    let staged = if method.post_time {
        temporal_subdivide(&semantic, ds, &params.temporal)
    } else {
        semantic.clone()
    };
    let clusters_total = staged.n_clusters();
    let finalized = drop_singletons(&staged);
    verify_refinement(&semantic, &staged)?;
    evaluate_assignment(&method.name(), &matrix, &finalized, clusters_total, ds, k_used)
}

/// The temporal partition must refine the semantic partition: no temporal
/// cluster may span two semantic clusters. Checked on every run.
pub fn verify_refinement(semantic: &ClusterAssignment, staged: &ClusterAssignment) -> Result<()> {
    let mut base_of: HashMap<i32, i32> = HashMap::new();
    for (row, &label) in staged.labels().iter().enumerate() {
        if label < 0 {
            continue;
        }
        let base = semantic.labels()[row];
        match base_of.entry(label) {
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(base);
            }
            std::collections::hash_map::Entry::Occupied(existing) => {
                if *existing.get() != base {
                    return Err(Error::Config(format!(
                        "temporal cluster {label} spans semantic clusters {} and {base}",
                        existing.get()
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Execute every configured row, sharing embeddings and seeds across rows.
/// A failing row is reported as its error; the other rows still run.
pub fn run_ablation(
    ds: &Dataset,
    rows: &[MethodConfig],
    params: &StageParams,
    external: Option<&EmbeddingMatrix>,
) -> Vec<(String, Result<EvaluationReport>)> {
    let mut cache = RouteCache::new(ds, params, external);
    rows.iter()
        .map(|&method| {
            let name = method.name();
            let report = run_method(&mut cache, method, ds, params);
            (name, report)
        })
        .collect()
}

/// One epsilon's worth of sweep output.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon_seconds: f64,
    pub fact_avg: f64,
    pub clusters_kept: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub method: String,
    pub rows: Vec<SweepRow>,
}

/// Re-run only the temporal stage of `method` for every epsilon. The
/// semantic stage is computed once and shared.
pub fn epsilon_sweep(
    ds: &Dataset,
    method: MethodConfig,
    epsilons: &[f64],
    params: &StageParams,
    external: Option<&EmbeddingMatrix>,
) -> Result<SweepReport> {
    if !method.post_time {
        return Err(Error::Config("epsilon sweep needs a +PostTime method".into()));
    }
    if epsilons.iter().any(|&eps| eps <= 0.0) {
        return Err(Error::Config("sweep epsilons must be positive".into()));
    }
    let mut cache = RouteCache::new(ds, params, external);
    let matrix = cache.combined_matrix(method.text, method.network)?;
    let (semantic, _) = semantic_stage(&matrix, method.text, params)?;

    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let temporal = TemporalParams {
            epsilon_seconds: eps,
            min_pts: params.temporal.min_pts,
        };
        let staged = temporal_subdivide(&semantic, ds, &temporal);
        let finalized = drop_singletons(&staged);
        let facts = super::factuality_stats(&finalized, ds);
        let (fact_avg, clusters_kept) = match facts {
            Ok(f) => (f.avg, finalized.n_clusters()),
            Err(Error::NoQualifyingClusters) => (f64::NAN, finalized.n_clusters()),
            Err(e) => return Err(e),
        };
        rows.push(SweepRow {
            epsilon_seconds: eps,
            fact_avg,
            clusters_kept,
        });
    }
    Ok(SweepReport {
        method: method.name(),
        rows,
    })
}

/// `epsilon_sweep.csv`: `epsilon_seconds,fact_avg,clusters_kept`.
pub fn write_sweep(path: &Path, report: &SweepReport) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epsilon_seconds,fact_avg,clusters_kept")?;
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{}",
            row.epsilon_seconds, row.fact_avg, row.clusters_kept
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_twelve_named_rows() {
        let rows = MethodConfig::full_grid();
        assert_eq!(rows.len(), 12);
        let names: Vec<String> = rows.iter().map(|r| r.name()).collect();
        for expect in [
            "Doc2Vec",
            "Doc2Vec+PostTime",
            "BERTopic",
            "BERTopic+PostTime",
            "Doc2Vec+N2V",
            "Doc2Vec+PostTime+N2V",
            "BERTopic+N2V",
            "BERTopic+PostTime+N2V",
            "Doc2Vec+MP2V",
            "Doc2Vec+PostTime+MP2V",
            "BERTopic+MP2V",
            "BERTopic+PostTime+MP2V",
        ] {
            assert!(names.iter().any(|n| n == expect), "missing {expect}");
        }
    }

    #[test]
    fn names_roundtrip_through_parse() {
        for row in MethodConfig::full_grid() {
            assert_eq!(MethodConfig::parse(&row.name()).unwrap(), row);
        }
    }

    #[test]
    fn empty_grid_empty_reports() {
        let ds = Dataset::default();
        let params = StageParams::default();
        let reports = run_ablation(&ds, &[], &params, None);
        assert!(reports.is_empty());
    }

    #[test]
    fn external_route_without_vectors_errors_but_other_rows_run() {
        // tiny dataset that the PV-DBOW route can survive on
        let ds = tiny_dataset();
        let params = StageParams {
            text_sgns: SgnsConfig {
                dim: 4,
                epochs: 2,
                ..SgnsConfig::default()
            },
            align_dim: 2,
            kmeans_k: Some(2),
            ..StageParams::default()
        };
        let rows = vec![
            MethodConfig {
                text: TextRoute::External,
                network: NetworkRoute::None,
                post_time: false,
            },
            MethodConfig {
                text: TextRoute::PvDbow,
                network: NetworkRoute::None,
                post_time: true,
            },
        ];
        let reports = run_ablation(&ds, &rows, &params, None);
        assert_eq!(reports.len(), 2);
        assert!(reports[0].1.is_err());
        assert!(reports[1].1.is_ok(), "{:?}", reports[1].1.as_ref().err());
    }

    fn tiny_dataset() -> Dataset {
        use crate::data::{ActionType, ChannelRecord, Platform, PostRecord, VideoRecord};
        let mut ds = Dataset::default();
        let texts = [
            "white helmets rescue footage",
            "white helmets rescue video",
            "white helmets rescue clip",
            "cooking pasta tonight dinner",
            "cooking pasta tonight meal",
            "cooking pasta simple dinner",
            "stock market update numbers",
            "stock market update report",
        ];
        for (i, text) in texts.iter().enumerate() {
            let vid = format!("v{}", i / 2);
            ds.posts.push(PostRecord {
                post_id: format!("p{i}"),
                user_id: format!("u{}", i % 3),
                platform: Platform::Twitter,
                published_time: (i as i64) * 10,
                text: text.to_string(),
                action_type: ActionType::Post,
                video_id: Some(vid),
            });
        }
        for v in 0..4 {
            let vid = format!("v{v}");
            let cid = format!("c{}", v % 2);
            ds.videos.insert(
                vid.clone(),
                VideoRecord {
                    video_id: vid,
                    title: String::new(),
                    channel_id: cid,
                    published_time: None,
                    captions: None,
                },
            );
        }
        for c in 0..2 {
            let cid = format!("c{c}");
            ds.channels.insert(
                cid.clone(),
                ChannelRecord {
                    channel_id: cid,
                    name: String::new(),
                    factuality: Some(c as u8),
                },
            );
        }
        ds
    }
}
