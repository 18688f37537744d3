//! End-to-end orchestration from a flat key-value config file.
//!
//! A run executes ingest -> text embeddings -> (network embeddings ->
//! concatenation) -> semantic clustering -> (temporal subdivision) ->
//! singleton dropping -> topics -> evaluation, persisting every stage
//! artifact under the output directory plus a `manifest.json` recording the
//! config hash, seed, and per-stage artifact hashes. With `threads = 1` and
//! a fixed seed, reruns are byte-identical; stage timings therefore go to
//! stderr, never into the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cluster::{drop_singletons, temporal_subdivide, ClusterAssignment};
use crate::data::{ingest, write_dataset, Dataset, IngestConfig, IngestOutcome};
use crate::embed::{
    load_external_embeddings, pv_dbow, write_embeddings, EmbeddingMatrix, SgnsConfig,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_assignment, semantic_stage, verify_refinement, MethodConfig, NetworkRoute,
    StageParams, TextRoute,
};
use crate::graph::{write_walk_corpus, MetaPathSet, WalkConfig};
use crate::topics::{ctfidf, mmr_rerank, write_topics, TopicModel};

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "LOCKSTEP_OUT_DIR";

/// Full pipeline configuration. One flat, documented key per field; see
/// [`PipelineConfig::canonical_string`] for the on-disk form.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub posts: PathBuf,
    pub videos: PathBuf,
    pub channels: PathBuf,
    /// required by the `external` text route
    pub external_vectors: Option<PathBuf>,
    pub method: MethodConfig,
    pub out_dir: PathBuf,
    pub strict_ingest: bool,
    pub params: StageParams,
    pub topics_top_n: usize,
    pub topics_lambda: f64,
    /// persist intermediate artifacts (disabled by `--no-cache`)
    pub cache: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            posts: PathBuf::from("posts.jsonl"),
            videos: PathBuf::from("videos.jsonl"),
            channels: PathBuf::from("channels.csv"),
            external_vectors: None,
            method: MethodConfig {
                text: TextRoute::PvDbow,
                network: NetworkRoute::Node2Vec,
                post_time: true,
            },
            out_dir: std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
            strict_ingest: false,
            params: StageParams::default(),
            topics_top_n: 10,
            topics_lambda: 0.5,
            cache: true,
        }
    }
}

impl PipelineConfig {
    /// Canonical flat form: every key present, one `key = value` per line.
    /// The manifest's config hash is the SHA-256 of this string, so it
    /// changes exactly when a config field changes.
    pub fn canonical_string(&self) -> String {
        let p = &self.params;
        let path = |p: &PathBuf| p.display().to_string();
        let text_route = match self.method.text {
            TextRoute::PvDbow => "pvdbow",
            TextRoute::External => "external",
        };
        let network_route = match self.method.network {
            NetworkRoute::None => "none",
            NetworkRoute::Node2Vec => "n2v",
            NetworkRoute::MetaPath => "mp2v",
        };
        let metapaths = p
            .metapaths
            .paths
            .iter()
            .map(|path| {
                path.iter()
                    .map(|t| t.prefix().to_string())
                    .collect::<Vec<_>>()
                    .join("-")
            })
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "posts = {}\nvideos = {}\nchannels = {}\nexternal_vectors = {}\n\
             method.text = {}\nmethod.network = {}\nmethod.temporal = {}\n\
             out_dir = {}\nseed = {}\nthreads = {}\ningest.strict = {}\ncache = {}\n\
             text.dim = {}\ntext.window = {}\ntext.negatives = {}\ntext.epochs = {}\ntext.learning_rate = {}\n\
             network.dim = {}\nnetwork.window = {}\nnetwork.negatives = {}\nnetwork.epochs = {}\nnetwork.learning_rate = {}\n\
             walks.per_node = {}\nwalks.length = {}\nwalks.p = {}\nwalks.q = {}\n\
             metapaths = {}\nkmeans.k = {}\n\
             hdbscan.min_cluster_size = {}\nhdbscan.min_samples = {}\n\
             temporal.epsilon_seconds = {}\ntemporal.min_pts = {}\n\
             align.dim = {}\ntopics.top_n = {}\ntopics.lambda = {}\n",
            path(&self.posts),
            path(&self.videos),
            path(&self.channels),
            self.external_vectors.as_ref().map(path).unwrap_or_default(),
            text_route,
            network_route,
            self.method.post_time,
            path(&self.out_dir),
            p.seed,
            p.threads,
            self.strict_ingest,
            self.cache,
            p.text_sgns.dim,
            p.text_sgns.window,
            p.text_sgns.negatives,
            p.text_sgns.epochs,
            p.text_sgns.learning_rate,
            p.network_sgns.dim,
            p.network_sgns.window,
            p.network_sgns.negatives,
            p.network_sgns.epochs,
            p.network_sgns.learning_rate,
            p.walks.walks_per_node,
            p.walks.walk_length,
            p.walks.p,
            p.walks.q,
            metapaths,
            p.kmeans_k.unwrap_or(0),
            p.hdbscan_min_cluster_size,
            p.hdbscan_min_samples,
            p.temporal.epsilon_seconds,
            p.temporal.min_pts,
            p.align_dim,
            self.topics_top_n,
            self.topics_lambda,
        )
    }

    /// Parse the flat `key = value` format; `#` starts a comment. Unknown
    /// keys are rejected.
    pub fn parse(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        PipelineConfig::parse(&std::fs::read_to_string(path)?)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad value `{value}` for {key}")))
        }
        let p = &mut self.params;
        match key {
            "posts" => self.posts = PathBuf::from(value),
            "videos" => self.videos = PathBuf::from(value),
            "channels" => self.channels = PathBuf::from(value),
            "external_vectors" => {
                self.external_vectors = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "method.text" => {
                self.method.text = match value {
                    "pvdbow" => TextRoute::PvDbow,
                    "external" => TextRoute::External,
                    other => return Err(Error::Config(format!("unknown text route `{other}`"))),
                }
            }
            "method.network" => {
                self.method.network = match value {
                    "none" => NetworkRoute::None,
                    "n2v" => NetworkRoute::Node2Vec,
                    "mp2v" => NetworkRoute::MetaPath,
                    other => {
                        return Err(Error::Config(format!("unknown network route `{other}`")))
                    }
                }
            }
            "method.temporal" => self.method.post_time = num::<bool>(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => p.seed = num(key, value)?,
            "threads" => p.threads = num::<usize>(key, value)?.max(1),
            "ingest.strict" => self.strict_ingest = num(key, value)?,
            "cache" => self.cache = num(key, value)?,
            "text.dim" => p.text_sgns.dim = num(key, value)?,
            "text.window" => p.text_sgns.window = num(key, value)?,
            "text.negatives" => p.text_sgns.negatives = num(key, value)?,
            "text.epochs" => p.text_sgns.epochs = num(key, value)?,
            "text.learning_rate" => p.text_sgns.learning_rate = num(key, value)?,
            "network.dim" => p.network_sgns.dim = num(key, value)?,
            "network.window" => p.network_sgns.window = num(key, value)?,
            "network.negatives" => p.network_sgns.negatives = num(key, value)?,
            "network.epochs" => p.network_sgns.epochs = num(key, value)?,
            "network.learning_rate" => p.network_sgns.learning_rate = num(key, value)?,
            "walks.per_node" => p.walks.walks_per_node = num(key, value)?,
            "walks.length" => p.walks.walk_length = num(key, value)?,
            "walks.p" => p.walks.p = num(key, value)?,
            "walks.q" => p.walks.q = num(key, value)?,
            "metapaths" => p.metapaths = parse_metapaths(value)?,
            "kmeans.k" => {
                let k: usize = num(key, value)?;
                p.kmeans_k = if k == 0 { None } else { Some(k) };
            }
            "hdbscan.min_cluster_size" => p.hdbscan_min_cluster_size = num(key, value)?,
            "hdbscan.min_samples" => p.hdbscan_min_samples = num(key, value)?,
            "temporal.epsilon_seconds" => {
                let eps: f64 = num(key, value)?;
                if eps <= 0.0 {
                    return Err(Error::Config("temporal.epsilon_seconds must be positive".into()));
                }
                p.temporal.epsilon_seconds = eps;
            }
            "temporal.min_pts" => {
                let min_pts: usize = num(key, value)?;
                if min_pts < 2 {
                    return Err(Error::Config("temporal.min_pts must be at least 2".into()));
                }
                p.temporal.min_pts = min_pts;
            }
            "align.dim" => p.align_dim = num(key, value)?,
            "topics.top_n" => self.topics_top_n = num(key, value)?,
            "topics.lambda" => self.topics_lambda = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        hex_digest(self.canonical_string().as_bytes())
    }

    pub fn ingest_config(&self) -> IngestConfig {
        IngestConfig {
            strict: self.strict_ingest,
            ..IngestConfig::default()
        }
    }
}

fn parse_metapaths(value: &str) -> Result<MetaPathSet> {
    use crate::graph::NodeType;
    let mut paths = Vec::new();
    for path_text in value.split(',').filter(|s| !s.trim().is_empty()) {
        let mut path = Vec::new();
        for ty in path_text.trim().split('-') {
            path.push(match ty {
                "u" | "user" => NodeType::User,
                "p" | "post" => NodeType::Post,
                "v" | "video" => NodeType::Video,
                "c" | "channel" => NodeType::Channel,
                other => return Err(Error::Config(format!("unknown node type `{other}`"))),
            });
        }
        paths.push(path);
    }
    if paths.is_empty() {
        return Err(Error::Config("metapaths must name at least one path".into()));
    }
    Ok(MetaPathSet { paths })
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn file_digest(path: &Path) -> Result<String> {
    Ok(hex_digest(&std::fs::read(path)?))
}

/// One executed stage: its artifacts (paths relative to the output
/// directory) and their content hashes.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub artifacts: Vec<String>,
    pub sha256: Vec<String>,
}

/// What a run leaves behind besides the artifacts themselves.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

struct StageLog<'a> {
    out_dir: &'a Path,
    stages: Vec<StageRecord>,
    verbose: bool,
}

impl StageLog<'_> {
    fn record(&mut self, name: &str, files: &[PathBuf], started: Instant) -> Result<()> {
        let mut artifacts = Vec::new();
        let mut hashes = Vec::new();
        for file in files {
            let rel = file
                .strip_prefix(self.out_dir)
                .unwrap_or(file)
                .display()
                .to_string();
            hashes.push(file_digest(file)?);
            artifacts.push(rel);
        }
        if self.verbose {
            eprintln!(
                "stage {name}: {} artifact(s) in {:.2?}",
                files.len(),
                started.elapsed()
            );
        }
        self.stages.push(StageRecord {
            name: name.to_string(),
            artifacts,
            sha256: hashes,
        });
        Ok(())
    }
}

/// Outputs of [`run_pipeline`] that callers typically want in memory too.
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub dataset: Dataset,
    pub finalized: ClusterAssignment,
    pub report: crate::eval::EvaluationReport,
    pub topics: TopicModel,
}

/// Execute the configured pipeline end to end, writing artifacts and the
/// manifest under `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome> {
    run_pipeline_quiet(cfg, true)
}

pub fn run_pipeline_quiet(cfg: &PipelineConfig, verbose: bool) -> Result<RunOutcome> {
    let out_dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&out_dir)?;
    let mut log = StageLog {
        out_dir: &out_dir,
        stages: Vec::new(),
        verbose,
    };
    let params = &cfg.params;

    // ingest
    let started = Instant::now();
    let IngestOutcome {
        dataset,
        quarantine,
    } = ingest(&cfg.posts, &cfg.videos, &cfg.channels, &cfg.ingest_config())
        .map_err(|e| e.in_stage("ingest"))?;
    if verbose && quarantine.total() > 0 {
        eprintln!("ingest: quarantined {} record(s)", quarantine.total());
    }
    if cfg.cache {
        let dataset_dir = out_dir.join("dataset");
        let files = write_dataset(&dataset_dir, &dataset).map_err(|e| e.in_stage("ingest"))?;
        log.record("ingest", &files, started)?;
    } else {
        log.record("ingest", &[], started)?;
    }

    // text embeddings
    let started = Instant::now();
    let mut pvdbow_model = None;
    let text_matrix: EmbeddingMatrix = match cfg.method.text {
        TextRoute::PvDbow => {
            let model = pv_dbow(&dataset, &text_config(params)).map_err(|e| e.in_stage("text_embeddings"))?;
            let docs = model.docs.clone();
            pvdbow_model = Some(model);
            docs
        }
        TextRoute::External => {
            let path = cfg.external_vectors.as_ref().ok_or_else(|| {
                Error::Config("method.text = external requires external_vectors".into())
                    .in_stage("text_embeddings")
            })?;
            let ids: Vec<String> = dataset.posts.iter().map(|p| p.post_id.clone()).collect();
            load_external_embeddings(path, &ids).map_err(|e| e.in_stage("text_embeddings"))?
        }
    };
    if cfg.cache {
        let file = out_dir.join("text_embeddings.txt");
        write_embeddings(&file, &text_matrix)?;
        log.record("text_embeddings", &[file], started)?;
    } else {
        log.record("text_embeddings", &[], started)?;
    }

    // network embeddings (optional)
    let network_matrix: Option<EmbeddingMatrix> = if cfg.method.network == NetworkRoute::None {
        None
    } else {
        let started = Instant::now();
        let graph = crate::graph::build_graph(&dataset);
        let corpus = match cfg.method.network {
            NetworkRoute::Node2Vec => crate::graph::node2vec_walks_threaded(
                &graph,
                &walk_config(params),
                params.threads,
            ),
            NetworkRoute::MetaPath => {
                crate::graph::metapath_walks(&graph, &params.metapaths, &walk_config(params))
            }
            NetworkRoute::None => unreachable!(),
        }
        .map_err(|e| e.in_stage("network_embeddings"))?;
        let model = crate::embed::train_sgns(
            &crate::embed::TokenCorpus::from(&corpus),
            &network_config(params),
        )
        .map_err(|e| e.in_stage("network_embeddings"))?;
        let posts = crate::embed::post_rows_from_nodes(&model.embeddings, &dataset.posts)
            .map_err(|e| e.in_stage("network_embeddings"))?;
        if cfg.cache {
            let walks_file = out_dir.join("walks.txt");
            write_walk_corpus(&walks_file, &corpus)?;
            let file = out_dir.join("network_embeddings.txt");
            write_embeddings(&file, &posts)?;
            log.record("network_embeddings", &[walks_file, file], started)?;
        } else {
            log.record("network_embeddings", &[], started)?;
        }
        Some(posts)
    };

    // alignment / concatenation
    let combined: EmbeddingMatrix = match &network_matrix {
        Some(net) => {
            let started = Instant::now();
            let joint = crate::embed::concat_align(&text_matrix, net, params.align_dim)
                .map_err(|e| e.in_stage("concat"))?;
            if cfg.cache {
                let file = out_dir.join("combined_embeddings.txt");
                write_embeddings(&file, &joint)?;
                log.record("concat", &[file], started)?;
            } else {
                log.record("concat", &[], started)?;
            }
            joint
        }
        None => {
            if text_matrix.dim() > params.align_dim {
                crate::embed::pca_reduce(&text_matrix, params.align_dim)
                    .map_err(|e| e.in_stage("concat"))?
                    .matrix
            } else {
                text_matrix.clone()
            }
        }
    };

    // semantic clustering
    let started = Instant::now();
    let (semantic, k_used) =
        semantic_stage(&combined, cfg.method.text, params).map_err(|e| e.in_stage("semantic_clusters"))?;
    if cfg.cache {
        let file = out_dir.join("semantic_clusters.csv");
        semantic.write_csv(&file)?;
        let mut artifacts = vec![file];
        if network_matrix.is_none() {
            // without a concat stage, the clustering input still gets
            // persisted so later stage commands can reuse it
            let embeddings = out_dir.join("combined_embeddings.txt");
            write_embeddings(&embeddings, &combined)?;
            artifacts.push(embeddings);
        }
        log.record("semantic_clusters", &artifacts, started)?;
    } else {
        log.record("semantic_clusters", &[], started)?;
    }

    // temporal subdivision (optional)
    let staged = if cfg.method.post_time {
        let started = Instant::now();
        let temporal = temporal_subdivide(&semantic, &dataset, &params.temporal);
        verify_refinement(&semantic, &temporal).map_err(|e| e.in_stage("temporal_clusters"))?;
        if cfg.cache {
            let file = out_dir.join("temporal_clusters.csv");
            temporal.write_csv(&file)?;
            log.record("temporal_clusters", &[file], started)?;
        } else {
            log.record("temporal_clusters", &[], started)?;
        }
        temporal
    } else {
        semantic.clone()
    };

    // report: drop singletons, topics, evaluation
    let started = Instant::now();
    let clusters_total = staged.n_clusters();
    let finalized = drop_singletons(&staged);

    let topics = build_topics(cfg, &dataset, &finalized, pvdbow_model.as_ref())
        .map_err(|e| e.in_stage("report"))?;
    let report = evaluate_assignment(
        &cfg.method.name(),
        &combined,
        &finalized,
        clusters_total,
        &dataset,
        k_used,
    )
    .map_err(|e| e.in_stage("report"))?;

    let final_file = out_dir.join("final_clusters.csv");
    finalized.write_csv(&final_file)?;
    let topics_file = out_dir.join("topics.json");
    write_topics(&topics_file, &topics)?;
    let report_file = out_dir.join("report.json");
    std::fs::write(&report_file, serde_json::to_string_pretty(&report)?)?;
    let table3 = out_dir.join("table3.csv");
    crate::eval::write_table3(&table3, &report.channels)?;
    crate::eval::write_fig3(&out_dir, &report)?;
    log.record(
        "report",
        &[
            final_file,
            topics_file,
            report_file,
            table3,
            out_dir.join("fig3_sizes.csv"),
            out_dir.join("fig3_gaps.csv"),
        ],
        started,
    )?;

    let manifest = RunManifest {
        config_hash: cfg.config_hash(),
        seed: params.seed,
        stages: log.stages,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out_dir.join("manifest.json"), manifest_json)?;

    Ok(RunOutcome {
        manifest,
        dataset,
        finalized,
        report,
        topics,
    })
}

/// Topic terms for the finalized clusters: c-TF-IDF candidates re-ranked by
/// MMR over PV-DBOW word vectors. On the external text route a word-vector
/// pass is trained on the spot, since no encoder ships with this tool.
fn build_topics(
    cfg: &PipelineConfig,
    dataset: &Dataset,
    finalized: &ClusterAssignment,
    pvdbow_model: Option<&crate::embed::PvDbowModel>,
) -> Result<TopicModel> {
    let candidates_per_cluster = (cfg.topics_top_n * 3).max(cfg.topics_top_n);
    let mut model = match ctfidf(finalized, dataset, candidates_per_cluster) {
        Ok(model) => model,
        Err(Error::NoQualifyingClusters) | Err(Error::EmptyVocabulary) => {
            return Ok(TopicModel {
                clusters: BTreeMap::new(),
                corpus_frequency: BTreeMap::new(),
                class_frequency: BTreeMap::new(),
                avg_words_per_class: 0.0,
            })
        }
        Err(e) => return Err(e),
    };
    let words = match pvdbow_model {
        Some(m) => m.words.clone(),
        None => pv_dbow(dataset, &text_config(&cfg.params))?.words,
    };
    for terms in model.clusters.values_mut() {
        *terms = mmr_rerank(terms, &words, cfg.topics_lambda, cfg.topics_top_n);
    }
    Ok(model)
}

fn text_config(params: &StageParams) -> SgnsConfig {
    SgnsConfig {
        seed: params.seed,
        threads: params.threads,
        ..params.text_sgns.clone()
    }
}

fn network_config(params: &StageParams) -> SgnsConfig {
    SgnsConfig {
        seed: params.seed.wrapping_add(1),
        threads: params.threads,
        ..params.network_sgns.clone()
    }
}

fn walk_config(params: &StageParams) -> WalkConfig {
    WalkConfig {
        seed: params.seed.wrapping_add(2),
        ..params.walks.clone()
    }
}
