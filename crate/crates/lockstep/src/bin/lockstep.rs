//! Command-line front end: each pipeline stage as a subcommand, plus the
//! full run, the ablation grid, the epsilon sweep, the synthetic generator,
//! and detection scoring.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lockstep::cluster::ClusterAssignment;
use lockstep::data::{ingest, write_dataset};
use lockstep::embed::{load_external_embeddings, write_embeddings, EmbeddingMatrix};
use lockstep::error::Error;
use lockstep::eval::{epsilon_sweep, run_ablation, write_sweep, MethodConfig};
use lockstep::graph::{build_graph, metapath_walks, node2vec_walks, write_walk_corpus};
use lockstep::pipeline::{run_pipeline, PipelineConfig};
use lockstep::synth::{generate, pseudo_sentence_vectors, score_detection, CampaignSpec, GroundTruth};

#[derive(Parser)]
#[command(
    name = "lockstep",
    about = "Detect likely coordinated posting campaigns across social platforms",
    version
)]
struct Cli {
    /// Print the default configuration file and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to the flat key-value configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the input files and write the normalized dataset snapshot.
    Ingest(ConfigArg),
    /// Build the interaction graph and write a walk corpus.
    Graph {
        #[command(flatten)]
        config: ConfigArg,
        /// Walk kind: n2v (biased) or mp2v (meta-path constrained).
        #[arg(long, default_value = "n2v")]
        kind: String,
    },
    /// Train/load the configured embeddings and persist them.
    Embed {
        #[command(flatten)]
        config: ConfigArg,
        /// Which modality: text, network, or combined.
        #[arg(long, default_value = "combined")]
        modality: String,
    },
    /// Run the semantic (and, if configured, temporal) clustering.
    Clusterize(ConfigArg),
    /// Topic terms for the final clusters.
    Topics(ConfigArg),
    /// Evaluate the configured method and write report.json.
    Evaluate(ConfigArg),
    /// Run the full pipeline and write the manifest.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Do not persist intermediate artifacts.
        #[arg(long)]
        no_cache: bool,
    },
    /// Run the ablation grid and write table2.csv.
    Ablate {
        #[command(flatten)]
        config: ConfigArg,
        /// `all` or a comma-separated list of row names
        /// (e.g. `Doc2Vec+PostTime,BERTopic+PostTime+N2V`).
        #[arg(long, default_value = "all")]
        rows: String,
    },
    /// Sweep the temporal epsilon and write epsilon_sweep.csv.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma list (`10,30,52`) or range `start..end[:step]` in seconds.
        #[arg(long)]
        eps: String,
    },
    /// Generate a synthetic dataset with planted campaigns.
    Synth {
        /// JSON file with the generator spec; defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory for the dataset files and ground truth.
        #[arg(long)]
        out: PathBuf,
        /// Also emit stand-in sentence vectors of this width.
        #[arg(long)]
        emit_vectors: Option<usize>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pairwise precision/recall of an assignment against ground truth.
    Score {
        /// Assignment CSV (post_id,label,stage).
        #[arg(long)]
        assignment: PathBuf,
        /// Ground truth CSV (post_id,campaign_id).
        #[arg(long)]
        truth: PathBuf,
    },
    /// Print the default configuration file.
    PrintConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if cli.print_config {
        print!("{}", PipelineConfig::default().canonical_string());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("no subcommand; try `lockstep --help`");
        return ExitCode::from(1);
    };

    match std::panic::catch_unwind(|| dispatch(command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("internal error");
            ExitCode::from(3)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Stage { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Ingest(args) => {
            let cfg = args.load()?;
            let outcome = ingest(&cfg.posts, &cfg.videos, &cfg.channels, &cfg.ingest_config())?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            write_dataset(&cfg.out_dir.join("dataset"), &outcome.dataset)?;
            println!(
                "ingested {} posts, {} videos, {} channels ({} quarantined)",
                outcome.dataset.posts.len(),
                outcome.dataset.videos.len(),
                outcome.dataset.channels.len(),
                outcome.quarantine.total()
            );
            Ok(())
        }
        Command::Graph { config, kind } => {
            let cfg = config.load()?;
            let ds = ingest(&cfg.posts, &cfg.videos, &cfg.channels, &cfg.ingest_config())?.dataset;
            let graph = build_graph(&ds);
            let walk_cfg = lockstep::graph::WalkConfig {
                seed: cfg.params.seed.wrapping_add(2),
                ..cfg.params.walks.clone()
            };
            let corpus = match kind.as_str() {
                "n2v" => node2vec_walks(&graph, &walk_cfg)?,
                "mp2v" => metapath_walks(&graph, &cfg.params.metapaths, &walk_cfg)?,
                other => return Err(Error::Config(format!("unknown walk kind `{other}`"))),
            };
            std::fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("walks.txt");
            write_walk_corpus(&path, &corpus)?;
            println!("wrote {} walks to {}", corpus.walks.len(), path.display());
            Ok(())
        }
        Command::Embed { config, modality } => {
            let cfg = config.load()?;
            let ds = ingest(&cfg.posts, &cfg.videos, &cfg.channels, &cfg.ingest_config())?.dataset;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let external = load_external_for(&cfg, &ds)?;
            let mut cache = lockstep::eval::RouteCache::new(&ds, &cfg.params, external.as_ref());
            let (name, matrix): (&str, EmbeddingMatrix) = match modality.as_str() {
                "text" => (
                    "text_embeddings.txt",
                    (*cache.text_matrix(cfg.method.text)?).clone(),
                ),
                "network" => match cache.network_matrix(cfg.method.network)? {
                    Some(m) => ("network_embeddings.txt", (*m).clone()),
                    None => {
                        return Err(Error::Config(
                            "method.network = none; nothing to embed".into(),
                        ))
                    }
                },
                "combined" => (
                    "combined_embeddings.txt",
                    (*cache.combined_matrix(cfg.method.text, cfg.method.network)?).clone(),
                ),
                other => return Err(Error::Config(format!("unknown modality `{other}`"))),
            };
            let path = cfg.out_dir.join(name);
            write_embeddings(&path, &matrix)?;
            println!(
                "wrote {} rows x {} dims to {}",
                matrix.rows(),
                matrix.dim(),
                path.display()
            );
            Ok(())
        }
        Command::Clusterize(args) => {
            let cfg = args.load()?;
            let ds = ingest(&cfg.posts, &cfg.videos, &cfg.channels, &cfg.ingest_config())?.dataset;
            let matrix = combined_cached_or_computed(&cfg, &ds)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let (semantic, _) =
                lockstep::eval::semantic_stage(&matrix, cfg.method.text, &cfg.params)?;
            semantic.write_csv(&cfg.out_dir.join("semantic_clusters.csv"))?;
            let staged = if cfg.method.post_time {
                let temporal =
                    lockstep::cluster::temporal_subdivide(&semantic, &ds, &cfg.params.temporal);
                lockstep::eval::verify_refinement(&semantic, &temporal)?;
                temporal.write_csv(&cfg.out_dir.join("temporal_clusters.csv"))?;
                temporal
            } else {
                semantic
            };
            let finalized = lockstep::cluster::drop_singletons(&staged);
            finalized.write_csv(&cfg.out_dir.join("final_clusters.csv"))?;
            println!(
                "{} clusters ({} after dropping singletons), {} posts kept",
                staged.n_clusters(),
                finalized.n_clusters(),
                finalized.len() - finalized.noise_count()
            );
            Ok(())
        }
        Command::Topics(args) | Command::Evaluate(args) => {
            // both need the finalized clusters plus the dataset; run the
            // full flow (reusing nothing is still cheap next to training,
            // and the artifacts these commands are after all get written)
            let cfg = args.load()?;
            let outcome = run_pipeline(&cfg)?;
            println!(
                "{}: {} kept clusters covering {} posts (artifacts in {})",
                outcome.report.method,
                outcome.report.clusters_kept,
                outcome.report.posts_kept,
                cfg.out_dir.display()
            );
            Ok(())
        }
        Command::Run { config, no_cache } => {
            let mut cfg = config.load()?;
            if no_cache {
                cfg.cache = false;
            }
            let outcome = run_pipeline(&cfg)?;
            println!(
                "{}: silhouette {:.4}, fact_avg {:.4}, {} kept clusters / {} posts; manifest {}",
                outcome.report.method,
                outcome.report.silhouette,
                outcome.report.fact_avg,
                outcome.report.clusters_kept,
                outcome.report.posts_kept,
                cfg.out_dir.join("manifest.json").display()
            );
            Ok(())
        }
        Command::Ablate { config, rows } => {
            let cfg = config.load()?;
            let ds = ingest(&cfg.posts, &cfg.videos, &cfg.channels, &cfg.ingest_config())?.dataset;
            let row_configs: Vec<MethodConfig> = if rows.trim() == "all" {
                MethodConfig::full_grid()
            } else {
                rows.split(',')
                    .map(|name| MethodConfig::parse(name.trim()))
                    .collect::<Result<_, _>>()?
            };
            let external = load_external_for(&cfg, &ds)?;
            let results = run_ablation(&ds, &row_configs, &cfg.params, external.as_ref());
            std::fs::create_dir_all(&cfg.out_dir)?;
            let mut reports = Vec::new();
            for (name, result) in results {
                match result {
                    Ok(report) => reports.push(report),
                    Err(e) => eprintln!("row {name} failed: {e}"),
                }
            }
            let baseline = lockstep::data::dataset_factuality_std(&ds).ok();
            let path = cfg.out_dir.join("table2.csv");
            lockstep::eval::write_table2(&path, &reports, baseline)?;
            std::fs::write(
                cfg.out_dir.join("ablation.json"),
                serde_json::to_string_pretty(&reports).map_err(Error::from)?,
            )?;
            println!("wrote {} rows to {}", reports.len(), path.display());
            Ok(())
        }
        Command::Sweep { config, eps } => {
            let cfg = config.load()?;
            let ds = ingest(&cfg.posts, &cfg.videos, &cfg.channels, &cfg.ingest_config())?.dataset;
            let external = load_external_for(&cfg, &ds)?;
            let epsilons = parse_epsilons(&eps)?;
            let mut method = cfg.method;
            method.post_time = true;
            let report = epsilon_sweep(&ds, method, &epsilons, &cfg.params, external.as_ref())?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("epsilon_sweep.csv");
            write_sweep(&path, &report)?;
            println!("wrote {} epsilon rows to {}", report.rows.len(), path.display());
            Ok(())
        }
        Command::Synth {
            spec,
            out,
            emit_vectors,
            seed,
        } => {
            let mut campaign_spec: CampaignSpec = match spec {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => CampaignSpec::default(),
            };
            if let Some(seed) = seed {
                campaign_spec.seed = seed;
            }
            let (ds, truth) = generate(&campaign_spec)?;
            std::fs::create_dir_all(&out)?;
            write_dataset(&out, &ds)?;
            truth.write_csv(&out.join("ground_truth.csv"))?;
            if let Some(dim) = emit_vectors {
                let vectors = pseudo_sentence_vectors(&ds, dim, campaign_spec.seed)?;
                write_embeddings(&out.join("external_vectors.txt"), &vectors)?;
            }
            println!(
                "generated {} posts ({} campaigns) into {}",
                ds.posts.len(),
                campaign_spec.n_campaigns,
                out.display()
            );
            Ok(())
        }
        Command::Score { assignment, truth } => {
            let assignment = ClusterAssignment::read_csv(&assignment)?;
            let truth = GroundTruth::read_csv(&truth)?;
            let score = score_detection(&assignment, &truth);
            println!(
                "precision {:.4} recall {:.4} f1 {:.4} (pairs: {} matching / {} predicted / {} true{})",
                score.precision,
                score.recall,
                score.f1,
                score.matching_pairs,
                score.predicted_pairs,
                score.true_pairs,
                if score.degenerate { "; degenerate" } else { "" }
            );
            Ok(())
        }
        Command::PrintConfig => {
            print!("{}", PipelineConfig::default().canonical_string());
            Ok(())
        }
    }
}

/// The semantic-stage matrix: reloaded from the persisted intermediate when
/// one exists in the output directory, otherwise computed from scratch.
fn combined_cached_or_computed(
    cfg: &PipelineConfig,
    ds: &lockstep::data::Dataset,
) -> Result<EmbeddingMatrix, Error> {
    let cached = cfg.out_dir.join("combined_embeddings.txt");
    if cached.is_file() {
        let ids: Vec<String> = ds.posts.iter().map(|p| p.post_id.clone()).collect();
        if let Ok(matrix) = load_external_embeddings(&cached, &ids) {
            eprintln!("using cached embeddings from {}", cached.display());
            return Ok(matrix);
        }
    }
    let external = load_external_for(cfg, ds)?;
    let mut cache = lockstep::eval::RouteCache::new(ds, &cfg.params, external.as_ref());
    let matrix = (*cache.combined_matrix(cfg.method.text, cfg.method.network)?).clone();
    if cfg.cache {
        std::fs::create_dir_all(&cfg.out_dir)?;
        write_embeddings(&cached, &matrix)?;
    }
    Ok(matrix)
}

fn load_external_for(
    cfg: &PipelineConfig,
    ds: &lockstep::data::Dataset,
) -> Result<Option<EmbeddingMatrix>, Error> {
    match &cfg.external_vectors {
        Some(path) => {
            let ids: Vec<String> = ds.posts.iter().map(|p| p.post_id.clone()).collect();
            Ok(Some(load_external_embeddings(path, &ids)?))
        }
        None => Ok(None),
    }
}

/// `10,30,52` or `start..end[:step]` (step defaults to 10 seconds).
fn parse_epsilons(text: &str) -> Result<Vec<f64>, Error> {
    let bad = |t: &str| Error::Config(format!("bad epsilon list `{t}`"));
    if let Some((range, step)) = text
        .split_once("..")
        .map(|(a, b)| match b.split_once(':') {
            Some((end, step)) => ((a, end), step),
            None => ((a, b), "10"),
        })
    {
        let start: f64 = range.0.parse().map_err(|_| bad(text))?;
        let end: f64 = range.1.parse().map_err(|_| bad(text))?;
        let step: f64 = step.parse().map_err(|_| bad(text))?;
        if step <= 0.0 || end < start {
            return Err(bad(text));
        }
        let mut eps = Vec::new();
        let mut current = start;
        while current <= end + 1e-9 {
            eps.push(current);
            current += step;
        }
        Ok(eps)
    } else {
        text.split(',')
            .map(|tok| tok.trim().parse::<f64>().map_err(|_| bad(text)))
            .collect()
    }
}
