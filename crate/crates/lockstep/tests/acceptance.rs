//! Acceptance suite: one test per criterion, each ending with a printed
//! `ACCEPTANCE <n> (<name>): PASS` line. Oracles here are written
//! independently of the library code paths they check.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lockstep::cluster::{
    condensed_tree, dbscan_1d, drop_singletons, hdbscan_simplified, kmeans, kmeans_pp_centers,
    temporal_subdivide, ClusterAssignment, CondensedTree, Stage, TemporalParams,
};
use lockstep::data::{ActionType, Dataset, Platform, PostRecord};
use lockstep::embed::EmbeddingMatrix;
use lockstep::eval::{
    epsilon_sweep, run_ablation, silhouette, silhouette_values, MethodConfig, NetworkRoute,
    StageParams, TextRoute,
};
use lockstep::graph::{build_graph, metapath_walks, node2vec_walks, MetaPathSet, NodeType, WalkConfig};
use lockstep::synth::{generate, pseudo_sentence_vectors, score_detection, CampaignSpec};

fn matrix_2d(points: &[(f64, f64)]) -> EmbeddingMatrix {
    EmbeddingMatrix::new(
        (0..points.len()).map(|i| format!("p{i}")).collect(),
        2,
        points.iter().flat_map(|&(x, y)| [x, y]).collect(),
    )
    .unwrap()
}

// ---------------------------------------------------------------- criterion 1

/// Exhaustive-stability oracle: enumerate every antichain of condensed-tree
/// clusters, keep the selection maximizing total stability.
fn brute_force_selection(tree: &CondensedTree) -> Vec<usize> {
    let candidates = tree.candidates();
    assert!(candidates.len() <= 20, "fixture too large for brute force");
    let mut best = (0.0f64, Vec::new());
    'subsets: for mask in 0u32..(1 << candidates.len()) {
        let selection: Vec<usize> = (0..candidates.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| candidates[i])
            .collect();
        for &id in &selection {
            for descendant in tree.descendants(id) {
                if selection.contains(&descendant) {
                    continue 'subsets;
                }
            }
        }
        let total: f64 = selection.iter().map(|&id| tree.clusters[id].stability).sum();
        if total > best.0 {
            best = (total, selection);
        }
    }
    best.1
}

/// Textbook DBSCAN on the line, straight from the definition.
fn dbscan_oracle(times: &[i64], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = times.len();
    let within = |i: usize, j: usize| ((times[i] - times[j]).abs() as f64) <= eps;
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| within(i, j)).count() >= min_pts)
        .collect();
    let mut scan: Vec<usize> = (0..n).collect();
    scan.sort_by_key(|&i| (times[i], i));
    let mut labels = vec![-1i32; n];
    let mut cluster = 0i32;
    for &i in &scan {
        if !core[i] || labels[i] >= 0 {
            continue;
        }
        let mut stack = vec![i];
        labels[i] = cluster;
        while let Some(p) = stack.pop() {
            for &q in &scan {
                if core[q] && labels[q] < 0 && within(p, q) {
                    labels[q] = cluster;
                    stack.push(q);
                }
            }
        }
        cluster += 1;
    }
    for &i in &scan {
        if labels[i] < 0 && !core[i] {
            for &j in &scan {
                if core[j] && within(i, j) {
                    labels[i] = labels[j];
                    break;
                }
            }
        }
    }
    labels
}

/// Plain Lloyd iteration, written independently of the library: identical
/// seeding, lowest-index tie breaking, assignment-fixed-point convergence,
/// 300-iteration cap.
fn lloyd_oracle(m: &EmbeddingMatrix, centers: Vec<Vec<f64>>) -> f64 {
    let n = m.rows();
    let k = centers.len();
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let mut centroids = centers;
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..300 {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centroids.iter().enumerate() {
                let d = dist2(m.row(i), center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; m.dim()]; k];
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
    }
    (0..n).map(|i| dist2(m.row(i), &centroids[assignment[i]])).sum()
}

#[test]
fn acceptance_1_clustering_oracle_equivalence() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    for fixture in 0..60 {
        let n = rng.random_range(4..=12);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..8.0), rng.random_range(0.0..8.0)))
            .collect();
        let m = matrix_2d(&points);

        // density clustering vs exhaustive stability
        let tree = condensed_tree(&m, 2, 1);
        let mine = hdbscan_simplified(&m, 2, 1).unwrap();
        let best = brute_force_selection(&tree);
        assert_eq!(
            mine.labels(),
            tree.labels_for_selection(&best).as_slice(),
            "fixture {fixture}: hdbscan diverged from the exhaustive-stability oracle"
        );

        // temporal subdivision vs density reachability by definition
        let times: Vec<i64> = (0..n).map(|_| rng.random_range(0..300)).collect();
        let eps = rng.random_range(5..60) as f64;
        let min_pts = rng.random_range(2..=3);
        let got = dbscan_1d(&times, eps, min_pts);
        let want = dbscan_oracle(&times, eps, min_pts);
        assert_eq!(got, want, "fixture {fixture}: dbscan diverged");

        // k-means inertia vs an independent Lloyd oracle, identical seeding
        let k = rng.random_range(1..=n.min(4));
        let centers = kmeans_pp_centers(&m, k, fixture).unwrap();
        let oracle_inertia = lloyd_oracle(&m, centers);
        let mine = kmeans(&m, k, fixture).unwrap();
        assert!(
            (mine.inertia - oracle_inertia).abs() <= 1e-9,
            "fixture {fixture}: inertia {} vs oracle {}",
            mine.inertia,
            oracle_inertia
        );
    }

    assert!(started.elapsed().as_secs() < 60, "criterion 1 exceeded 1 minute");
    println!("ACCEPTANCE 1 (clustering oracle equivalence): PASS");
}

// ---------------------------------------------------------------- criterion 2

/// Random orthogonal matrix via Gram-Schmidt on a seeded random square.
fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    loop {
        let raw: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for mut v in raw {
            for b in &basis {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                break;
            }
            for vi in &mut v {
                *vi /= norm;
            }
            basis.push(v);
        }
        if basis.len() == dim {
            return basis;
        }
    }
}

#[test]
fn acceptance_2_silhouette_correctness() {
    // hand-computed fixture, clusters {0,1} and {10,11}:
    // s(0) = (10.5-1)/10.5 = 0.904761..., s(1) = (9.5-1)/9.5 = 0.894736...
    // mean = 0.899749... (the two point values repeat by mirror symmetry)
    let m = EmbeddingMatrix::new(
        vec!["a".into(), "b".into(), "c".into(), "d".into()],
        1,
        vec![0.0, 1.0, 10.0, 11.0],
    )
    .unwrap();
    let assignment = ClusterAssignment::new(
        vec!["a".into(), "b".into(), "c".into(), "d".into()],
        vec![0, 0, 1, 1],
        Stage::Semantic,
    );
    let values = silhouette_values(&m, &assignment, usize::MAX, 0).unwrap();
    assert!(
        (values[0].1 - 0.9048).abs() < 1e-4,
        "hand-computed s(0) = 0.9048, got {}",
        values[0].1
    );
    let mean = silhouette(&m, &assignment).unwrap();
    let hand_mean = (9.5 / 10.5 + 8.5 / 9.5) / 2.0;
    assert!(
        (mean - hand_mean).abs() < 1e-4,
        "full hand computation gives {hand_mean}, got {mean}"
    );

    // invariance under rotation + translation to 1e-9
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let dim = 4;
    let n = 30;
    let values: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let m = EmbeddingMatrix::new(ids.clone(), dim, values.clone()).unwrap();
    let labels: Vec<i32> = (0..n as i32).map(|i| i % 3).collect();
    let assignment = ClusterAssignment::new(ids.clone(), labels, Stage::Semantic);
    let base = silhouette(&m, &assignment).unwrap();

    let rotation = random_rotation(dim, &mut rng);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut moved = Vec::with_capacity(n * dim);
    for i in 0..n {
        let row = &values[i * dim..(i + 1) * dim];
        for (axis, t) in shift.iter().enumerate() {
            let v: f64 = rotation[axis].iter().zip(row).map(|(r, x)| r * x).sum();
            moved.push(v + t);
        }
    }
    let m_moved = EmbeddingMatrix::new(ids, dim, moved).unwrap();
    let transformed = silhouette(&m_moved, &assignment).unwrap();
    assert!(
        (base - transformed).abs() < 1e-9,
        "isometry moved the score: {base} vs {transformed}"
    );

    // bounds under 1,000 randomized trials
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..1000 {
        let n = rng.random_range(4..=16);
        let dim = rng.random_range(1..=3);
        let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let values: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m = EmbeddingMatrix::new(ids.clone(), dim, values).unwrap();
        let k = rng.random_range(2..=n.min(4)) as i32;
        let labels: Vec<i32> = (0..n).map(|_| rng.random_range(-1..k)).collect();
        let assignment = ClusterAssignment::new(ids, labels, Stage::Semantic);
        // degenerate label draws (fewer than 2 clusters) return Err
        if let Ok(score) = silhouette(&m, &assignment) {
            assert!(
                (-1.0..=1.0).contains(&score),
                "silhouette {score} out of bounds"
            );
        }
    }

    println!("ACCEPTANCE 2 (silhouette correctness): PASS");
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn acceptance_3_factuality_metrics() {
    // {0,1} cluster -> std exactly 0.5
    let (assignment, ds) = labeled_cluster_fixture(&[(0, Some(0)), (0, Some(1))]);
    let stats = lockstep::eval::factuality_stats(&assignment, &ds).unwrap();
    assert_eq!(stats.per_cluster[0].2, 0.5);

    // all-identical-score clusters -> prop_zero = 1
    let (assignment, ds) = labeled_cluster_fixture(&[
        (0, Some(2)),
        (0, Some(2)),
        (1, Some(4)),
        (1, Some(4)),
        (1, Some(4)),
    ]);
    let stats = lockstep::eval::factuality_stats(&assignment, &ds).unwrap();
    assert_eq!(stats.prop_zero, 1.0);

    // dataset std vs an independent two-pass oracle to 1e-12
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let scores: Vec<u8> = (0..500).map(|_| rng.random_range(0..=5)).collect();
    let pairs: Vec<(i32, Option<u8>)> = scores.iter().map(|&s| (0, Some(s))).collect();
    let (_, ds) = labeled_cluster_fixture(&pairs);
    let got = lockstep::data::dataset_factuality_std(&ds).unwrap();

    let float_scores: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
    let mean = float_scores.iter().sum::<f64>() / float_scores.len() as f64;
    let variance = float_scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
        / float_scores.len() as f64;
    let oracle = variance.sqrt();
    assert!((got - oracle).abs() < 1e-12, "{got} vs oracle {oracle}");

    println!("ACCEPTANCE 3 (factuality metrics): PASS");
}

fn labeled_cluster_fixture(spec: &[(i32, Option<u8>)]) -> (ClusterAssignment, Dataset) {
    use lockstep::data::{ChannelRecord, VideoRecord};
    let mut ds = Dataset::default();
    let mut labels = Vec::new();
    for (i, &(label, factuality)) in spec.iter().enumerate() {
        labels.push(label);
        let video_id = factuality.map(|_| format!("v{i}"));
        ds.posts.push(PostRecord {
            post_id: format!("p{i}"),
            user_id: format!("u{i}"),
            platform: Platform::Twitter,
            published_time: i as i64,
            text: String::new(),
            action_type: ActionType::Post,
            video_id: video_id.clone(),
        });
        if let (Some(vid), Some(score)) = (video_id, factuality) {
            let cid = format!("c{i}");
            ds.videos.insert(
                vid.clone(),
                VideoRecord {
                    video_id: vid,
                    title: String::new(),
                    channel_id: cid.clone(),
                    published_time: None,
                    captions: None,
                },
            );
            ds.channels.insert(
                cid.clone(),
                ChannelRecord {
                    channel_id: cid,
                    name: String::new(),
                    factuality: Some(score),
                },
            );
        }
    }
    let ids = (0..spec.len()).map(|i| format!("p{i}")).collect();
    (ClusterAssignment::new(ids, labels, Stage::Semantic), ds)
}

// ------------------------------------------------------- criteria 4, 5 shared

struct PlantedWorld {
    ds: Dataset,
    truth: lockstep::synth::GroundTruth,
    vectors: EmbeddingMatrix,
    params: StageParams,
}

fn planted_world() -> &'static PlantedWorld {
    static WORLD: OnceLock<PlantedWorld> = OnceLock::new();
    WORLD.get_or_init(|| {
        let spec = CampaignSpec {
            n_campaigns: 20,
            posts_per_campaign: (8, 15),
            burst_width_seconds: 40,
            text_mutation_rate: 0.15,
            channel_factuality_profile: [0.55, 0.25, 0.08, 0.05, 0.04, 0.03],
            background_posts: 5000,
            background_time_span_seconds: 90 * 24 * 3600,
            background_channels: 60,
            sibling_pairs: 6,
            sibling_gap_seconds: (100, 125),
            slow_campaigns: 10,
            slow_gap_seconds: (25, 35),
            echo_pairs: 6,
            echo_offset_seconds: (35, 50),
            seed: 20260808,
            ..CampaignSpec::default()
        };
        let (ds, truth) = generate(&spec).unwrap();
        let vectors = pseudo_sentence_vectors(&ds, 96, spec.seed).unwrap();
        let params = StageParams {
            text_sgns: lockstep::embed::SgnsConfig {
                dim: 64,
                window: 5,
                negatives: 5,
                epochs: 12,
                learning_rate: 0.05,
                seed: 0,
                threads: 1,
            },
            network_sgns: lockstep::embed::SgnsConfig {
                dim: 64,
                window: 4,
                negatives: 5,
                epochs: 2,
                learning_rate: 0.025,
                seed: 0,
                threads: 1,
            },
            walks: WalkConfig {
                walks_per_node: 6,
                walk_length: 30,
                p: 0.25,
                q: 4.0,
                seed: 0,
            },
            align_dim: 64,
            seed: 4242,
            threads: 1,
            ..StageParams::default()
        };
        PlantedWorld {
            ds,
            truth,
            vectors,
            params,
        }
    })
}

#[test]
fn acceptance_4_planted_campaign_recovery() {
    let started = std::time::Instant::now();
    let world = planted_world();

    // PV-DBOW + PostTime + N2V pipeline, pairwise scored against the truth
    let mut cache = lockstep::eval::RouteCache::new(&world.ds, &world.params, None);
    let method = MethodConfig {
        text: TextRoute::PvDbow,
        network: NetworkRoute::Node2Vec,
        post_time: true,
    };
    let matrix = cache.combined_matrix(method.text, method.network).unwrap();
    let (semantic, _) =
        lockstep::eval::semantic_stage(&matrix, method.text, &world.params).unwrap();
    let staged = temporal_subdivide(&semantic, &world.ds, &world.params.temporal);
    let finalized = drop_singletons(&staged);
    let score = score_detection(&finalized, &world.truth);
    println!(
        "planted recovery: precision {:.3} recall {:.3} f1 {:.3}",
        score.precision, score.recall, score.f1
    );
    assert!(score.recall >= 0.7, "recall {} below 0.7", score.recall);
    assert!(score.precision >= 0.8, "precision {} below 0.8", score.precision);

    // every +PostTime ablation row improves (or matches) its pre-time
    // counterpart on fact_avg
    let rows = MethodConfig::full_grid();
    let reports = run_ablation(&world.ds, &rows, &world.params, Some(&world.vectors));
    let mut by_name: BTreeMap<String, f64> = BTreeMap::new();
    for (name, report) in &reports {
        let report = report.as_ref().unwrap_or_else(|e| panic!("row {name} failed: {e}"));
        by_name.insert(name.clone(), report.fact_avg);
    }
    for (name, &fact_avg) in &by_name {
        if !name.contains("+PostTime") {
            continue;
        }
        let pre = name.replace("+PostTime", "");
        let pre_avg = by_name[&pre];
        println!("{name}: fact_avg {fact_avg:.4} vs {pre}: {pre_avg:.4}");
        assert!(
            fact_avg <= pre_avg + 1e-12,
            "{name} fact_avg {fact_avg} exceeds pre-time {pre_avg}"
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 600, "criterion 4 exceeded 10 minutes");
    println!("ACCEPTANCE 4 (planted-campaign recovery, {elapsed:.2?}): PASS");
}

#[test]
fn acceptance_5_epsilon_sweep_shape() {
    let world = planted_world();
    let method = MethodConfig {
        text: TextRoute::PvDbow,
        network: NetworkRoute::Node2Vec,
        post_time: true,
    };
    let epsilons: Vec<f64> = (1..=12).map(|i| (i * 10) as f64).collect();
    let report = epsilon_sweep(&world.ds, method, &epsilons, &world.params, None).unwrap();
    for row in &report.rows {
        println!(
            "eps {:>5.0}s -> fact_avg {:.4} ({} kept)",
            row.epsilon_seconds, row.fact_avg, row.clusters_kept
        );
    }
    let min_value = report
        .rows
        .iter()
        .map(|r| r.fact_avg)
        .fold(f64::INFINITY, f64::min);
    let argmin_in_window = report
        .rows
        .iter()
        .filter(|r| (30.0..=60.0).contains(&r.epsilon_seconds))
        .any(|r| (r.fact_avg - min_value).abs() <= 1e-12);
    assert!(
        argmin_in_window,
        "fact_avg minimum {min_value} not attained for any epsilon in [30, 60]"
    );
    println!("ACCEPTANCE 5 (epsilon sweep shape): PASS");
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn acceptance_6_refinement_property() {
    // every temporal run refines its semantic partition; checked member by
    // member over several generated datasets and parameter draws
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for round in 0..4 {
        let spec = CampaignSpec {
            n_campaigns: 6,
            posts_per_campaign: (4, 9),
            background_posts: 150,
            background_channels: 12,
            background_time_span_seconds: 7 * 24 * 3600,
            echo_pairs: 2,
            sibling_pairs: 1,
            seed: 600 + round,
            ..CampaignSpec::default()
        };
        let (ds, _) = generate(&spec).unwrap();
        let vectors = pseudo_sentence_vectors(&ds, 32, round).unwrap();
        let semantic = hdbscan_simplified(&vectors, 2, 1).unwrap();
        let params = TemporalParams {
            epsilon_seconds: rng.random_range(10.0..300.0),
            min_pts: 2,
        };
        let temporal = temporal_subdivide(&semantic, &ds, &params);

        lockstep::eval::verify_refinement(&semantic, &temporal).unwrap();
        // exhaustive restatement: any two posts sharing a temporal cluster
        // share a semantic cluster
        for i in 0..temporal.len() {
            for j in (i + 1)..temporal.len() {
                if temporal.labels()[i] >= 0 && temporal.labels()[i] == temporal.labels()[j] {
                    assert_eq!(
                        semantic.labels()[i],
                        semantic.labels()[j],
                        "round {round}: posts {i},{j} merged across semantic clusters"
                    );
                }
            }
        }
    }
    println!("ACCEPTANCE 6 (temporal refines semantic): PASS");
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn acceptance_7_walk_biases() {
    // path fixture a-b-c(-ch): at b, arrived from a, next-step follows the
    // normalized (1/p, 1, 1/q) weights; for p = 0.25, q = 4 the return
    // probability is (1/p) / (1/p + 1/q) = 16/17
    let mut ds = Dataset::default();
    ds.posts.push(PostRecord {
        post_id: "b".into(),
        user_id: "a".into(),
        platform: Platform::Twitter,
        published_time: 0,
        text: String::new(),
        action_type: ActionType::Post,
        video_id: Some("c".into()),
    });
    ds.videos.insert(
        "c".into(),
        lockstep::data::VideoRecord {
            video_id: "c".into(),
            title: String::new(),
            channel_id: "ch".into(),
            published_time: None,
            captions: None,
        },
    );
    ds.channels.insert(
        "ch".into(),
        lockstep::data::ChannelRecord {
            channel_id: "ch".into(),
            name: String::new(),
            factuality: None,
        },
    );
    let graph = build_graph(&ds);
    let a = graph.lookup("u:a").unwrap();
    let b = graph.lookup("p:b").unwrap();

    let config = WalkConfig {
        walks_per_node: 10_000,
        walk_length: 3,
        p: 0.25,
        q: 4.0,
        seed: 777,
    };
    let corpus = node2vec_walks(&graph, &config).unwrap();
    let mut observed = 0usize;
    let mut returns = 0usize;
    for walk in &corpus.walks {
        if walk.len() >= 3 && walk[0] == a && walk[1] == b {
            observed += 1;
            if walk[2] == a {
                returns += 1;
            }
        }
    }
    let expected = 16.0 / 17.0;
    let sigma = (observed as f64 * expected * (1.0 - expected)).sqrt();
    let delta = (returns as f64 - observed as f64 * expected).abs();
    println!("node2vec bias: {returns}/{observed} returns, 3 sigma = {:.1}", 3.0 * sigma);
    assert!(observed >= 10_000, "all walks from a pass through b");
    assert!(delta <= 3.0 * sigma, "bias off by {delta}, allowed {}", 3.0 * sigma);

    // meta-path walks: zero type-sequence violations over >= 100,000 steps
    let spec = CampaignSpec {
        n_campaigns: 5,
        posts_per_campaign: (5, 9),
        background_posts: 300,
        background_channels: 15,
        seed: 77,
        ..CampaignSpec::default()
    };
    let (ds, _) = generate(&spec).unwrap();
    let graph = build_graph(&ds);
    let paths = MetaPathSet::default();
    let config = WalkConfig {
        walks_per_node: 8,
        walk_length: 40,
        p: 1.0,
        q: 1.0,
        seed: 78,
    };
    let corpus = metapath_walks(&graph, &paths, &config).unwrap();
    let mut steps = 0usize;
    for walk in &corpus.walks {
        let types: Vec<NodeType> = walk.iter().map(|&n| graph.node_type(n)).collect();
        assert!(
            follows_some_path(&types, &paths),
            "walk types {types:?} violate every configured path"
        );
        steps += walk.len().saturating_sub(1);
    }
    println!("metapath walks: {steps} steps, zero violations");
    assert!(steps >= 100_000, "only {steps} steps sampled");
    println!("ACCEPTANCE 7 (walk biases): PASS");
}

/// A type sequence complies when it is a prefix of some configured path
/// repeated with overlap.
fn follows_some_path(types: &[NodeType], set: &MetaPathSet) -> bool {
    'paths: for path in &set.paths {
        if path.first() != path.last() {
            if types.len() > path.len() {
                continue;
            }
            for (i, ty) in types.iter().enumerate() {
                if path[i] != *ty {
                    continue 'paths;
                }
            }
            return true;
        }
        let period = (path.len() - 1).max(1);
        for (i, ty) in types.iter().enumerate() {
            if path[i % period] != *ty {
                continue 'paths;
            }
        }
        return true;
    }
    false
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn acceptance_8_determinism() {
    let spec = CampaignSpec {
        n_campaigns: 5,
        posts_per_campaign: (5, 8),
        background_posts: 120,
        background_channels: 10,
        echo_pairs: 2,
        seed: 88,
        ..CampaignSpec::default()
    };
    let (ds, _) = generate(&spec).unwrap();
    let base = tempfile::tempdir().unwrap();
    let data_dir = base.path().join("data");
    lockstep::data::write_dataset(&data_dir, &ds).unwrap();

    let mut cfg = lockstep::pipeline::PipelineConfig {
        posts: data_dir.join("posts.jsonl"),
        videos: data_dir.join("videos.jsonl"),
        channels: data_dir.join("channels.csv"),
        ..lockstep::pipeline::PipelineConfig::default()
    };
    cfg.params.text_sgns.dim = 16;
    cfg.params.text_sgns.epochs = 3;
    cfg.params.network_sgns.dim = 16;
    cfg.params.network_sgns.epochs = 1;
    cfg.params.walks.walks_per_node = 3;
    cfg.params.walks.walk_length = 15;
    cfg.params.align_dim = 8;
    cfg.params.threads = 1;

    // two runs into the same directory (the manifest hashes the config,
    // out_dir included, so the directory must be held fixed)
    let out = base.path().join("run");
    cfg.out_dir = out.clone();
    let mut digests: Vec<BTreeMap<String, String>> = Vec::new();
    for _ in 0..2 {
        if out.exists() {
            std::fs::remove_dir_all(&out).unwrap();
        }
        lockstep::pipeline::run_pipeline_quiet(&cfg, false).unwrap();
        let mut tree = BTreeMap::new();
        collect_digests(&out, &out, &mut tree);
        digests.push(tree);
    }
    assert!(digests[0].contains_key("manifest.json"));
    assert!(digests[0].len() >= 10, "expected a full artifact tree");
    assert_eq!(
        digests[0], digests[1],
        "same config and seed must reproduce byte-identical artifacts"
    );
    println!(
        "ACCEPTANCE 8 (determinism): PASS ({} files compared)",
        digests[0].len()
    );
}

fn collect_digests(
    root: &std::path::Path,
    dir: &std::path::Path,
    out: &mut BTreeMap<String, String>,
) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let path = entry.path();
        if path.is_dir() {
            collect_digests(root, &path, out);
        } else {
            use sha2::{Digest, Sha256};
            let bytes = std::fs::read(&path).unwrap();
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            let digest: String = hasher
                .finalize()
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect();
            let rel = path.strip_prefix(root).unwrap().display().to_string();
            out.insert(rel, digest);
        }
    }
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn acceptance_9_paper_shape_smoke() {
    // 2,000-post fixture with the studied platform mix; full 12-row grid
    let spec = CampaignSpec {
        n_campaigns: 15,
        posts_per_campaign: (8, 15),
        burst_width_seconds: 40,
        text_mutation_rate: 0.15,
        platform_mix: vec![
            (Platform::Twitter, 0.904),
            (Platform::Facebook, 0.0677),
            (Platform::Reddit, 0.0284),
        ],
        channel_factuality_profile: [0.6, 0.2, 0.08, 0.05, 0.04, 0.03],
        background_posts: 1820,
        background_time_span_seconds: 30 * 24 * 3600,
        background_channels: 50,
        echo_pairs: 4,
        sibling_pairs: 2,
        seed: 99,
        ..CampaignSpec::default()
    };
    let (ds, _) = generate(&spec).unwrap();
    let total_posts = ds.posts.len();
    assert!(
        (1900..=2100).contains(&total_posts),
        "fixture has {total_posts} posts"
    );
    let counts = ds.platform_counts();
    let twitter = counts.get(&Platform::Twitter).copied().unwrap_or(0) as f64;
    assert!(
        (twitter / total_posts as f64 - 0.904).abs() < 0.03,
        "platform mix drifted"
    );

    let vectors = pseudo_sentence_vectors(&ds, 96, spec.seed).unwrap();
    let mut params = StageParams {
        align_dim: 32,
        seed: 9000,
        ..StageParams::default()
    };
    params.text_sgns.dim = 32;
    params.text_sgns.epochs = 8;
    params.network_sgns.dim = 32;
    params.network_sgns.epochs = 2;
    params.walks.walks_per_node = 4;
    params.walks.walk_length = 20;

    let results = run_ablation(&ds, &MethodConfig::full_grid(), &params, Some(&vectors));
    assert_eq!(results.len(), 12);
    let mut reports = Vec::new();
    for (name, result) in results {
        let report = result.unwrap_or_else(|e| panic!("row {name} failed: {e}"));
        reports.push(report);
    }

    // the BERTopic+PostTime row drops at least half of its temporal clusters
    let bert_pt = reports
        .iter()
        .find(|r| r.method == "BERTopic+PostTime")
        .unwrap();
    let removed = bert_pt.clusters_total - bert_pt.clusters_kept;
    println!(
        "BERTopic+PostTime: {} singletons dropped out of {} temporal clusters",
        removed, bert_pt.clusters_total
    );
    assert!(
        removed * 2 >= bert_pt.clusters_total,
        "dropped only {removed} of {} clusters",
        bert_pt.clusters_total
    );

    // table2.csv carries the exact column schema
    let dir = tempfile::tempdir().unwrap();
    let table2 = dir.path().join("table2.csv");
    let baseline = lockstep::data::dataset_factuality_std(&ds).ok();
    lockstep::eval::write_table2(&table2, &reports, baseline).unwrap();
    let text = std::fs::read_to_string(&table2).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# dataset_factuality_std="));
    assert_eq!(lines.next().unwrap(), "method,silhouette,avg,median,std,prop0");
    assert_eq!(lines.count(), 12, "one row per grid entry");

    println!("ACCEPTANCE 9 (paper-shape smoke): PASS");
}
