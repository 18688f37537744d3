//! Full-scale shape test: a dataset with the studied collection's
//! dimensions (16,941 posts over three platforms, 667 videos, 283
//! channels, 9,757 factuality-labeled posts) flows through ingestion,
//! label joining, graph construction, and a document-embedding pass.

use std::io::Write;

use lockstep::data::{dataset_factuality_std, ingest, join_factuality, IngestConfig};
use lockstep::embed::{pv_dbow, SgnsConfig};
use lockstep::graph::{build_graph, NodeType};

const PLATFORM_COUNTS: [(&str, usize); 3] =
    [("twitter", 15_314), ("facebook", 1_146), ("reddit", 481)];
/// posts per factuality score 0..=3 (scores 4 and 5 unused at this shape);
/// totals 9,757 labeled posts with a population std of ~0.75
const LABELED_COUNTS: [usize; 4] = [7_273, 1_888, 89, 507];
const VIDEOS: usize = 667;
const CHANNELS: usize = 283;

fn write_fixture(dir: &std::path::Path) -> [std::path::PathBuf; 3] {
    let channels_path = dir.join("channels.csv");
    let mut channels = std::io::BufWriter::new(std::fs::File::create(&channels_path).unwrap());
    writeln!(channels, "channel_id,name,factuality").unwrap();
    for c in 0..CHANNELS {
        // channels 0..=3 carry scores 0..=3; the rest are unlabeled
        let factuality = if c < 4 { c.to_string() } else { String::new() };
        writeln!(channels, "ch{c:03},Channel {c},{factuality}").unwrap();
    }
    channels.flush().unwrap();

    let videos_path = dir.join("videos.jsonl");
    let mut videos = std::io::BufWriter::new(std::fs::File::create(&videos_path).unwrap());
    for v in 0..VIDEOS {
        // videos 0..=3 sit on the labeled channels; the rest spread over
        // the unlabeled ones
        let channel = if v < 4 { v } else { 4 + (v - 4) % (CHANNELS - 4) };
        writeln!(
            videos,
            "{{\"video_id\":\"v{v:03}\",\"title\":\"t{v}\",\"channel_id\":\"ch{channel:03}\",\"published_time\":null,\"captions\":null}}"
        )
        .unwrap();
    }
    videos.flush().unwrap();

    // labeled posts link videos 0..=3 per score; the remainder round-robin
    // over the unlabeled videos
    let total: usize = PLATFORM_COUNTS.iter().map(|&(_, n)| n).sum();
    let labeled: usize = LABELED_COUNTS.iter().sum();
    let mut planned_videos = Vec::with_capacity(total);
    for (score, &count) in LABELED_COUNTS.iter().enumerate() {
        planned_videos.extend(std::iter::repeat_n(score, count));
    }
    for i in 0..total - labeled {
        planned_videos.push(4 + i % (VIDEOS - 4));
    }

    let mut planned_platforms = Vec::with_capacity(total);
    for (platform, count) in PLATFORM_COUNTS {
        planned_platforms.extend(std::iter::repeat_n(platform, count));
    }

    let posts_path = dir.join("posts.jsonl");
    let mut posts = std::io::BufWriter::new(std::fs::File::create(&posts_path).unwrap());
    for (i, (video, platform)) in planned_videos.iter().zip(&planned_platforms).enumerate() {
        let minute = i % 60;
        let hour = i / 3600 % 24;
        writeln!(
            posts,
            "{{\"post_id\":\"p{i:05}\",\"user_id\":\"u{:04}\",\"platform\":\"{platform}\",\"published_time\":\"2018-04-01T{hour:02}:{minute:02}:{:02}Z\",\"text\":\"tok{} tok{} tok{} tok{} tok{}\",\"action_type\":\"post\",\"video_id\":\"v{video:03}\"}}",
            i % 5000,
            i % 60,
            i % 11, (i / 11) % 13, (i / 143) % 17, i % 7, (i / 7) % 19,
        )
        .unwrap();
    }
    posts.flush().unwrap();

    [posts_path, videos_path, channels_path]
}

#[test]
fn full_scale_ingest_join_graph_and_embed() {
    let dir = tempfile::tempdir().unwrap();
    let [posts, videos, channels] = write_fixture(dir.path());

    let outcome = ingest(&posts, &videos, &channels, &IngestConfig::default()).unwrap();
    let ds = outcome.dataset;
    assert_eq!(outcome.quarantine.total(), 0);
    assert_eq!(ds.posts.len(), 16_941);
    assert_eq!(ds.videos.len(), 667);
    assert_eq!(ds.channels.len(), 283);

    let stats = join_factuality(&ds);
    assert_eq!(stats.labeled, 9_757);
    assert_eq!(stats.score_counts[0], 7_273);
    assert_eq!(stats.score_counts[1], 1_888);
    assert!((stats.score_counts[0] as f64 / stats.labeled as f64 - 0.745).abs() < 0.001);
    assert!((stats.score_counts[1] as f64 / stats.labeled as f64 - 0.194).abs() < 0.001);

    let std = dataset_factuality_std(&ds).unwrap();
    assert!((std - 0.75).abs() < 0.005, "dataset std {std}");

    let graph = build_graph(&ds);
    assert_eq!(graph.count_of(NodeType::Channel), 283);
    assert_eq!(graph.count_of(NodeType::Video), 667);
    assert_eq!(graph.count_of(NodeType::Post), 16_941);

    // document embedding over the full corpus in one streaming pass
    let cfg = SgnsConfig {
        dim: 8,
        epochs: 1,
        ..SgnsConfig::default()
    };
    let model = pv_dbow(&ds, &cfg).unwrap();
    assert_eq!(model.docs.rows(), 16_941);
}
