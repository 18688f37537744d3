//! Synthetic multi-platform datasets with planted coordinated campaigns.
//!
//! Each campaign is a burst: one base text template mutated per post,
//! timestamps uniform inside a narrow window, and videos drawn from
//! channels that share the campaign's factuality profile. Background posts
//! carry independent texts, times, and channels. The generator also hands
//! back the ground truth the real dataset lacks, enabling pairwise
//! precision/recall scoring of any clustering.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ActionType, ChannelRecord, Dataset, Platform, PostRecord, VideoRecord};
use crate::error::{Error, Result};

/// Neutral token pool for generated texts; no real-world content.
const VOCABULARY_SIZE: usize = 400;

fn vocab_token(i: usize) -> String {
    // pronounceable two-syllable tokens: deterministic and collision-free
    const CONSONANTS: [&str; 10] = ["b", "d", "f", "g", "k", "l", "m", "n", "r", "t"];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    let c1 = CONSONANTS[i % 10];
    let v1 = VOWELS[(i / 10) % 5];
    let c2 = CONSONANTS[(i / 50) % 10];
    let v2 = VOWELS[(i / 500) % 5];
    format!("{c1}{v1}{c2}{v2}{}", i % 100)
}

/// Knobs of the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub n_campaigns: usize,
    /// inclusive range of posts per campaign
    pub posts_per_campaign: (usize, usize),
    /// campaign posts land uniformly inside a window of this many seconds
    pub burst_width_seconds: u32,
    /// probability that each template token is swapped or a token inserted
    pub text_mutation_rate: f64,
    /// platform weights, normalized internally
    pub platform_mix: Vec<(Platform, f64)>,
    /// factuality weights for scores 0..=5; each campaign channel draws from
    /// this profile. A single-score profile pins every campaign post to one
    /// score.
    pub channel_factuality_profile: [f64; 6],
    /// probability a campaign post reuses one of the campaign's existing
    /// videos instead of minting a new one
    pub video_reuse_prob: f64,
    pub background_posts: usize,
    /// background posts (and campaign burst starts) spread over this span
    pub background_time_span_seconds: u64,
    /// background channels carry random factuality scores (some unlabeled)
    pub background_channels: usize,
    /// users per campaign; campaign posts draw from this pool
    pub users_per_campaign: usize,
    /// reuse one shared user pool across campaigns instead of fresh accounts
    pub reuse_users_across_campaigns: bool,
    /// campaigns arranged as template-sharing pairs whose bursts sit this
    /// close together; their factuality scores are drawn independently, so
    /// temporal radii wide enough to bridge the gap mix factuality
    pub sibling_pairs: usize,
    /// seconds between the sibling bursts' start times (sampled range)
    pub sibling_gap_seconds: (u32, u32),
    /// additional drawn-out campaigns: consecutive post gaps drawn from
    /// `slow_gap_seconds` instead of a tight burst, so they only chain into
    /// one cluster once the temporal radius covers the gap
    pub slow_campaigns: usize,
    pub slow_gap_seconds: (u32, u32),
    /// background duplicate pairs: two near-identical posts seconds apart,
    /// linking channels of different factuality, trailing a campaign burst
    /// by `echo_offset_seconds`; not coordinated in the ground truth
    pub echo_pairs: usize,
    /// seconds between a campaign burst's end and its echo pair
    pub echo_offset_seconds: (u32, u32),
    pub seed: u64,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        CampaignSpec {
            n_campaigns: 20,
            posts_per_campaign: (8, 15),
            burst_width_seconds: 40,
            text_mutation_rate: 0.15,
            platform_mix: vec![
                (Platform::Twitter, 0.904),
                (Platform::Facebook, 0.068),
                (Platform::Reddit, 0.028),
            ],
            channel_factuality_profile: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            video_reuse_prob: 0.7,
            background_posts: 5000,
            background_time_span_seconds: 90 * 24 * 3600,
            background_channels: 60,
            users_per_campaign: 6,
            reuse_users_across_campaigns: false,
            sibling_pairs: 0,
            sibling_gap_seconds: (120, 160),
            slow_campaigns: 0,
            slow_gap_seconds: (25, 35),
            echo_pairs: 0,
            echo_offset_seconds: (35, 50),
            seed: 42,
        }
    }
}

/// post_id -> campaign id (None = background).
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub campaign_of: BTreeMap<String, Option<usize>>,
}

impl GroundTruth {
    /// Persist as CSV `post_id,campaign_id` (empty field for background).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "post_id,campaign_id")?;
        for (post_id, campaign) in &self.campaign_of {
            match campaign {
                Some(c) => writeln!(out, "{post_id},{c}")?,
                None => writeln!(out, "{post_id},")?,
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<GroundTruth> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)?;
        let mut campaign_of = BTreeMap::new();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let post_id = row.get(0).unwrap_or("").to_string();
            let campaign = match row.get(1).unwrap_or("").trim() {
                "" => None,
                raw => Some(raw.parse::<usize>().map_err(|_| Error::MalformedRecord {
                    line: i + 2,
                    reason: format!("campaign id `{raw}` is not an integer"),
                })?),
            };
            campaign_of.insert(post_id, campaign);
        }
        Ok(GroundTruth { campaign_of })
    }
}

struct Generator {
    rng: ChaCha8Rng,
    ds: Dataset,
    truth: GroundTruth,
    next_video: usize,
    platform_cdf: Vec<(Platform, f64)>,
}

impl Generator {
    fn pick_platform(&mut self) -> Platform {
        let draw: f64 = self.rng.random_range(0.0..1.0);
        for (platform, cutoff) in &self.platform_cdf {
            if draw < *cutoff {
                return platform.clone();
            }
        }
        self.platform_cdf
            .last()
            .map(|(p, _)| p.clone())
            .unwrap_or(Platform::Twitter)
    }

    fn pick_factuality(&mut self, profile: &[f64; 6]) -> u8 {
        let total: f64 = profile.iter().sum();
        let mut draw = self.rng.random_range(0.0..total.max(1e-12));
        for (score, &w) in profile.iter().enumerate() {
            if draw < w {
                return score as u8;
            }
            draw -= w;
        }
        0
    }

    fn random_text(&mut self, len: usize) -> Vec<String> {
        (0..len)
            .map(|_| vocab_token(self.rng.random_range(0..VOCABULARY_SIZE)))
            .collect()
    }

    fn mutate(&mut self, template: &[String], rate: f64) -> Vec<String> {
        let mut tokens: Vec<String> = Vec::with_capacity(template.len() + 2);
        for token in template {
            if self.rng.random_range(0.0..1.0) < rate {
                // swap for a random token
                tokens.push(vocab_token(self.rng.random_range(0..VOCABULARY_SIZE)));
            } else {
                tokens.push(token.clone());
            }
            if self.rng.random_range(0.0..1.0) < rate / 2.0 {
                tokens.push(vocab_token(self.rng.random_range(0..VOCABULARY_SIZE)));
            }
        }
        tokens
    }

    fn add_channel(&mut self, channel_id: String, factuality: Option<u8>) {
        self.ds.channels.insert(
            channel_id.clone(),
            ChannelRecord {
                name: format!("channel {channel_id}"),
                channel_id,
                factuality,
            },
        );
    }

    fn add_video(&mut self, channel_id: &str) -> String {
        let video_id = format!("vid{:05}", self.next_video);
        self.next_video += 1;
        self.ds.videos.insert(
            video_id.clone(),
            VideoRecord {
                video_id: video_id.clone(),
                title: String::new(),
                channel_id: channel_id.to_string(),
                published_time: None,
                captions: None,
            },
        );
        video_id
    }

    fn add_post(
        &mut self,
        post_id: String,
        user_id: String,
        time: i64,
        tokens: &[String],
        video_id: Option<String>,
        campaign: Option<usize>,
    ) {
        let platform = self.pick_platform();
        self.ds.posts.push(PostRecord {
            post_id: post_id.clone(),
            user_id,
            platform,
            published_time: time,
            text: tokens.join(" "),
            action_type: ActionType::Post,
            video_id,
        });
        self.truth.campaign_of.insert(post_id, campaign);
    }
}

/// Generate a dataset and its ground truth from the spec. Fixed seeds give
/// bitwise-identical output.
pub fn generate(spec: &CampaignSpec) -> Result<(Dataset, GroundTruth)> {
    if spec.text_mutation_rate < 0.0 || spec.text_mutation_rate > 1.0 {
        return Err(Error::Config("text_mutation_rate must be in [0,1]".into()));
    }
    if spec.burst_width_seconds == 0 {
        return Err(Error::Config("burst_width_seconds must be positive".into()));
    }
    if spec.posts_per_campaign.0 > spec.posts_per_campaign.1 || spec.posts_per_campaign.0 == 0 {
        return Err(Error::Config("posts_per_campaign range is empty".into()));
    }

    let mut cdf = Vec::new();
    let total: f64 = spec.platform_mix.iter().map(|(_, w)| w).sum();
    let mut acc = 0.0;
    for (platform, w) in &spec.platform_mix {
        acc += w / total.max(1e-12);
        cdf.push((platform.clone(), acc));
    }

    let mut generator = Generator {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        ds: Dataset::default(),
        truth: GroundTruth::default(),
        next_video: 0,
        platform_cdf: cdf,
    };

    // background channels: half labeled with spread-out scores, half mixed
    for b in 0..spec.background_channels.max(1) {
        let factuality = if b % 4 == 3 {
            None
        } else {
            Some((b % 6) as u8)
        };
        generator.add_channel(format!("bg_ch{b:03}"), factuality);
    }

    let span = spec.background_time_span_seconds.max(1) as i64;
    let epoch = 1_522_540_800i64; // 2018-04-01T00:00:00Z, second precision

    // campaigns: plan templates and burst starts first so sibling pairs can
    // share a template and sit temporally adjacent; campaigns beyond
    // n_campaigns are the drawn-out ("slow") ones
    let total_campaigns = spec.n_campaigns + spec.slow_campaigns;
    let mut templates: Vec<Vec<String>> = Vec::with_capacity(total_campaigns);
    let mut burst_starts: Vec<i64> = Vec::with_capacity(total_campaigns);
    for c in 0..total_campaigns {
        let is_second_sibling = c % 2 == 1 && c / 2 < spec.sibling_pairs && c < spec.n_campaigns;
        if is_second_sibling {
            let lead = templates[c - 1].clone();
            templates.push(generator.mutate(&lead, spec.text_mutation_rate));
            let (lo, hi) = spec.sibling_gap_seconds;
            let gap = generator.rng.random_range(lo.min(hi) as i64..=hi.max(lo) as i64);
            burst_starts.push(burst_starts[c - 1] + gap);
        } else {
            let template_len = generator.rng.random_range(8..=12);
            templates.push(generator.random_text(template_len));
            burst_starts.push(generator.rng.random_range(0..span.max(1)) + epoch);
        }
    }

    let shared_pool: Vec<String> = (0..spec.users_per_campaign.max(1))
        .map(|u| format!("coord_user{u:03}"))
        .collect();
    for c in 0..total_campaigns {
        let score = generator.pick_factuality(&spec.channel_factuality_profile);
        let channel_id = format!("camp_ch{c:03}");
        generator.add_channel(channel_id.clone(), Some(score));

        let template = templates[c].clone();
        let n_posts = generator
            .rng
            .random_range(spec.posts_per_campaign.0..=spec.posts_per_campaign.1);
        let burst_start = burst_starts[c];

        let times: Vec<i64> = if c < spec.n_campaigns {
            (0..n_posts)
                .map(|_| {
                    burst_start
                        + generator
                            .rng
                            .random_range(0..=spec.burst_width_seconds as i64)
                })
                .collect()
        } else {
            let (lo, hi) = spec.slow_gap_seconds;
            let mut t = burst_start;
            (0..n_posts)
                .map(|p| {
                    if p > 0 {
                        t += generator.rng.random_range(lo.min(hi) as i64..=hi.max(lo) as i64);
                    }
                    t
                })
                .collect()
        };

        let users: Vec<String> = if spec.reuse_users_across_campaigns {
            shared_pool.clone()
        } else {
            (0..spec.users_per_campaign.max(1))
                .map(|u| format!("camp{c:03}_user{u:02}"))
                .collect()
        };

        let mut campaign_videos: Vec<String> = Vec::new();
        for (p, &time) in times.iter().enumerate() {
            let tokens = generator.mutate(&template, spec.text_mutation_rate);
            let video_id = if !campaign_videos.is_empty()
                && generator.rng.random_range(0.0..1.0) < spec.video_reuse_prob
            {
                campaign_videos[generator.rng.random_range(0..campaign_videos.len())].clone()
            } else {
                let vid = generator.add_video(&channel_id);
                campaign_videos.push(vid.clone());
                vid
            };
            let user = users[generator.rng.random_range(0..users.len())].clone();
            generator.add_post(
                format!("camp{c:03}_p{p:03}"),
                user,
                time,
                &tokens,
                Some(video_id),
                Some(c),
            );
        }

        // echo pair: a tight near-duplicate pair trailing the burst, split
        // across two fresh channels with different scores, not coordinated
        // per the ground truth; hosts are solo fast campaigns so an echo
        // can never bridge two sibling bursts
        let echo_host_base = spec.sibling_pairs * 2;
        if c >= echo_host_base
            && c < echo_host_base + spec.echo_pairs
            && c < spec.n_campaigns
        {
            let (lo, hi) = spec.echo_offset_seconds;
            let offset = generator.rng.random_range(lo.min(hi) as i64..=hi.max(lo) as i64);
            let first = burst_start + spec.burst_width_seconds as i64 + offset;
            let score_a = generator.pick_factuality(&spec.channel_factuality_profile);
            let score_b = (score_a + 1 + (c as u8 % 4)) % 6;
            for (e, (score, time)) in [(score_a, first), (score_b, first + generator.rng.random_range(3..=8))]
                .into_iter()
                .enumerate()
            {
                let channel = format!("echo_ch{c:03}_{e}");
                generator.add_channel(channel.clone(), Some(score));
                let video = generator.add_video(&channel);
                let tokens = generator.mutate(&template, spec.text_mutation_rate);
                let user = format!("echo_user{c:03}_{e}");
                generator.add_post(
                    format!("echo{c:03}_p{e}"),
                    user,
                    time,
                    &tokens,
                    Some(video),
                    None,
                );
            }
        }
    }

    // background: independent texts, times, channels
    let bg_channels: Vec<String> = (0..spec.background_channels.max(1))
        .map(|b| format!("bg_ch{b:03}"))
        .collect();
    let mut bg_videos: Vec<String> = Vec::new();
    for p in 0..spec.background_posts {
        let time = generator.rng.random_range(0..span.max(1)) + epoch;
        let len = generator.rng.random_range(6..=14);
        let tokens = generator.random_text(len);
        let video_id = if !bg_videos.is_empty() && generator.rng.random_range(0.0..1.0) < 0.5 {
            Some(bg_videos[generator.rng.random_range(0..bg_videos.len())].clone())
        } else if generator.rng.random_range(0.0..1.0) < 0.8 {
            let channel = bg_channels[generator.rng.random_range(0..bg_channels.len())].clone();
            let vid = generator.add_video(&channel);
            bg_videos.push(vid.clone());
            Some(vid)
        } else {
            None
        };
        let user = format!("bg_user{:04}", generator.rng.random_range(0..2000));
        generator.add_post(format!("bg_p{p:05}"), user, time, &tokens, video_id, None);
    }

    // deterministic shuffle so campaign posts are not contiguous in file order
    let mut order: Vec<usize> = (0..generator.ds.posts.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(17));
    for i in (1..order.len()).rev() {
        let j = shuffle_rng.random_range(0..=i);
        order.swap(i, j);
    }
    generator.ds.posts = order
        .into_iter()
        .map(|i| generator.ds.posts[i].clone())
        .collect();

    Ok((generator.ds, generator.truth))
}

/// Stand-in sentence vectors for datasets without a real encoder: each
/// token hashes to a fixed random direction and a post's vector is the
/// normalized sum over its tokens, so near-duplicate texts land close
/// together. Deterministic in (dim, seed).
pub fn pseudo_sentence_vectors(
    ds: &Dataset,
    dim: usize,
    seed: u64,
) -> Result<crate::embed::EmbeddingMatrix> {
    let mut values = Vec::with_capacity(ds.posts.len() * dim);
    for post in &ds.posts {
        let mut row = vec![0.0f64; dim];
        for token in crate::text::tokenize(&post.text) {
            let mut h = seed ^ 0xcbf2_9ce4_8422_2325;
            for b in token.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(h);
            for v in row.iter_mut() {
                *v += rng.random_range(-1.0..1.0);
            }
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut row {
                *v /= norm;
            }
        }
        values.extend(row);
    }
    crate::embed::EmbeddingMatrix::new(
        ds.posts.iter().map(|p| p.post_id.clone()).collect(),
        dim,
        values,
    )
}

/// Pairwise precision/recall/F1 of a finalized assignment against ground
/// truth: a post pair is predicted coordinated when it shares a kept
/// cluster, truly coordinated when it shares a campaign.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_pairs: u64,
    pub predicted_pairs: u64,
    pub matching_pairs: u64,
    /// no predicted pairs at all: precision reported as 0 by convention
    pub degenerate: bool,
}

pub fn score_detection(
    assignment: &crate::cluster::ClusterAssignment,
    truth: &GroundTruth,
) -> DetectionScore {
    // contingency over (cluster label, campaign)
    let mut cluster_sizes: BTreeMap<i32, u64> = BTreeMap::new();
    let mut campaign_sizes: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cells: BTreeMap<(i32, usize), u64> = BTreeMap::new();

    for (id, &label) in assignment.ids().iter().zip(assignment.labels()) {
        let campaign = truth.campaign_of.get(id).copied().flatten();
        if label >= 0 {
            *cluster_sizes.entry(label).or_insert(0) += 1;
        }
        if let Some(c) = campaign {
            *campaign_sizes.entry(c).or_insert(0) += 1;
            if label >= 0 {
                *cells.entry((label, c)).or_insert(0) += 1;
            }
        }
    }

    let pairs = |n: u64| n * n.saturating_sub(1) / 2;
    let predicted: u64 = cluster_sizes.values().map(|&n| pairs(n)).sum();
    let truth_pairs: u64 = campaign_sizes.values().map(|&n| pairs(n)).sum();
    let matching: u64 = cells.values().map(|&n| pairs(n)).sum();

    let degenerate = predicted == 0;
    let precision = if degenerate {
        0.0
    } else {
        matching as f64 / predicted as f64
    };
    let recall = if truth_pairs == 0 {
        0.0
    } else {
        matching as f64 / truth_pairs as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    DetectionScore {
        precision,
        recall,
        f1,
        true_pairs: truth_pairs,
        predicted_pairs: predicted,
        matching_pairs: matching,
        degenerate,
    }
}
