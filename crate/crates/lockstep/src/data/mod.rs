//! Normalized multi-platform dataset: posts, videos, channels, factuality labels.
//!
//! Posts reference videos, videos reference channels, and channels optionally
//! carry an integer factuality score in `[0, 5]`. A [`Dataset`] is immutable
//! after ingestion and referentially closed: every `video_id` on a post
//! resolves to a video and every `channel_id` on a video resolves to a
//! channel (unless quarantine mode dropped the offender).

mod ingest;

pub use ingest::{
    ingest, write_channels, write_dataset, write_posts, write_videos, IngestConfig, IngestOutcome,
    Quarantine,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source platform of a post. Anything outside the three studied platforms
/// is preserved under its original tag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Platform {
    Twitter,
    Facebook,
    Reddit,
    Other(String),
}

impl Platform {
    pub fn as_str(&self) -> &str {
        match self {
            Platform::Twitter => "twitter",
            Platform::Facebook => "facebook",
            Platform::Reddit => "reddit",
            Platform::Other(tag) => tag,
        }
    }
}

impl From<&str> for Platform {
    fn from(s: &str) -> Self {
        match s {
            "twitter" => Platform::Twitter,
            "facebook" => Platform::Facebook,
            "reddit" => Platform::Reddit,
            other => Platform::Other(other.to_string()),
        }
    }
}

impl Serialize for Platform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Platform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tag = String::deserialize(d)?;
        Ok(Platform::from(tag.as_str()))
    }
}

impl std::fmt::Display for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a message introduced content or replied to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionType {
    Post,
    Reply,
}

/// One social-media message. Timestamps are UTC integer seconds; sub-second
/// precision is truncated at ingest.
#[derive(Debug, Clone, PartialEq)]
pub struct PostRecord {
    pub post_id: String,
    pub user_id: String,
    pub platform: Platform,
    pub published_time: i64,
    pub text: String,
    pub action_type: ActionType,
    pub video_id: Option<String>,
}

/// A video shared by posts, hosted on a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub title: String,
    pub channel_id: String,
    pub published_time: Option<i64>,
    pub captions: Option<String>,
}

/// A hosting channel with an optional factuality score in `[0, 5]`
/// (0 = very low, 5 = very high).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRecord {
    pub channel_id: String,
    pub name: String,
    pub factuality: Option<u8>,
}

/// Referentially closed collection of posts, videos, and channels.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub posts: Vec<PostRecord>,
    pub videos: BTreeMap<String, VideoRecord>,
    pub channels: BTreeMap<String, ChannelRecord>,
}

impl Dataset {
    /// Factuality score of the channel behind a post's video, if any.
    pub fn post_factuality(&self, post: &PostRecord) -> Option<u8> {
        let video = self.videos.get(post.video_id.as_deref()?)?;
        self.channels.get(&video.channel_id)?.factuality
    }

    /// Channel id behind a post's video, if the post links one.
    pub fn post_channel(&self, post: &PostRecord) -> Option<&str> {
        let video = self.videos.get(post.video_id.as_deref()?)?;
        Some(video.channel_id.as_str())
    }

    /// Posts per platform.
    pub fn platform_counts(&self) -> BTreeMap<Platform, usize> {
        let mut counts = BTreeMap::new();
        for post in &self.posts {
            *counts.entry(post.platform.clone()).or_insert(0) += 1;
        }
        counts
    }
}

/// Per-post factuality labels plus aggregate counts, from following
/// post -> video -> channel.
#[derive(Debug, Clone, Serialize)]
pub struct LabeledStats {
    /// post_id -> factuality score, for posts whose channel is labeled.
    pub per_post: BTreeMap<String, u8>,
    /// Number of labeled posts per score 0..=5.
    pub score_counts: [usize; 6],
    pub labeled: usize,
    pub unlabeled: usize,
    pub fraction_labeled: f64,
}

/// Resolve factuality labels for every post that links a labeled channel.
/// Posts without a video or with an unlabeled channel simply stay unlabeled.
pub fn join_factuality(ds: &Dataset) -> LabeledStats {
    let mut per_post = BTreeMap::new();
    let mut score_counts = [0usize; 6];
    for post in &ds.posts {
        if let Some(score) = ds.post_factuality(post) {
            per_post.insert(post.post_id.clone(), score);
            score_counts[score as usize] += 1;
        }
    }
    let labeled = per_post.len();
    let unlabeled = ds.posts.len() - labeled;
    let fraction_labeled = if ds.posts.is_empty() {
        0.0
    } else {
        labeled as f64 / ds.posts.len() as f64
    };
    LabeledStats {
        per_post,
        score_counts,
        labeled,
        unlabeled,
        fraction_labeled,
    }
}

/// Population standard deviation of the factuality scores over all labeled
/// posts. Population (divide by n) so that identical scores give exactly 0.
pub fn dataset_factuality_std(ds: &Dataset) -> Result<f64> {
    let stats = join_factuality(ds);
    if stats.labeled < 2 {
        return Err(Error::InsufficientLabels);
    }
    Ok(population_std(
        stats.per_post.values().map(|&s| s as f64),
        stats.labeled,
    ))
}

/// Two-pass population standard deviation over `n` values.
pub(crate) fn population_std(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(id: &str, video: Option<&str>) -> PostRecord {
        PostRecord {
            post_id: id.to_string(),
            user_id: format!("u-{id}"),
            platform: Platform::Twitter,
            published_time: 0,
            text: String::new(),
            action_type: ActionType::Post,
            video_id: video.map(str::to_string),
        }
    }

    fn video(id: &str, channel: &str) -> VideoRecord {
        VideoRecord {
            video_id: id.to_string(),
            title: String::new(),
            channel_id: channel.to_string(),
            published_time: None,
            captions: None,
        }
    }

    fn channel(id: &str, factuality: Option<u8>) -> ChannelRecord {
        ChannelRecord {
            channel_id: id.to_string(),
            name: id.to_string(),
            factuality,
        }
    }

    fn labeled_fixture(scores: &[u8]) -> Dataset {
        let mut ds = Dataset::default();
        for (i, &score) in scores.iter().enumerate() {
            let vid = format!("v{i}");
            let cid = format!("c{i}");
            ds.posts.push(post(&format!("p{i}"), Some(&vid)));
            ds.videos.insert(vid.clone(), video(&vid, &cid));
            ds.channels.insert(cid.clone(), channel(&cid, Some(score)));
        }
        ds
    }

    #[test]
    fn join_counts_only_labeled_channels() {
        let mut ds = Dataset::default();
        ds.posts.push(post("a", Some("v1")));
        ds.posts.push(post("b", Some("v2")));
        ds.posts.push(post("c", None));
        ds.videos.insert("v1".into(), video("v1", "c1"));
        ds.videos.insert("v2".into(), video("v2", "c2"));
        ds.channels.insert("c1".into(), channel("c1", Some(3)));
        ds.channels.insert("c2".into(), channel("c2", None));

        let stats = join_factuality(&ds);
        assert_eq!(stats.labeled, 1);
        assert_eq!(stats.unlabeled, 2);
        assert_eq!(stats.labeled + stats.unlabeled, ds.posts.len());
        assert_eq!(stats.score_counts[3], 1);
    }

    #[test]
    fn join_all_unlabeled() {
        let mut ds = Dataset::default();
        ds.posts.push(post("a", Some("v1")));
        ds.videos.insert("v1".into(), video("v1", "c1"));
        ds.channels.insert("c1".into(), channel("c1", None));
        let stats = join_factuality(&ds);
        assert_eq!(stats.labeled, 0);
        assert_eq!(stats.fraction_labeled, 0.0);
    }

    #[test]
    fn join_single_channel_five_posts() {
        // One channel at score 3 linked by 5 posts: direct count oracle.
        let mut ds = Dataset::default();
        for i in 0..5 {
            ds.posts.push(post(&format!("p{i}"), Some("v")));
        }
        ds.videos.insert("v".into(), video("v", "c"));
        ds.channels.insert("c".into(), channel("c", Some(3)));
        let stats = join_factuality(&ds);
        assert_eq!(stats.labeled, 5);
        assert_eq!(stats.score_counts[3], 5);
    }

    #[test]
    fn std_of_identical_scores_is_zero() {
        let ds = labeled_fixture(&[0, 0, 0, 0]);
        assert_eq!(dataset_factuality_std(&ds).unwrap(), 0.0);
    }

    #[test]
    fn std_matches_two_pass_oracle() {
        // {0,0,1,5}: mean 1.5, var = (1.5^2*2 + 0.5^2 + 3.5^2)/4 = 4.25
        let ds = labeled_fixture(&[0, 0, 1, 5]);
        let expected = ((1.5f64 * 1.5 * 2.0 + 0.25 + 12.25) / 4.0).sqrt();
        let got = dataset_factuality_std(&ds).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got - 2.0615528128).abs() < 1e-9);
    }

    #[test]
    fn std_requires_two_labels() {
        let ds = labeled_fixture(&[2]);
        assert!(matches!(
            dataset_factuality_std(&ds),
            Err(Error::InsufficientLabels)
        ));
    }

    #[test]
    fn std_invariant_under_post_permutation() {
        let mut ds = labeled_fixture(&[0, 1, 2, 3, 4, 5]);
        let before = dataset_factuality_std(&ds).unwrap();
        ds.posts.reverse();
        let after = dataset_factuality_std(&ds).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn white_helmets_shaped_std() {
        // 7273 posts at 0, 1888 at 1, 89 at 2, 507 at 3: population std ~= 0.75.
        let mut scores = vec![0u8; 7273];
        scores.extend(std::iter::repeat_n(1u8, 1888));
        scores.extend(std::iter::repeat_n(2u8, 89));
        scores.extend(std::iter::repeat_n(3u8, 507));
        assert_eq!(scores.len(), 9757);
        let ds = labeled_fixture(&scores);
        let std = dataset_factuality_std(&ds).unwrap();
        assert!((std - 0.75).abs() < 0.005, "std {std}");
    }
}
