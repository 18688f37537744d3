//! File ingestion and serialization for the dataset formats.
//!
//! Posts and videos arrive as JSON-lines, channels as CSV with header
//! `channel_id,name,factuality`. Timestamps are ISO-8601 on the wire and
//! normalized to UTC integer seconds in memory.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ActionType, ChannelRecord, Dataset, Platform, PostRecord, VideoRecord};

/// Ingestion policy.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Abort on dangling references instead of quarantining the record.
    pub strict: bool,
    /// Optional `[start, end]` collection window (UTC seconds, inclusive).
    /// Posts outside it are quarantined.
    pub window: Option<(i64, i64)>,
    /// Keep only posts with this action type, when set.
    pub action_filter: Option<ActionType>,
}

/// Counts of records skipped during ingestion, by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Quarantine {
    pub bad_timestamp: usize,
    pub outside_window: usize,
    pub dangling_video: usize,
    pub dangling_channel: usize,
    pub filtered_action: usize,
}

impl Quarantine {
    pub fn total(&self) -> usize {
        self.bad_timestamp
            + self.outside_window
            + self.dangling_video
            + self.dangling_channel
            + self.filtered_action
    }
}

/// A referentially closed dataset plus what was left behind to get there.
#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub dataset: Dataset,
    pub quarantine: Quarantine,
}

#[derive(Serialize, Deserialize)]
struct PostWire {
    post_id: String,
    user_id: String,
    platform: Platform,
    published_time: String,
    text: String,
    action_type: ActionType,
    video_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct VideoWire {
    video_id: String,
    title: String,
    channel_id: String,
    published_time: Option<String>,
    captions: Option<String>,
}

fn parse_time(raw: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(raw)
        .ok()
        .map(|t| t.with_timezone(&Utc).timestamp())
}

fn format_time(secs: i64) -> String {
    DateTime::<Utc>::from_timestamp(secs, 0)
        .expect("timestamp in range")
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Ingest the three input files into a referentially closed [`Dataset`].
///
/// Duplicate post ids, video ids, or channel ids are rejected outright.
/// Records with unparseable timestamps, out-of-window posts, and (in
/// non-strict mode) dangling references are counted and dropped.
pub fn ingest(
    posts_path: &Path,
    videos_path: &Path,
    channels_path: &Path,
    config: &IngestConfig,
) -> Result<IngestOutcome> {
    let mut quarantine = Quarantine::default();

    let channels = read_channels(channels_path)?;
    let videos = read_videos(videos_path, &channels, config, &mut quarantine)?;
    let posts = read_posts(posts_path, &videos, config, &mut quarantine)?;

    Ok(IngestOutcome {
        dataset: Dataset {
            posts,
            videos,
            channels,
        },
        quarantine,
    })
}

fn read_channels(path: &Path) -> Result<BTreeMap<String, ChannelRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut channels = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let row = row?;
        let channel_id = row.get(0).unwrap_or("").to_string();
        if channel_id.is_empty() {
            return Err(Error::MalformedRecord {
                line,
                reason: "empty channel_id".into(),
            });
        }
        let name = row.get(1).unwrap_or("").to_string();
        let factuality = match row.get(2).unwrap_or("").trim() {
            "" => None,
            raw => {
                let value: u8 = raw.parse().map_err(|_| Error::MalformedRecord {
                    line,
                    reason: format!("factuality `{raw}` is not an integer"),
                })?;
                if value > 5 {
                    return Err(Error::MalformedRecord {
                        line,
                        reason: format!("factuality {value} outside [0,5]"),
                    });
                }
                Some(value)
            }
        };
        if channels
            .insert(
                channel_id.clone(),
                ChannelRecord {
                    channel_id: channel_id.clone(),
                    name,
                    factuality,
                },
            )
            .is_some()
        {
            return Err(Error::MalformedRecord {
                line,
                reason: format!("duplicate channel_id {channel_id}"),
            });
        }
    }
    Ok(channels)
}

fn read_videos(
    path: &Path,
    channels: &BTreeMap<String, ChannelRecord>,
    config: &IngestConfig,
    quarantine: &mut Quarantine,
) -> Result<BTreeMap<String, VideoRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut videos = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: VideoWire = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if wire.channel_id.is_empty() {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "empty channel_id".into(),
            });
        }
        if !channels.contains_key(&wire.channel_id) {
            if config.strict {
                return Err(Error::DanglingReference {
                    kind: "channel".into(),
                    id: wire.channel_id,
                });
            }
            quarantine.dangling_channel += 1;
            continue;
        }
        let published_time = match &wire.published_time {
            None => None,
            Some(raw) => match parse_time(raw) {
                Some(t) => Some(t),
                None => {
                    quarantine.bad_timestamp += 1;
                    continue;
                }
            },
        };
        let record = VideoRecord {
            video_id: wire.video_id.clone(),
            title: wire.title,
            channel_id: wire.channel_id,
            published_time,
            captions: wire.captions,
        };
        match videos.entry(wire.video_id.clone()) {
            Entry::Vacant(slot) => {
                slot.insert(record);
            }
            Entry::Occupied(_) => {
                return Err(Error::MalformedRecord {
                    line: line_no,
                    reason: format!("duplicate video_id {}", wire.video_id),
                })
            }
        }
    }
    Ok(videos)
}

fn read_posts(
    path: &Path,
    videos: &BTreeMap<String, VideoRecord>,
    config: &IngestConfig,
    quarantine: &mut Quarantine,
) -> Result<Vec<PostRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut posts = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: PostWire = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if !seen.insert(wire.post_id.clone()) {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: format!("duplicate post_id {}", wire.post_id),
            });
        }
        let published_time = match parse_time(&wire.published_time) {
            Some(t) => t,
            None => {
                quarantine.bad_timestamp += 1;
                continue;
            }
        };
        if let Some((start, end)) = config.window {
            if published_time < start || published_time > end {
                quarantine.outside_window += 1;
                continue;
            }
        }
        if let Some(filter) = config.action_filter {
            if wire.action_type != filter {
                quarantine.filtered_action += 1;
                continue;
            }
        }
        if let Some(video_id) = &wire.video_id {
            if !videos.contains_key(video_id) {
                if config.strict {
                    return Err(Error::DanglingReference {
                        kind: "video".into(),
                        id: video_id.clone(),
                    });
                }
                quarantine.dangling_video += 1;
                continue;
            }
        }
        posts.push(PostRecord {
            post_id: wire.post_id,
            user_id: wire.user_id,
            platform: wire.platform,
            published_time,
            text: wire.text,
            action_type: wire.action_type,
            video_id: wire.video_id,
        });
    }
    Ok(posts)
}

/// Write posts as JSON-lines in the ingest format.
pub fn write_posts(path: &Path, posts: &[PostRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for post in posts {
        let wire = PostWire {
            post_id: post.post_id.clone(),
            user_id: post.user_id.clone(),
            platform: post.platform.clone(),
            published_time: format_time(post.published_time),
            text: post.text.clone(),
            action_type: post.action_type,
            video_id: post.video_id.clone(),
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Write videos as JSON-lines in the ingest format.
pub fn write_videos<'a>(path: &Path, videos: impl Iterator<Item = &'a VideoRecord>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for video in videos {
        let wire = VideoWire {
            video_id: video.video_id.clone(),
            title: video.title.clone(),
            channel_id: video.channel_id.clone(),
            published_time: video.published_time.map(format_time),
            captions: video.captions.clone(),
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Write channels as CSV with the `channel_id,name,factuality` header.
pub fn write_channels<'a>(
    path: &Path,
    channels: impl Iterator<Item = &'a ChannelRecord>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["channel_id", "name", "factuality"])?;
    for ch in channels {
        let fact = ch.factuality.map(|f| f.to_string()).unwrap_or_default();
        writer.write_record([ch.channel_id.as_str(), ch.name.as_str(), fact.as_str()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Write a full dataset into a directory as `posts.jsonl`, `videos.jsonl`,
/// `channels.csv`. Returns the three paths.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<[std::path::PathBuf; 3]> {
    std::fs::create_dir_all(dir)?;
    let posts = dir.join("posts.jsonl");
    let videos = dir.join("videos.jsonl");
    let channels = dir.join("channels.csv");
    write_posts(&posts, &ds.posts)?;
    write_videos(&videos, ds.videos.values())?;
    write_channels(&channels, ds.channels.values())?;
    Ok([posts, videos, channels])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, content: &str) {
        std::fs::write(path, content).unwrap();
    }

    fn fixture_files(dir: &Path, posts: &str, videos: &str, channels: &str) -> [std::path::PathBuf; 3] {
        let p = dir.join("posts.jsonl");
        let v = dir.join("videos.jsonl");
        let c = dir.join("channels.csv");
        write(&p, posts);
        write(&v, videos);
        write(&c, channels);
        [p, v, c]
    }

    const VIDEOS: &str = r#"{"video_id":"v1","title":"t","channel_id":"c1","published_time":"2018-04-01T00:00:00Z","captions":null}"#;
    const CHANNELS: &str = "channel_id,name,factuality\nc1,Chan One,0\n";

    #[test]
    fn ingest_happy_path() {
        let dir = tempfile::tempdir().unwrap();
        let posts = concat!(
            r#"{"post_id":"p1","user_id":"u1","platform":"twitter","published_time":"2018-04-01T10:00:00Z","text":"hello","action_type":"post","video_id":"v1"}"#,
            "\n",
            r#"{"post_id":"p2","user_id":"u2","platform":"reddit","published_time":"2018-04-01T10:00:05+02:00","text":"","action_type":"reply","video_id":null}"#,
        );
        let [p, v, c] = fixture_files(dir.path(), posts, VIDEOS, CHANNELS);
        let outcome = ingest(&p, &v, &c, &IngestConfig::default()).unwrap();
        assert_eq!(outcome.dataset.posts.len(), 2);
        assert_eq!(outcome.dataset.videos.len(), 1);
        assert_eq!(outcome.dataset.channels.len(), 1);
        assert_eq!(outcome.quarantine.total(), 0);
        // offset timestamps normalize to UTC
        assert_eq!(
            outcome.dataset.posts[1].published_time,
            parse_time("2018-04-01T08:00:05Z").unwrap()
        );
    }

    #[test]
    fn empty_posts_file_is_fine() {
        let dir = tempfile::tempdir().unwrap();
        let [p, v, c] = fixture_files(dir.path(), "", VIDEOS, CHANNELS);
        let outcome = ingest(&p, &v, &c, &IngestConfig::default()).unwrap();
        assert_eq!(outcome.dataset.posts.len(), 0);
    }

    #[test]
    fn dangling_video_strict_errors() {
        let dir = tempfile::tempdir().unwrap();
        let posts = r#"{"post_id":"p1","user_id":"u1","platform":"twitter","published_time":"2018-04-01T10:00:00Z","text":"x","action_type":"post","video_id":"missing"}"#;
        let [p, v, c] = fixture_files(dir.path(), posts, VIDEOS, CHANNELS);
        let err = ingest(
            &p,
            &v,
            &c,
            &IngestConfig {
                strict: true,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::DanglingReference { .. }), "{err}");
    }

    #[test]
    fn dangling_video_quarantined_by_default() {
        let dir = tempfile::tempdir().unwrap();
        let posts = r#"{"post_id":"p1","user_id":"u1","platform":"twitter","published_time":"2018-04-01T10:00:00Z","text":"x","action_type":"post","video_id":"missing"}"#;
        let [p, v, c] = fixture_files(dir.path(), posts, VIDEOS, CHANNELS);
        let outcome = ingest(&p, &v, &c, &IngestConfig::default()).unwrap();
        assert_eq!(outcome.dataset.posts.len(), 0);
        assert_eq!(outcome.quarantine.dangling_video, 1);
    }

    #[test]
    fn bad_timestamp_quarantined() {
        let dir = tempfile::tempdir().unwrap();
        let posts = r#"{"post_id":"p1","user_id":"u1","platform":"twitter","published_time":"yesterday","text":"x","action_type":"post","video_id":null}"#;
        let [p, v, c] = fixture_files(dir.path(), posts, VIDEOS, CHANNELS);
        let outcome = ingest(&p, &v, &c, &IngestConfig::default()).unwrap();
        assert_eq!(outcome.dataset.posts.len(), 0);
        assert_eq!(outcome.quarantine.bad_timestamp, 1);
    }

    #[test]
    fn duplicate_post_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let line = r#"{"post_id":"p1","user_id":"u1","platform":"twitter","published_time":"2018-04-01T10:00:00Z","text":"x","action_type":"post","video_id":null}"#;
        let posts = format!("{line}\n{line}");
        let [p, v, c] = fixture_files(dir.path(), &posts, VIDEOS, CHANNELS);
        let err = ingest(&p, &v, &c, &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 2, .. }), "{err}");
    }

    #[test]
    fn collection_window_quarantines_outsiders() {
        let dir = tempfile::tempdir().unwrap();
        let posts = concat!(
            r#"{"post_id":"in","user_id":"u","platform":"twitter","published_time":"2018-06-01T00:00:00Z","text":"","action_type":"post","video_id":null}"#,
            "\n",
            r#"{"post_id":"out","user_id":"u","platform":"twitter","published_time":"2020-01-01T00:00:00Z","text":"","action_type":"post","video_id":null}"#,
        );
        let [p, v, c] = fixture_files(dir.path(), posts, VIDEOS, CHANNELS);
        let window = (
            parse_time("2018-04-01T00:00:00Z").unwrap(),
            parse_time("2019-04-30T23:59:59Z").unwrap(),
        );
        let outcome = ingest(
            &p,
            &v,
            &c,
            &IngestConfig {
                window: Some(window),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(outcome.dataset.posts.len(), 1);
        assert_eq!(outcome.dataset.posts[0].post_id, "in");
        assert_eq!(outcome.quarantine.outside_window, 1);
    }

    #[test]
    fn action_filter_keeps_only_requested_kind() {
        let dir = tempfile::tempdir().unwrap();
        let posts = concat!(
            r#"{"post_id":"a","user_id":"u","platform":"twitter","published_time":"2018-06-01T00:00:00Z","text":"","action_type":"post","video_id":null}"#,
            "\n",
            r#"{"post_id":"b","user_id":"u","platform":"twitter","published_time":"2018-06-01T00:00:01Z","text":"","action_type":"reply","video_id":null}"#,
        );
        let [p, v, c] = fixture_files(dir.path(), posts, VIDEOS, CHANNELS);
        let outcome = ingest(
            &p,
            &v,
            &c,
            &IngestConfig {
                action_filter: Some(ActionType::Post),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(outcome.dataset.posts.len(), 1);
        assert_eq!(outcome.quarantine.filtered_action, 1);
    }

    #[test]
    fn roundtrip_is_identity_on_records() {
        let dir = tempfile::tempdir().unwrap();
        let posts = concat!(
            r#"{"post_id":"p1","user_id":"u1","platform":"twitter","published_time":"2018-04-01T10:00:00Z","text":"hello #wh","action_type":"post","video_id":"v1"}"#,
            "\n",
            r#"{"post_id":"p2","user_id":"u2","platform":"somewhere","published_time":"2018-04-02T10:00:00Z","text":"b","action_type":"reply","video_id":null}"#,
        );
        let channels = "channel_id,name,factuality\nc1,\"Chan, One\",4\nc2,Plain,\n";
        let videos = concat!(
            r#"{"video_id":"v1","title":"T, with comma","channel_id":"c1","published_time":null,"captions":"hi"}"#,
            "\n",
            r#"{"video_id":"v2","title":"x","channel_id":"c2","published_time":"2017-01-01T00:00:00Z","captions":null}"#,
        );
        let [p, v, c] = fixture_files(dir.path(), posts, videos, channels);
        let first = ingest(&p, &v, &c, &IngestConfig::default()).unwrap().dataset;

        let out = dir.path().join("round");
        let [p2, v2, c2] = write_dataset(&out, &first).unwrap();
        let second = ingest(&p2, &v2, &c2, &IngestConfig::default()).unwrap().dataset;

        assert_eq!(first.posts, second.posts);
        assert_eq!(first.videos, second.videos);
        assert_eq!(first.channels, second.channels);
    }
}
