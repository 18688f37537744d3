//! Multipartite user-post-video-channel network.
//!
//! Edges connect users to their posts, posts to the video they link, and
//! videos to their hosting channel. The graph is undirected and unweighted;
//! it carries interaction structure only, no text or time.

mod walks;

pub use walks::{
    metapath_walks, node2vec_walks, node2vec_walks_threaded, read_walk_corpus, write_walk_corpus,
    MetaPathSet, WalkConfig, WalkCorpus,
};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// The four node kinds of the multipartite network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    User,
    Post,
    Video,
    Channel,
}

impl NodeType {
    /// Single-letter prefix used in persisted walk corpora and node names.
    pub fn prefix(self) -> char {
        match self {
            NodeType::User => 'u',
            NodeType::Post => 'p',
            NodeType::Video => 'v',
            NodeType::Channel => 'c',
        }
    }

    /// Edges exist only between these pairs (in either direction).
    pub fn permits_edge(a: NodeType, b: NodeType) -> bool {
        matches!(
            (a, b),
            (NodeType::User, NodeType::Post)
                | (NodeType::Post, NodeType::User)
                | (NodeType::Post, NodeType::Video)
                | (NodeType::Video, NodeType::Post)
                | (NodeType::Video, NodeType::Channel)
                | (NodeType::Channel, NodeType::Video)
        )
    }
}

/// Undirected multipartite graph with typed nodes and sorted adjacency lists.
///
/// Node indices are assigned deterministically: users (sorted by id), then
/// posts (dataset order), then videos and channels (sorted by id).
#[derive(Debug, Clone)]
pub struct HeteroGraph {
    names: Vec<String>,
    types: Vec<NodeType>,
    adjacency: Vec<Vec<u32>>,
    index: HashMap<String, u32>,
}

impl HeteroGraph {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Prefixed name (`u:`, `p:`, `v:`, `c:`) of a node.
    pub fn name(&self, node: u32) -> &str {
        &self.names[node as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_type(&self, node: u32) -> NodeType {
        self.types[node as usize]
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.adjacency[a as usize].binary_search(&b).is_ok()
    }

    /// Node index for a prefixed name.
    pub fn lookup(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    /// Indices of all nodes of one type, ascending.
    pub fn nodes_of(&self, ty: NodeType) -> Vec<u32> {
        (0..self.node_count() as u32)
            .filter(|&n| self.types[n as usize] == ty)
            .collect()
    }

    pub fn count_of(&self, ty: NodeType) -> usize {
        self.types.iter().filter(|&&t| t == ty).count()
    }

    fn add_edge(&mut self, a: u32, b: u32) {
        debug_assert!(NodeType::permits_edge(
            self.types[a as usize],
            self.types[b as usize]
        ));
        self.adjacency[a as usize].push(b);
        self.adjacency[b as usize].push(a);
    }
}

fn prefixed(ty: NodeType, id: &str) -> String {
    format!("{}:{}", ty.prefix(), id)
}

/// Build the multipartite graph from a referentially closed dataset.
pub fn build_graph(ds: &Dataset) -> HeteroGraph {
    let mut users: Vec<&str> = ds.posts.iter().map(|p| p.user_id.as_str()).collect();
    users.sort_unstable();
    users.dedup();

    let mut names = Vec::new();
    let mut types = Vec::new();
    let push = |names: &mut Vec<String>, types: &mut Vec<NodeType>, ty: NodeType, id: &str| {
        names.push(prefixed(ty, id));
        types.push(ty);
    };
    for user in &users {
        push(&mut names, &mut types, NodeType::User, user);
    }
    for post in &ds.posts {
        push(&mut names, &mut types, NodeType::Post, &post.post_id);
    }
    for video_id in ds.videos.keys() {
        push(&mut names, &mut types, NodeType::Video, video_id);
    }
    for channel_id in ds.channels.keys() {
        push(&mut names, &mut types, NodeType::Channel, channel_id);
    }

    let index: HashMap<String, u32> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i as u32))
        .collect();
    let mut graph = HeteroGraph {
        adjacency: vec![Vec::new(); names.len()],
        names,
        types,
        index,
    };

    for post in &ds.posts {
        let post_node = graph.index[&prefixed(NodeType::Post, &post.post_id)];
        let user_node = graph.index[&prefixed(NodeType::User, &post.user_id)];
        graph.add_edge(user_node, post_node);
        if let Some(video_id) = &post.video_id {
            let video_node = graph.index[&prefixed(NodeType::Video, video_id)];
            graph.add_edge(post_node, video_node);
        }
    }
    for video in ds.videos.values() {
        let video_node = graph.index[&prefixed(NodeType::Video, &video.video_id)];
        let channel_node = graph.index[&prefixed(NodeType::Channel, &video.channel_id)];
        graph.add_edge(video_node, channel_node);
    }

    for adj in &mut graph.adjacency {
        adj.sort_unstable();
        adj.dedup();
    }
    graph
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::data::{ActionType, ChannelRecord, Dataset, Platform, PostRecord, VideoRecord};

    /// 2 users, 3 posts (2 by A, 1 by B), all linking video V on channel C.
    pub fn seven_node_dataset() -> Dataset {
        let mut ds = Dataset::default();
        let mk_post = |id: &str, user: &str| PostRecord {
            post_id: id.into(),
            user_id: user.into(),
            platform: Platform::Twitter,
            published_time: 0,
            text: String::new(),
            action_type: ActionType::Post,
            video_id: Some("V".into()),
        };
        ds.posts.push(mk_post("p1", "A"));
        ds.posts.push(mk_post("p2", "A"));
        ds.posts.push(mk_post("p3", "B"));
        ds.videos.insert(
            "V".into(),
            VideoRecord {
                video_id: "V".into(),
                title: String::new(),
                channel_id: "C".into(),
                published_time: None,
                captions: None,
            },
        );
        ds.channels.insert(
            "C".into(),
            ChannelRecord {
                channel_id: "C".into(),
                name: "C".into(),
                factuality: Some(0),
            },
        );
        ds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    #[test]
    fn seven_node_fixture_has_expected_edges() {
        let ds = fixtures::seven_node_dataset();
        let g = build_graph(&ds);
        assert_eq!(g.node_count(), 7);

        let n = |name: &str| g.lookup(name).unwrap();
        let expected = [
            ("u:A", "p:p1"),
            ("u:A", "p:p2"),
            ("u:B", "p:p3"),
            ("p:p1", "v:V"),
            ("p:p2", "v:V"),
            ("p:p3", "v:V"),
            ("v:V", "c:C"),
        ];
        let mut edge_count = 0;
        for adj in 0..g.node_count() as u32 {
            edge_count += g.neighbors(adj).len();
        }
        assert_eq!(edge_count, expected.len() * 2);
        for (a, b) in expected {
            assert!(g.has_edge(n(a), n(b)), "missing edge {a}-{b}");
            assert!(g.has_edge(n(b), n(a)));
        }
    }

    #[test]
    fn empty_dataset_empty_graph() {
        let g = build_graph(&Dataset::default());
        assert!(g.is_empty());
    }

    #[test]
    fn post_without_video_is_leaf_of_its_user() {
        let mut ds = fixtures::seven_node_dataset();
        ds.posts[2].video_id = None;
        let g = build_graph(&ds);
        let p3 = g.lookup("p:p3").unwrap();
        assert_eq!(g.neighbors(p3).len(), 1);
        assert_eq!(g.node_type(g.neighbors(p3)[0]), NodeType::User);
    }

    #[test]
    fn node_counts_by_type() {
        let ds = fixtures::seven_node_dataset();
        let g = build_graph(&ds);
        assert_eq!(g.count_of(NodeType::User), 2);
        assert_eq!(g.count_of(NodeType::Post), 3);
        assert_eq!(g.count_of(NodeType::Video), 1);
        assert_eq!(g.count_of(NodeType::Channel), 1);
    }
}
