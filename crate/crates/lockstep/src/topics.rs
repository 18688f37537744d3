//! Topic representations for semantic clusters: class-based TF-IDF term
//! ranking, then greedy diversity re-ranking over term vectors.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::data::Dataset;
use crate::embed::{cosine, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::text::tokenize;

/// One weighted topic term.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TopicTerm {
    pub term: String,
    pub weight: f64,
}

/// Ranked class-specific terms per cluster, plus the frequency tables the
/// weights were computed from (so a report can be re-derived exactly).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicModel {
    /// cluster label -> terms sorted by descending weight.
    pub clusters: BTreeMap<i32, Vec<TopicTerm>>,
    /// term -> total count over all class documents.
    pub corpus_frequency: BTreeMap<String, u64>,
    /// cluster label -> term -> count within the class document.
    pub class_frequency: BTreeMap<i32, BTreeMap<String, u64>>,
    /// average token count per class.
    pub avg_words_per_class: f64,
}

/// Weight of a term in a class: `tf(t,c) * ln(1 + A / f(t))` where `tf` is
/// the term count in the class's concatenated documents, `f` the term's
/// count over all classes, and `A` the average words per class.
pub fn ctfidf_weight(tf: u64, corpus_freq: u64, avg_words: f64) -> f64 {
    tf as f64 * (1.0 + avg_words / corpus_freq as f64).ln()
}

/// Rank class-specific terms for every non-noise cluster.
pub fn ctfidf(assignment: &ClusterAssignment, ds: &Dataset, top_n: usize) -> Result<TopicModel> {
    let text_of: std::collections::HashMap<&str, &str> = ds
        .posts
        .iter()
        .map(|p| (p.post_id.as_str(), p.text.as_str()))
        .collect();

    let mut class_frequency: BTreeMap<i32, BTreeMap<String, u64>> = BTreeMap::new();
    let mut corpus_frequency: BTreeMap<String, u64> = BTreeMap::new();
    let mut class_tokens: BTreeMap<i32, u64> = BTreeMap::new();

    for (label, rows) in assignment.members() {
        let class = class_frequency.entry(label).or_default();
        let tokens = class_tokens.entry(label).or_insert(0);
        for &row in &rows {
            let text = text_of
                .get(assignment.ids()[row].as_str())
                .copied()
                .unwrap_or("");
            for token in tokenize(text) {
                *class.entry(token.clone()).or_insert(0) += 1;
                *corpus_frequency.entry(token).or_insert(0) += 1;
                *tokens += 1;
            }
        }
    }
    if class_frequency.is_empty() {
        return Err(Error::NoQualifyingClusters);
    }
    if corpus_frequency.is_empty() {
        return Err(Error::EmptyVocabulary);
    }

    let avg_words_per_class =
        class_tokens.values().sum::<u64>() as f64 / class_tokens.len() as f64;

    let mut clusters = BTreeMap::new();
    for (&label, class) in &class_frequency {
        let mut terms: Vec<TopicTerm> = class
            .iter()
            .map(|(term, &tf)| TopicTerm {
                term: term.clone(),
                weight: ctfidf_weight(tf, corpus_frequency[term], avg_words_per_class),
            })
            .collect();
        terms.sort_by(|a, b| {
            b.weight
                .partial_cmp(&a.weight)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.term.cmp(&b.term))
        });
        terms.truncate(top_n);
        clusters.insert(label, terms);
    }

    Ok(TopicModel {
        clusters,
        corpus_frequency,
        class_frequency,
        avg_words_per_class,
    })
}

/// Greedy maximal-marginal-relevance re-ranking.
///
/// The first pick is the most relevant candidate; each further pick
/// maximizes `lambda * relevance - (1 - lambda) * max cosine similarity to
/// the already-selected terms`. Relevance is the c-TF-IDF weight scaled
/// into [0, 1]. Candidates without a term vector keep a zero vector (they
/// never look similar to anything).
pub fn mmr_rerank(
    candidates: &[TopicTerm],
    term_vectors: &EmbeddingMatrix,
    lambda: f64,
    top_n: usize,
) -> Vec<TopicTerm> {
    if candidates.is_empty() || top_n == 0 {
        return Vec::new();
    }
    let zero = vec![0.0; term_vectors.dim()];
    let vector_of = |term: &str| -> &[f64] {
        term_vectors.row_by_id(term).unwrap_or(&zero)
    };
    let max_weight = candidates
        .iter()
        .map(|t| t.weight)
        .fold(f64::MIN, f64::max)
        .max(1e-12);

    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut selected: Vec<usize> = Vec::with_capacity(top_n.min(candidates.len()));

    while selected.len() < top_n && !remaining.is_empty() {
        let mut best_pos = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (pos, &idx) in remaining.iter().enumerate() {
            let relevance = candidates[idx].weight / max_weight;
            let score = if selected.is_empty() {
                relevance
            } else {
                let max_sim = selected
                    .iter()
                    .map(|&s| cosine(vector_of(&candidates[idx].term), vector_of(&candidates[s].term)))
                    .fold(f64::MIN, f64::max);
                lambda * relevance - (1.0 - lambda) * max_sim
            };
            if score > best_score {
                best_score = score;
                best_pos = pos;
            }
        }
        selected.push(remaining.remove(best_pos));
    }
    selected.into_iter().map(|i| candidates[i].clone()).collect()
}

/// Persist topics as JSON: `{ "<label>": [{term, weight}, ...], ... }`.
pub fn write_topics(path: &Path, model: &TopicModel) -> Result<()> {
    let view: BTreeMap<String, &Vec<TopicTerm>> = model
        .clusters
        .iter()
        .map(|(label, terms)| (label.to_string(), terms))
        .collect();
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &view)?;
    Ok(())
}
