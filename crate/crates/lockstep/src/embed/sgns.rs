//! Skip-gram training with negative sampling, shared by the node-embedding
//! route (windowed skip-gram over walk corpora) and the document route
//! (PV-DBOW: a document id predicts each of its words).
//!
//! Two execution modes: single-threaded (bitwise deterministic under a
//! fixed seed) and multi-threaded with unsynchronized concurrent weight
//! updates (results vary run to run).

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::WalkCorpus;
use crate::text::tokenize;

use super::EmbeddingMatrix;

/// Hyperparameters for skip-gram training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// 1 = deterministic mode; >1 = concurrent unsynchronized updates.
    pub threads: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 42,
            threads: 1,
        }
    }
}

impl SgnsConfig {
    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config("sgns dim must be >= 2".into()));
        }
        if self.window < 1 || self.negatives < 1 || self.epochs < 1 {
            return Err(Error::Config(
                "sgns window, negatives, epochs must be >= 1".into(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("sgns learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Sequences of token ids plus the vocabulary naming them.
#[derive(Debug, Clone)]
pub struct TokenCorpus {
    pub sequences: Vec<Vec<u32>>,
    pub vocab: Vec<String>,
}

impl From<&WalkCorpus> for TokenCorpus {
    fn from(corpus: &WalkCorpus) -> Self {
        TokenCorpus {
            sequences: corpus.walks.clone(),
            vocab: corpus.names.clone(),
        }
    }
}

/// Result of windowed skip-gram training: one vector per vocabulary token.
#[derive(Debug, Clone)]
pub struct SgnsModel {
    pub embeddings: EmbeddingMatrix,
    pub epoch_losses: Vec<f64>,
}

/// Result of PV-DBOW training: document vectors plus the word (output-side)
/// vectors, which downstream re-ranking uses as term vectors.
#[derive(Debug, Clone)]
pub struct PvDbowModel {
    pub docs: EmbeddingMatrix,
    pub words: EmbeddingMatrix,
    pub epoch_losses: Vec<f64>,
}

// ---- weight storage -------------------------------------------------------

/// Flat f64 storage that both the deterministic single-threaded path and the
/// hogwild path can write through.
trait Store {
    fn get(&self, i: usize) -> f64;
    fn set(&self, i: usize, v: f64);
    #[inline]
    fn add(&self, i: usize, d: f64) {
        self.set(i, self.get(i) + d);
    }
}

struct CellStore(Vec<Cell<f64>>);

impl CellStore {
    fn from_vec(v: Vec<f64>) -> Self {
        CellStore(v.into_iter().map(Cell::new).collect())
    }
    fn into_vec(self) -> Vec<f64> {
        self.0.into_iter().map(Cell::into_inner).collect()
    }
}

impl Store for CellStore {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self.0[i].get()
    }
    #[inline]
    fn set(&self, i: usize, v: f64) {
        self.0[i].set(v)
    }
}

struct AtomicStore(Vec<AtomicU64>);

impl AtomicStore {
    fn from_vec(v: Vec<f64>) -> Self {
        AtomicStore(v.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect())
    }
    fn into_vec(self) -> Vec<f64> {
        self.0
            .into_iter()
            .map(|x| f64::from_bits(x.into_inner()))
            .collect()
    }
}

impl Store for AtomicStore {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn set(&self, i: usize, v: f64) {
        self.0[i].store(v.to_bits(), Ordering::Relaxed)
    }
}

// ---- engine ----------------------------------------------------------------

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Engine<'a> {
    dim: usize,
    negatives: usize,
    lr0: f64,
    total_updates: u64,
    processed: &'a AtomicU64,
    negative_table: &'a [u32],
}

impl Engine<'_> {
    #[inline]
    fn learning_rate(&self) -> f64 {
        let done = self.processed.load(Ordering::Relaxed) as f64;
        let frac = 1.0 - done / self.total_updates.max(1) as f64;
        self.lr0 * frac.max(1e-4)
    }

    /// One positive pair plus `negatives` sampled negatives. Returns the
    /// summed log-loss of the pair's predictions.
    #[allow(clippy::needless_range_loop)] // indexed hot loops over Store
    fn update_pair<S: Store>(
        &self,
        input: &S,
        output: &S,
        center: usize,
        context: usize,
        rng: &mut ChaCha8Rng,
        grad: &mut [f64],
    ) -> f64 {
        let dim = self.dim;
        let lr = self.learning_rate();
        let in_off = center * dim;
        grad.fill(0.0);
        let mut loss = 0.0;

        let apply = |target: usize, label: f64, grad: &mut [f64]| {
            let out_off = target * dim;
            let mut score = 0.0;
            for k in 0..dim {
                score += input.get(in_off + k) * output.get(out_off + k);
            }
            let pred = sigmoid(score);
            let g = lr * (label - pred);
            for k in 0..dim {
                grad[k] += g * output.get(out_off + k);
                output.add(out_off + k, g * input.get(in_off + k));
            }
            if label > 0.5 {
                -pred.max(1e-10).ln()
            } else {
                -(1.0 - pred).max(1e-10).ln()
            }
        };

        loss += apply(context, 1.0, grad);
        for _ in 0..self.negatives {
            // redraw when the table hands back the positive target
            let mut sample = context;
            for _ in 0..16 {
                sample = self.negative_table[rng.random_range(0..self.negative_table.len())] as usize;
                if sample != context {
                    break;
                }
            }
            if sample == context {
                continue;
            }
            loss += apply(sample, 0.0, grad);
        }

        for k in 0..dim {
            input.add(in_off + k, grad[k]);
        }
        self.processed.fetch_add(1, Ordering::Relaxed);
        loss
    }
}

/// Unigram^0.75 sampling table over output-side token counts.
fn build_negative_table(counts: &[u64]) -> Vec<u32> {
    let table_len = 1usize << 18;
    let z: f64 = counts.iter().map(|&c| (c as f64).powf(0.75)).sum();
    let mut table = Vec::with_capacity(table_len);
    let mut cumulative = 0.0;
    for (idx, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        cumulative += (c as f64).powf(0.75) / z;
        let want = (cumulative * table_len as f64).round() as usize;
        while table.len() < want.min(table_len) {
            table.push(idx as u32);
        }
    }
    while table.len() < table_len {
        table.push((counts.len() - 1) as u32);
    }
    table
}

fn init_weights(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    (0..rows * dim).map(|_| rng.random_range(-half..half)).collect()
}

/// A unit of work: one center token and its positive contexts.
enum PairPlan<'a> {
    /// Windowed skip-gram over a sequence: center at each position, contexts
    /// within a per-position window sampled in `1..=window`.
    Windowed { sequence: &'a [u32], window: usize },
    /// PV-DBOW: a single center (document) predicts every token of the bag.
    DocBag { doc: u32, bag: &'a [u32] },
}

fn run_sequences<S: Store>(
    engine: &Engine<'_>,
    input: &S,
    output: &S,
    plans: &[PairPlan<'_>],
    seed: u64,
) -> (f64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad = vec![0.0; engine.dim];
    let mut loss = 0.0;
    let mut pairs = 0u64;
    for plan in plans {
        match plan {
            PairPlan::Windowed { sequence, window } => {
                for (i, &center) in sequence.iter().enumerate() {
                    let b = rng.random_range(1..=*window);
                    let lo = i.saturating_sub(b);
                    let hi = (i + b + 1).min(sequence.len());
                    for (j, &context) in sequence.iter().enumerate().take(hi).skip(lo) {
                        if j == i {
                            continue;
                        }
                        loss += engine.update_pair(
                            input,
                            output,
                            center as usize,
                            context as usize,
                            &mut rng,
                            &mut grad,
                        );
                        pairs += 1;
                    }
                }
            }
            PairPlan::DocBag { doc, bag } => {
                for &word in *bag {
                    loss += engine.update_pair(
                        input,
                        output,
                        *doc as usize,
                        word as usize,
                        &mut rng,
                        &mut grad,
                    );
                    pairs += 1;
                }
            }
        }
    }
    (loss, pairs)
}

struct TrainOutcome {
    input: Vec<f64>,
    output: Vec<f64>,
    epoch_losses: Vec<f64>,
}

/// Drive the engine over all epochs, serially or with hogwild threads.
fn train(
    n_inputs: usize,
    n_outputs: usize,
    plans: &[PairPlan<'_>],
    output_counts: &[u64],
    cfg: &SgnsConfig,
    updates_per_epoch: u64,
) -> TrainOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let input_init = init_weights(n_inputs, cfg.dim, &mut rng);
    let output_init = vec![0.0; n_outputs * cfg.dim];
    let negative_table = build_negative_table(output_counts);
    let processed = AtomicU64::new(0);
    let engine = Engine {
        dim: cfg.dim,
        negatives: cfg.negatives,
        lr0: cfg.learning_rate,
        total_updates: updates_per_epoch * cfg.epochs as u64,
        processed: &processed,
        negative_table: &negative_table,
    };
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    if cfg.threads <= 1 {
        let input = CellStore::from_vec(input_init);
        let output = CellStore::from_vec(output_init);
        for epoch in 0..cfg.epochs {
            let (loss, pairs) = run_sequences(
                &engine,
                &input,
                &output,
                plans,
                cfg.seed ^ (epoch as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            );
            epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
        }
        TrainOutcome {
            input: input.into_vec(),
            output: output.into_vec(),
            epoch_losses,
        }
    } else {
        let input = AtomicStore::from_vec(input_init);
        let output = AtomicStore::from_vec(output_init);
        let chunk = plans.len().div_ceil(cfg.threads);
        for epoch in 0..cfg.epochs {
            let mut totals = (0.0, 0u64);
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for (t, slice) in plans.chunks(chunk.max(1)).enumerate() {
                    let engine = &engine;
                    let input = &input;
                    let output = &output;
                    let seed = cfg.seed
                        ^ (epoch as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
                        ^ (t as u64 + 1).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
                    handles.push(
                        scope.spawn(move || run_sequences(engine, input, output, slice, seed)),
                    );
                }
                for handle in handles {
                    let (loss, pairs) = handle.join().expect("training thread panicked");
                    totals.0 += loss;
                    totals.1 += pairs;
                }
            });
            epoch_losses.push(if totals.1 == 0 {
                0.0
            } else {
                totals.0 / totals.1 as f64
            });
        }
        TrainOutcome {
            input: input.into_vec(),
            output: output.into_vec(),
            epoch_losses,
        }
    }
}

/// Windowed skip-gram with negative sampling over a token corpus. Returns
/// one (input-side) vector per vocabulary token.
pub fn train_sgns(corpus: &TokenCorpus, cfg: &SgnsConfig) -> Result<SgnsModel> {
    cfg.validate()?;
    if corpus.vocab.len() < 2 {
        return Err(Error::DegenerateVocabulary);
    }
    let v = corpus.vocab.len();
    let mut counts = vec![0u64; v];
    for seq in &corpus.sequences {
        for &tok in seq {
            counts[tok as usize] += 1;
        }
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateVocabulary);
    }

    let plans: Vec<PairPlan<'_>> = corpus
        .sequences
        .iter()
        .map(|sequence| PairPlan::Windowed {
            sequence,
            window: cfg.window,
        })
        .collect();
    // approximate pair budget for LR decay: every center sees ~window contexts
    let tokens: u64 = counts.iter().sum();
    let updates_per_epoch = tokens * cfg.window as u64;

    let outcome = train(v, v, &plans, &counts, cfg, updates_per_epoch);
    Ok(SgnsModel {
        embeddings: EmbeddingMatrix::new(corpus.vocab.clone(), cfg.dim, outcome.input)?,
        epoch_losses: outcome.epoch_losses,
    })
}

/// PV-DBOW document vectors: each post id predicts the tokens of its text.
/// Posts with empty text are assigned the zero vector and skipped in
/// training.
pub fn pv_dbow(ds: &Dataset, cfg: &SgnsConfig) -> Result<PvDbowModel> {
    cfg.validate()?;
    let mut word_index: std::collections::HashMap<String, u32> = std::collections::HashMap::new();
    let mut words: Vec<String> = Vec::new();
    let mut bags: Vec<Vec<u32>> = Vec::with_capacity(ds.posts.len());
    for post in &ds.posts {
        let bag = tokenize(&post.text)
            .into_iter()
            .map(|token| {
                *word_index.entry(token.clone()).or_insert_with(|| {
                    words.push(token);
                    (words.len() - 1) as u32
                })
            })
            .collect();
        bags.push(bag);
    }
    if words.len() < 2 {
        return Err(Error::DegenerateVocabulary);
    }

    let mut counts = vec![0u64; words.len()];
    for bag in &bags {
        for &w in bag {
            counts[w as usize] += 1;
        }
    }
    let plans: Vec<PairPlan<'_>> = bags
        .iter()
        .enumerate()
        .filter(|(_, bag)| !bag.is_empty())
        .map(|(doc, bag)| PairPlan::DocBag {
            doc: doc as u32,
            bag,
        })
        .collect();
    let updates_per_epoch: u64 = counts.iter().sum();

    let mut outcome = train(ds.posts.len(), words.len(), &plans, &counts, cfg, updates_per_epoch);

    // zero vectors for empty-text posts (their random init never trained)
    for (i, bag) in bags.iter().enumerate() {
        if bag.is_empty() {
            outcome.input[i * cfg.dim..(i + 1) * cfg.dim].fill(0.0);
        }
    }

    let post_ids: Vec<String> = ds.posts.iter().map(|p| p.post_id.clone()).collect();
    Ok(PvDbowModel {
        docs: EmbeddingMatrix::new(post_ids, cfg.dim, outcome.input)?,
        words: EmbeddingMatrix::new(words, cfg.dim, outcome.output)?,
        epoch_losses: outcome.epoch_losses,
    })
}
