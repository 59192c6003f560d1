//! Continuous bag-of-words word2vec with negative sampling.
//!
//! Small and single-threaded: one line of the corpus is one sentence, the
//! context of each position is every word within `window` on either side
//! (truncated at the line ends), and its mean predicts the center word
//! against `negatives` noise words drawn from the unigram^0.75 table.

use std::cmp::Reverse;
use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{EmbeddingSpace, Vocabulary};
use crate::{Error, Result};

/// Noise distribution exponent.
pub const NEGATIVE_SAMPLING_EXPONENT: f64 = 0.75;

const PUNCTUATION: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', '(', ')', '[', ']', '¿', '¡'];

/// Lowercases, splits on Unicode whitespace and strips leading/trailing
/// punctuation from each token. Tokens that end up empty are dropped.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace()
        .map(|raw| raw.trim_matches(PUNCTUATION).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabCounts {
    pub vocab: Vocabulary,
    /// Occurrence count of `vocab.token(i)`.
    pub counts: Vec<u64>,
}

/// Counts tokens over `lines` and keeps those seen at least `min_count`
/// times, most frequent first, ties in lexicographic order.
pub fn build_vocab<I, S>(lines: I, min_count: u64) -> Result<VocabCounts>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for line in lines {
        for token in tokenize(line.as_ref()) {
            *counts.entry(token).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    kept.sort_by(|(ta, ca), (tb, cb)| Reverse(ca).cmp(&Reverse(cb)).then_with(|| ta.cmp(tb)));
    let (tokens, counts): (Vec<_>, Vec<_>) = kept.into_iter().unzip();
    Ok(VocabCounts {
        vocab: Vocabulary::new(tokens)?,
        counts,
    })
}

/// Cumulative `count^alpha` weights for drawing noise words.
#[derive(Debug, Clone)]
pub struct UnigramTable {
    /// Strictly increasing; `cumulative[j]` closes the interval of `ids[j]`.
    cumulative: Vec<f64>,
    ids: Vec<usize>,
}

impl UnigramTable {
    pub fn new(counts: &[u64], alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!("sampling exponent {alpha}")));
        }
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut ids = Vec::with_capacity(counts.len());
        let mut total = 0.0;
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                total += (c as f64).powf(alpha);
                cumulative.push(total);
                ids.push(i);
            }
        }
        if ids.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(UnigramTable { cumulative, ids })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("table is non-empty");
        let u = rng.random::<f64>() * total;
        let j = self.cumulative.partition_point(|&c| c <= u);
        self.ids[j.min(self.ids.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.05,
            min_count: 1,
            seed: 1,
        }
    }
}

impl CbowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{what} must be >= 1")));
        if self.dim == 0 {
            return bad("dim");
        }
        if self.window == 0 {
            return bad("window");
        }
        if self.negatives == 0 {
            return bad("negatives");
        }
        if self.epochs == 0 {
            return bad("epochs");
        }
        if self.min_count == 0 {
            return bad("min_count");
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return Err(Error::InvalidConfig("initial_lr must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedEmbeddings {
    /// Input-side vectors.
    pub space: EmbeddingSpace,
    pub counts: Vec<u64>,
    /// Mean negative-sampling loss per training position, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn train_cbow<I, S>(lines: I, config: &CbowConfig) -> Result<TrainedEmbeddings>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    config.validate()?;
    let lines: Vec<S> = lines.into_iter().collect();
    let VocabCounts { vocab, counts } = build_vocab(lines.iter().map(AsRef::as_ref), config.min_count)?;
    let sentences: Vec<Vec<usize>> = lines
        .iter()
        .map(|l| tokenize(l.as_ref()).iter().filter_map(|t| vocab.index_of(t)).collect())
        .collect();
    let table = UnigramTable::new(&counts, NEGATIVE_SAMPLING_EXPONENT)?;

    let mut trainer = Trainer::new(vocab.len(), config);
    let positions_per_epoch: usize = sentences.iter().filter(|s| s.len() > 1).map(Vec::len).sum();
    let total = (positions_per_epoch * config.epochs).max(1) as f64;

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut done = 0usize;
    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut positions = 0usize;
        for sentence in &sentences {
            for center in 0..sentence.len() {
                let lo = center.saturating_sub(config.window);
                let hi = (center + config.window + 1).min(sentence.len());
                let context: Vec<usize> = (lo..hi).filter(|&j| j != center).map(|j| sentence[j]).collect();
                if context.is_empty() {
                    continue;
                }
                let lr = config.initial_lr * (1.0 - 0.9 * done as f64 / total);
                loss_sum += trainer.step(sentence[center], &context, &table, lr);
                positions += 1;
                done += 1;
            }
        }
        epoch_losses.push(if positions == 0 {
            0.0
        } else {
            loss_sum / positions as f64
        });
    }

    let matrix =
        Array2::from_shape_vec((vocab.len(), config.dim), trainer.input).expect("input matrix has n*dim entries");
    Ok(TrainedEmbeddings {
        space: EmbeddingSpace::new(vocab, matrix)?,
        counts,
        epoch_losses,
    })
}

struct Trainer {
    dim: usize,
    negatives: usize,
    input: Vec<f64>,
    output: Vec<f64>,
    hidden: Vec<f64>,
    hidden_grad: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Trainer {
    fn new(n: usize, config: &CbowConfig) -> Self {
        let dim = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 0.5 / dim as f64;
        let input = (0..n * dim).map(|_| rng.random_range(-bound..=bound)).collect();
        Trainer {
            dim,
            negatives: config.negatives,
            input,
            output: vec![0.0; n * dim],
            hidden: vec![0.0; dim],
            hidden_grad: vec![0.0; dim],
            rng,
        }
    }

    /// One SGD step on the negative-sampling loss for `center`; returns the
    /// loss before the update.
    fn step(&mut self, center: usize, context: &[usize], table: &UnigramTable, lr: f64) -> f64 {
        let dim = self.dim;
        let scale = 1.0 / context.len() as f64;
        self.hidden.fill(0.0);
        for &c in context {
            for (h, v) in self.hidden.iter_mut().zip(&self.input[c * dim..(c + 1) * dim]) {
                *h += v;
            }
        }
        self.hidden.iter_mut().for_each(|h| *h *= scale);
        self.hidden_grad.fill(0.0);

        let mut loss = 0.0;
        for d in 0..=self.negatives {
            let (target, label) = if d == 0 {
                (center, 1.0)
            } else {
                let t = table.sample(&mut self.rng);
                if t == center {
                    continue;
                }
                (t, 0.0)
            };
            let out = &mut self.output[target * dim..(target + 1) * dim];
            let score: f64 = self.hidden.iter().zip(out.iter()).map(|(h, o)| h * o).sum();
            loss -= if label == 1.0 {
                log_sigmoid(score)
            } else {
                log_sigmoid(-score)
            };
            let g = (label - sigmoid(score)) * lr;
            for ((acc, o), h) in self.hidden_grad.iter_mut().zip(out.iter_mut()).zip(&self.hidden) {
                *acc += g * *o;
                *o += g * h;
            }
        }
        // d(mean)/d(context vector) = 1 / |context|
        for &c in context {
            for (v, g) in self.input[c * dim..(c + 1) * dim].iter_mut().zip(&self.hidden_grad) {
                *v += g * scale;
            }
        }
        loss
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}
