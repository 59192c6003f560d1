//! Bilingual supervision pairs.
//!
//! File format: UTF-8, one `<source>\t<target>` pair per line. Blank lines
//! and lines starting with `#` are ignored.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::{validate_token, EmbeddingSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pair {
    pub source: String,
    pub target: String,
}

impl Pair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Pair {
            source: source.into(),
            target: target.into(),
        }
    }
}

/// Ordered translation pairs. The same source may appear with several
/// targets; an identical pair may not appear twice.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BilingualLexicon {
    pairs: Vec<Pair>,
}

impl BilingualLexicon {
    pub fn new(pairs: Vec<Pair>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for pair in &pairs {
            validate_token(&pair.source)?;
            validate_token(&pair.target)?;
            if !seen.insert(pair) {
                return Err(Error::DuplicatePair(pair.source.clone(), pair.target.clone()));
            }
        }
        Ok(BilingualLexicon { pairs })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.target.as_str())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (source, target) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(line_no, "expected \"<source>\\t<target>\""))?;
            let pair = Pair::new(source.trim(), target.trim());
            if validate_token(&pair.source).is_err() || validate_token(&pair.target).is_err() {
                return Err(Error::format(line_no, format!("invalid pair {line:?}")));
            }
            if !seen.insert(pair.clone()) {
                return Err(Error::format(
                    line_no,
                    format!("duplicate pair ({}, {})", pair.source, pair.target),
                ));
            }
            pairs.push(pair);
        }
        Ok(BilingualLexicon { pairs })
    }

    /// Deterministic shuffle by `seed`; the first `round(fraction * len)`
    /// shuffled pairs train, the rest test. Both sides always get at least
    /// one pair.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(BilingualLexicon, BilingualLexicon)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction {train_fraction} outside (0, 1)"
            )));
        }
        let m = self.len();
        if m < 2 {
            return Err(Error::InsufficientData(format!("cannot split {m} pairs")));
        }
        let n_train = ((train_fraction * m as f64).round() as usize).clamp(1, m - 1);
        let mut shuffled = self.pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let test = shuffled.split_off(n_train);
        Ok((BilingualLexicon { pairs: shuffled }, BilingualLexicon { pairs: test }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedPair {
    pub pair: Pair,
    pub missing: Side,
}

/// Keeps pairs with both tokens in vocabulary and reports the rest.
pub fn filter_by_vocab(
    lex: &BilingualLexicon,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
) -> (BilingualLexicon, Vec<DroppedPair>) {
    let mut kept = Vec::with_capacity(lex.len());
    let mut dropped = Vec::new();
    for pair in &lex.pairs {
        let missing = match (src.vocab().contains(&pair.source), tgt.vocab().contains(&pair.target)) {
            (true, true) => {
                kept.push(pair.clone());
                continue;
            }
            (false, true) => Side::Source,
            (true, false) => Side::Target,
            (false, false) => Side::Both,
        };
        dropped.push(DroppedPair {
            pair: pair.clone(),
            missing,
        });
    }
    (BilingualLexicon { pairs: kept }, dropped)
}

/// Source vectors `x` and target vectors `y`; row `i` of both comes from
/// `pairs[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedMatrices {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub pairs: Vec<Pair>,
}

impl PairedMatrices {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Every pair must be in vocabulary; run [`filter_by_vocab`] first.
pub fn to_matrices(lex: &BilingualLexicon, src: &EmbeddingSpace, tgt: &EmbeddingSpace) -> Result<PairedMatrices> {
    let m = lex.len();
    let mut x = Array2::zeros((m, src.dim()));
    let mut y = Array2::zeros((m, tgt.dim()));
    for (i, pair) in lex.pairs.iter().enumerate() {
        x.row_mut(i).assign(&src.lookup(&pair.source)?);
        y.row_mut(i).assign(&tgt.lookup(&pair.target)?);
    }
    Ok(PairedMatrices {
        x,
        y,
        pairs: lex.pairs.clone(),
    })
}
