//! Language-model distance and the metrics built on it.
//!
//! A predicted vector has no word of its own. It is judged by the target
//! model: `lmd(p̂, t, k)` holds when the truth word `t` is among the `k`
//! vocabulary words whose vectors are most cosine-similar to `p̂`.
//! `LMD_Accuracy(k)` is the fraction of predictions for which that holds,
//! so `k = 1` is exact-match precision.
//!
//! Neighborhoods are exact brute-force cosine rankings over unit rows. Ties
//! go to the lower vocabulary index, and no candidate is excluded.

use std::collections::BTreeMap;

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::embedding::EmbeddingSpace;
use crate::exec::Execution;
use crate::{Error, Result};

/// Rows must be unit length to within this before an index accepts them.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Read-only view of a row-normalized target space.
///
/// Holds only a shared reference, so one index can score predictions from
/// any number of threads or training loops.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    space: &'a EmbeddingSpace,
    zero_rows: Vec<usize>,
}

impl<'a> NeighborIndex<'a> {
    /// All-zero rows are kept out of every neighborhood.
    pub fn new(space: &'a EmbeddingSpace) -> Result<Self> {
        if let Some((row, norm)) = space.first_non_unit_row(UNIT_NORM_TOLERANCE) {
            return Err(Error::NotNormalized { row, norm });
        }
        let zero_rows = space
            .matrix()
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, r)| r.iter().all(|&v| v == 0.0))
            .map(|(i, _)| i)
            .collect();
        Ok(NeighborIndex { space, zero_rows })
    }

    pub fn space(&self) -> &'a EmbeddingSpace {
        self.space
    }

    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }

    pub fn candidate_count(&self) -> usize {
        self.space.len() - self.zero_rows.len()
    }

    fn is_candidate(&self, i: usize) -> bool {
        self.zero_rows.binary_search(&i).is_err()
    }

    /// Cosine of `query` against every vocabulary row, in vocabulary order.
    fn scores(&self, query: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if query.len() != self.space.dim() {
            return Err(Error::ShapeMismatch(format!(
                "query width {} but space has dimension {}",
                query.len(),
                self.space.dim()
            )));
        }
        if !query.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("query vector"));
        }
        let norm = query.dot(&query).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector("query"));
        }
        let unit = query.mapv(|v| v / norm);
        Ok(self.space.matrix().dot(&unit))
    }

    /// Position of `target` in the neighbor ordering of `query`, or `None`
    /// when `target` is not a candidate.
    fn rank_of(&self, scores: &Array1<f64>, target: usize) -> Option<usize> {
        if !self.is_candidate(target) {
            return None;
        }
        let s = scores[target];
        let ahead = scores
            .iter()
            .enumerate()
            .filter(|&(j, &sj)| (sj > s || (sj == s && j < target)) && self.is_candidate(j))
            .count();
        Some(ahead)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub score: f64,
}

/// Top-k neighbors by descending cosine, ties by ascending index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborSet {
    neighbors: Vec<Neighbor>,
}

impl NeighborSet {
    pub fn as_slice(&self) -> &[Neighbor] {
        &self.neighbors
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.neighbors.iter().any(|n| n.index == index)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.neighbors.iter().map(|n| n.index)
    }
}

fn neighbor_order(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then(a.index.cmp(&b.index))
}

/// The `min(k, candidates)` nearest vocabulary rows to `query`.
pub fn knn(index: &NeighborIndex<'_>, query: ArrayView1<'_, f64>, k: usize) -> Result<NeighborSet> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let scores = index.scores(query)?;
    let mut all: Vec<Neighbor> = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| index.is_candidate(i))
        .map(|(i, &score)| Neighbor { index: i, score })
        .collect();
    let k = k.min(all.len());
    if k < all.len() {
        all.select_nth_unstable_by(k, neighbor_order);
        all.truncate(k);
    }
    all.sort_by(neighbor_order);
    Ok(NeighborSet { neighbors: all })
}

/// Whether `truth` is in the `k`-neighborhood of `p_hat`.
pub fn lmd(index: &NeighborIndex<'_>, p_hat: ArrayView1<'_, f64>, truth: &str, k: usize) -> Result<bool> {
    let t = index
        .space
        .vocab()
        .index_of(truth)
        .ok_or_else(|| Error::OutOfVocabulary(truth.to_string()))?;
    Ok(knn(index, p_hat, k)?.contains(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accuracy {
    /// One fraction per requested k, same order.
    pub by_k: Vec<f64>,
    /// Rows whose prediction was the zero vector; scored as misses.
    pub degenerate: Vec<usize>,
}

/// `LMD_Accuracy(k)`: the fraction of rows whose truth token lies in the
/// `k`-neighborhood of the predicted row.
pub fn lmd_accuracy<S: AsRef<str> + Sync>(
    index: &NeighborIndex<'_>,
    predictions: ArrayView2<'_, f64>,
    truths: &[S],
    k: usize,
    exec: Execution,
) -> Result<f64> {
    Ok(lmd_accuracy_multi(index, predictions, truths, &[k], exec)?.by_k[0])
}

/// [`lmd_accuracy`] at several `k` from one ranking pass per row.
pub fn lmd_accuracy_multi<S: AsRef<str> + Sync>(
    index: &NeighborIndex<'_>,
    predictions: ArrayView2<'_, f64>,
    truths: &[S],
    ks: &[usize],
    exec: Execution,
) -> Result<Accuracy> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidConfig(format!("k list {ks:?}")));
    }
    let n = predictions.nrows();
    if n == 0 {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    if truths.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{n} predictions but {} truths",
            truths.len()
        )));
    }
    let targets = truths
        .iter()
        .map(|t| {
            let t = t.as_ref();
            index
                .space
                .vocab()
                .index_of(t)
                .ok_or_else(|| Error::OutOfVocabulary(t.to_string()))
        })
        .collect::<Result<Vec<usize>>>()?;

    // Ok(None): degenerate prediction; Ok(Some(None)): truth not a candidate.
    let ranks: Vec<Result<Option<Option<usize>>>> = exec.map_indexed(n, |i| match index.scores(predictions.row(i)) {
        Ok(scores) => Ok(Some(index.rank_of(&scores, targets[i]))),
        Err(Error::ZeroVector(_)) => Ok(None),
        Err(e) => Err(e),
    });

    let mut hits = vec![0usize; ks.len()];
    let mut degenerate = Vec::new();
    for (i, rank) in ranks.into_iter().enumerate() {
        match rank? {
            None => degenerate.push(i),
            Some(None) => {}
            Some(Some(r)) => {
                for (h, &k) in hits.iter_mut().zip(ks) {
                    if r < k {
                        *h += 1;
                    }
                }
            }
        }
    }
    Ok(Accuracy {
        by_k: hits.into_iter().map(|h| h as f64 / n as f64).collect(),
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanCosine {
    pub value: f64,
    /// Rows where either vector was zero; left out of the mean.
    pub skipped: Vec<usize>,
}

/// Mean over rows of `cos(prediction, truth)`, summed in row order.
pub fn mean_cosine(
    predictions: ArrayView2<'_, f64>,
    truths: ArrayView2<'_, f64>,
    exec: Execution,
) -> Result<MeanCosine> {
    if predictions.dim() != truths.dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?} vs truths {:?}",
            predictions.dim(),
            truths.dim()
        )));
    }
    let n = predictions.nrows();
    if n == 0 {
        return Err(Error::InsufficientData("no rows to compare".into()));
    }
    let cosines = exec.map_indexed(n, |i| {
        let (p, t) = (predictions.row(i), truths.row(i));
        let denom = norm_product(p.dot(&p), t.dot(&t));
        (denom != 0.0).then(|| p.dot(&t) / denom)
    });
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for (i, c) in cosines.into_iter().enumerate() {
        match c {
            Some(c) => {
                sum += c;
                used += 1;
            }
            None => skipped.push(i),
        }
    }
    if used == 0 {
        return Err(Error::ZeroVector("every prediction/truth row"));
    }
    Ok(MeanCosine {
        value: sum / used as f64,
        skipped,
    })
}

/// `sqrt(a)·sqrt(b)`, computed as `sqrt(a·b)` when that is representable so
/// that identical vectors have cosine exactly 1.
fn norm_product(a: f64, b: f64) -> f64 {
    let ab = a * b;
    if ab.is_finite() && (ab != 0.0 || a == 0.0 || b == 0.0) {
        ab.sqrt()
    } else {
        a.sqrt() * b.sqrt()
    }
}

/// OLS slope over each run of `window` consecutive points.
pub fn rolling_ols_slope(series: &[(f64, f64)], window: usize) -> Result<Vec<f64>> {
    if window < 2 {
        return Err(Error::InvalidConfig(format!("window {window} < 2")));
    }
    if series.len() < window {
        return Err(Error::InsufficientData(format!(
            "window {window} longer than series of {}",
            series.len()
        )));
    }
    if series
        .windows(2)
        .any(|w| w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::InvalidConfig("x values must be strictly increasing".into()));
    }
    Ok(series
        .windows(window)
        .map(|w| {
            let n = w.len() as f64;
            let mx = w.iter().map(|p| p.0).sum::<f64>() / n;
            let my = w.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = w.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = w.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            sxy / sxx
        })
        .collect())
}

/// Metrics for one epoch of a mapping experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub mean_cosine: f64,
    /// `LMD_Accuracy(k)` keyed by k.
    pub lmd_acc: BTreeMap<usize, f64>,
}
