//! A small network mapping source vectors onto target vectors.
//!
//! Either a single bias-free linear layer `y = xW` or one tanh hidden layer
//! `y = tanh(xW1)W2`. It is trained with plain minibatch SGD on the cosine
//! loss `1 − cos(ŷ, y)`, with gradients derived by hand.
//!
//! Checkpoints use the word2vec row layout: one `<rows> <cols>` header line
//! per weight matrix, then every row as `<name>.<row> <v1> ... <vcols>`,
//! where `name` is `w` for a linear mapper and `w1`/`w2` otherwise.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::format;
use crate::lexicon::PairedMatrices;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MapperConfig {
    pub d_in: usize,
    pub d_out: usize,
    /// Hidden width; 0 means a single linear layer.
    pub hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl MapperConfig {
    pub fn new(d_in: usize, d_out: usize) -> Self {
        MapperConfig {
            d_in,
            d_out,
            hidden: 256,
            lr: 0.05,
            batch_size: 32,
            epochs: 200,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.d_out == 0 {
            return Err(Error::InvalidConfig(format!(
                "mapper dimensions {}x{}",
                self.d_in, self.d_out
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mapper {
    /// `[W]` or `[W1, W2]`.
    weights: Vec<Array2<f64>>,
}

impl Mapper {
    /// Weights uniform in `±1/√fan_in`, drawn from `config.seed`.
    pub fn new(config: &MapperConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let shapes = if config.hidden == 0 {
            vec![(config.d_in, config.d_out)]
        } else {
            vec![(config.d_in, config.hidden), (config.hidden, config.d_out)]
        };
        let weights = shapes
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..=bound))
            })
            .collect();
        Ok(Mapper { weights })
    }

    pub fn linear(w: Array2<f64>) -> Result<Self> {
        Self::from_weights(vec![w])
    }

    pub fn from_weights(weights: Vec<Array2<f64>>) -> Result<Self> {
        match weights.as_slice() {
            [w] if w.nrows() > 0 && w.ncols() > 0 => {}
            [w1, w2] if w1.nrows() > 0 && w1.ncols() > 0 && w1.ncols() == w2.nrows() && w2.ncols() > 0 => {}
            _ => {
                let shapes: Vec<_> = weights.iter().map(|w| w.dim()).collect();
                return Err(Error::ShapeMismatch(format!("mapper weight shapes {shapes:?}")));
            }
        }
        if !weights.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("mapper weights"));
        }
        Ok(Mapper { weights })
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn is_linear(&self) -> bool {
        self.weights.len() == 1
    }

    pub fn d_in(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn d_out(&self) -> usize {
        self.weights[self.weights.len() - 1].ncols()
    }

    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let batch = x.insert_axis(Axis(0));
        Ok(self.forward_batch(batch)?.index_axis_move(Axis(0), 0))
    }

    /// Maps every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(self.forward_cached(x).1)
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.d_in() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} but mapper expects {}",
                x.ncols(),
                self.d_in()
            )));
        }
        Ok(())
    }

    /// (hidden activations, outputs)
    fn forward_cached(&self, x: ArrayView2<'_, f64>) -> (Option<Array2<f64>>, Array2<f64>) {
        match self.weights.as_slice() {
            [w] => (None, x.dot(w)),
            [w1, w2] => {
                let h = x.dot(w1).mapv_into(f64::tanh);
                let y = h.dot(w2);
                (Some(h), y)
            }
            _ => unreachable!("validated in constructor"),
        }
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_text(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for m in &self.weights {
            writeln!(w, "{} {}", m.nrows(), m.ncols())?;
        }
        for (name, m) in self.matrix_names().into_iter().zip(&self.weights) {
            for (i, row) in m.rows().into_iter().enumerate() {
                write!(w, "{name}.{i}")?;
                for v in row {
                    write!(w, " {}", format::roundtrip(*v))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    fn matrix_names(&self) -> Vec<&'static str> {
        if self.is_linear() {
            vec!["w"]
        } else {
            vec!["w1", "w2"]
        }
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut shapes: Vec<(usize, usize)> = Vec::new();
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io("<reader>", e))?;
            let mut fields = line.split_whitespace();
            let Some(first) = fields.next() else { continue };
            if rows.is_empty() && first.parse::<usize>().is_ok() {
                let dims: Vec<usize> = std::iter::once(first)
                    .chain(fields)
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::format(line_no, "malformed shape line"))?;
                match dims.as_slice() {
                    [r, c] if *r > 0 && *c > 0 => shapes.push((*r, *c)),
                    _ => return Err(Error::format(line_no, "shape line must be \"<rows> <cols>\"")),
                }
                continue;
            }
            let values = fields
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::format(line_no, format!("invalid value {f:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push((line_no, values));
        }
        if shapes.is_empty() || shapes.len() > 2 {
            return Err(Error::format(
                1,
                format!("expected 1 or 2 shape lines, found {}", shapes.len()),
            ));
        }

        let mut rows = rows.into_iter();
        let mut weights = Vec::with_capacity(shapes.len());
        for (r, c) in shapes {
            let mut data = Vec::with_capacity(r * c);
            for _ in 0..r {
                let (line_no, values) = rows
                    .next()
                    .ok_or_else(|| Error::format(0, format!("missing rows for a {r}x{c} matrix")))?;
                if values.len() != c {
                    return Err(Error::format(line_no, format!("row width {} ≠ {c}", values.len())));
                }
                data.extend(values);
            }
            weights.push(Array2::from_shape_vec((r, c), data).expect("row widths checked"));
        }
        if let Some((line_no, _)) = rows.next() {
            return Err(Error::format(line_no, "rows beyond the declared shapes"));
        }
        Self::from_weights(weights)
    }
}

/// `1 − cos(ŷ, y)`, in `[0, 2]`. Zero vectors are an error.
pub fn cosine_loss(y_hat: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if y_hat.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {}", y_hat.len(), y.len())));
    }
    let (np, nt) = (y_hat.dot(&y_hat).sqrt(), y.dot(&y).sqrt());
    if np == 0.0 {
        return Err(Error::ZeroVector("prediction"));
    }
    if nt == 0.0 {
        return Err(Error::ZeroVector("target"));
    }
    Ok((1.0 - y_hat.dot(&y) / (np * nt)).clamp(0.0, 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient {
    /// Same shapes as [`Mapper::weights`].
    pub grads: Vec<Array2<f64>>,
    /// Mean loss over the usable rows.
    pub loss: f64,
    pub used: usize,
    /// Rows with a zero prediction or zero target, left out of the mean.
    pub skipped: Vec<usize>,
}

/// Gradient of the mean cosine loss over the usable rows of `(x, y)`.
pub fn gradient(m: &Mapper, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<BatchGradient> {
    m.check_input(x)?;
    if y.ncols() != m.d_out() || y.nrows() != x.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "targets {:?} for {} inputs into a mapper with {} outputs",
            y.dim(),
            x.nrows(),
            m.d_out()
        )));
    }
    let (hidden, y_hat) = m.forward_cached(x);

    // dL/dŷ per row, before averaging.
    let mut g = Array2::<f64>::zeros(y_hat.raw_dim());
    let mut loss_sum = 0.0;
    let mut skipped = Vec::new();
    for (i, (p, t)) in y_hat.rows().into_iter().zip(y.rows()).enumerate() {
        let (np, nt) = (p.dot(&p).sqrt(), t.dot(&t).sqrt());
        if np == 0.0 || nt == 0.0 {
            skipped.push(i);
            continue;
        }
        let cos = p.dot(&t) / (np * nt);
        loss_sum += (1.0 - cos).clamp(0.0, 2.0);
        // d(1 − cos)/dŷ = −(y / (‖ŷ‖‖y‖) − cos · ŷ / ‖ŷ‖²)
        Zip::from(g.row_mut(i)).and(&p).and(&t).for_each(|gi, &pi, &ti| {
            *gi = cos * pi / (np * np) - ti / (np * nt);
        });
    }
    let used = x.nrows() - skipped.len();
    if used == 0 {
        return Err(Error::InsufficientData("every row in the batch is degenerate".into()));
    }
    g /= used as f64;

    let grads = match (m.weights.as_slice(), hidden) {
        ([_], None) => vec![x.t().dot(&g)],
        ([_, w2], Some(h)) => {
            let dw2 = h.t().dot(&g);
            let mut dz = g.dot(&w2.t());
            Zip::from(&mut dz).and(&h).for_each(|d, &a| *d *= 1.0 - a * a);
            vec![x.t().dot(&dz), dw2]
        }
        _ => unreachable!("hidden activations exist iff the mapper has two layers"),
    };
    Ok(BatchGradient {
        grads,
        loss: loss_sum / used as f64,
        used,
        skipped,
    })
}

/// Mean cosine loss over the usable rows.
pub fn mean_loss(m: &Mapper, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    let y_hat = m.forward_batch(x)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (p, t) in y_hat.rows().into_iter().zip(y.rows()) {
        if let Ok(l) = cosine_loss(p, t) {
            sum += l;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InsufficientData("every row is degenerate".into()));
    }
    Ok(sum / used as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    /// Degenerate rows skipped over the epoch, as indices into the data.
    pub skipped: Vec<usize>,
}

/// One pass of minibatch SGD over `data` in an order fixed by
/// `(config.seed, epoch_index)`. The returned loss is the mean of the
/// per-row losses seen before each batch's update.
pub fn train_epoch(
    m: &mut Mapper,
    data: &PairedMatrices,
    config: &MapperConfig,
    epoch_index: u64,
) -> Result<EpochStats> {
    config.validate()?;
    let n = data.x.nrows();
    if n == 0 {
        return Err(Error::InsufficientData("no training rows".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(epoch_index);
    order.shuffle(&mut rng);

    let mut loss_sum = 0.0;
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for batch in order.chunks(config.batch_size) {
        let xb = data.x.select(Axis(0), batch);
        let yb = data.y.select(Axis(0), batch);
        let grad = match gradient(m, xb.view(), yb.view()) {
            Ok(g) => g,
            Err(Error::InsufficientData(_)) => {
                skipped.extend_from_slice(batch);
                continue;
            }
            Err(e) => return Err(e),
        };
        loss_sum += grad.loss * grad.used as f64;
        used += grad.used;
        skipped.extend(grad.skipped.iter().map(|&i| batch[i]));
        for (w, g) in m.weights.iter_mut().zip(&grad.grads) {
            w.scaled_add(-config.lr, g);
        }
    }
    if used == 0 {
        return Err(Error::InsufficientData("every training row is degenerate".into()));
    }
    if !m.weights.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("mapper weights after update"));
    }
    skipped.sort_unstable();
    Ok(EpochStats {
        mean_loss: loss_sum / used as f64,
        skipped,
    })
}

/// Largest element-wise relative error `|a − n| / max(1e-12, |a| + |n|)`
/// between the analytic gradient and central differences with step `epsilon`.
pub fn grad_check(m: &Mapper, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, epsilon: f64) -> Result<f64> {
    let analytic = gradient(m, x, y)?;
    compare_gradients(m, x, y, epsilon, &analytic.grads)
}

/// [`grad_check`] against a caller-supplied analytic gradient.
pub fn compare_gradients(
    m: &Mapper,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    epsilon: f64,
    analytic: &[Array2<f64>],
) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!("epsilon {epsilon}")));
    }
    if analytic.len() != m.weights.len() || analytic.iter().zip(&m.weights).any(|(a, w)| a.dim() != w.dim()) {
        return Err(Error::ShapeMismatch("analytic gradient shape".into()));
    }
    let mut probe = m.clone();
    let mut worst = 0.0f64;
    for (layer, a) in analytic.iter().enumerate() {
        for (idx, &a) in a.indexed_iter() {
            let original = probe.weights[layer][idx];
            probe.weights[layer][idx] = original + epsilon;
            let plus = mean_loss(&probe, x, y)?;
            probe.weights[layer][idx] = original - epsilon;
            let minus = mean_loss(&probe, x, y)?;
            probe.weights[layer][idx] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
