//! Per-epoch mapping experiments and their CSV/SVG outputs.
//!
//! Two protocols:
//!
//! * [`Mode::InSample`]: train on every usable lexicon pair and score those
//!   same pairs each epoch. This checks that the mapping can be learned at all.
//! * [`Mode::HeldOut`]: split the pairs, train on one part and score the
//!   other, which requires generalization.
//!
//! Both also fit the closed-form orthogonal Procrustes map on the training
//! pairs and score it once on the evaluation pairs with the same index and
//! k list.
//!
//! CSV layout: header `epoch,train_loss,mean_cosine,lmd_acc@<k>...`, one row
//! per epoch, then a final row whose `epoch` field is `baseline`. Numbers
//! carry 9 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::ArrayView2;

use crate::embedding::EmbeddingSpace;
use crate::exec::Execution;
use crate::format;
use crate::lexicon::{filter_by_vocab, to_matrices, BilingualLexicon, DroppedPair, PairedMatrices};
use crate::mapper::{mean_loss, train_epoch, Mapper, MapperConfig};
use crate::metrics::{lmd_accuracy_multi, mean_cosine, MetricRecord, NeighborIndex};
use crate::procrustes::orthogonal_procrustes;
use crate::{Error, Result};

pub const MIN_USABLE_PAIRS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    InSample,
    HeldOut,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::InSample => "in-sample",
            Mode::HeldOut => "held-out",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub mapper: MapperConfig,
    pub ks: Vec<usize>,
    /// Ignored in [`Mode::InSample`].
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Unit-normalize both spaces before fitting. Retrieval always uses a
    /// normalized copy of the target space.
    pub normalize: bool,
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, mapper: MapperConfig) -> Self {
        ExperimentConfig {
            mode,
            mapper,
            ks: vec![1, 3, 5, 10],
            train_fraction: 0.8,
            split_seed: 0,
            normalize: true,
            execution: Execution::default(),
        }
    }

    fn sorted_ks(&self) -> Result<Vec<usize>> {
        let mut ks = self.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() || ks[0] == 0 {
            return Err(Error::InvalidConfig(format!("k list {:?}", self.ks)));
        }
        Ok(ks)
    }
}

/// Closed-form Procrustes map scored like an epoch row.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    /// Mean cosine loss of `XR` against `Y` on the training pairs.
    pub train_loss: f64,
    pub mean_cosine: f64,
    pub lmd_acc: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Epochs 1, 2, ... in order.
    pub records: Vec<MetricRecord>,
    pub baseline: Baseline,
    /// `‖XR − Y‖_F` of the baseline on the training pairs.
    pub baseline_residual: f64,
    pub train_pairs: usize,
    pub eval_pairs: usize,
    pub dropped: Vec<DroppedPair>,
    pub mapper: Mapper,
}

/// Scores predictions for a fixed evaluation set.
pub struct Evaluator<'a> {
    index: NeighborIndex<'a>,
    truths: Vec<String>,
    truth_vectors: ArrayView2<'a, f64>,
    ks: Vec<usize>,
    exec: Execution,
}

impl<'a> Evaluator<'a> {
    /// `normalized_target` must be row-normalized; `eval` rows are scored
    /// against their own target tokens.
    pub fn new(
        normalized_target: &'a EmbeddingSpace,
        eval: &'a PairedMatrices,
        ks: &[usize],
        exec: Execution,
    ) -> Result<Self> {
        Ok(Evaluator {
            index: NeighborIndex::new(normalized_target)?,
            truths: eval.pairs.iter().map(|p| p.target.clone()).collect(),
            truth_vectors: eval.y.view(),
            ks: ks.to_vec(),
            exec,
        })
    }

    /// (mean cosine, LMD accuracy per k)
    pub fn score(&self, predictions: ArrayView2<'_, f64>) -> Result<(f64, BTreeMap<usize, f64>)> {
        let cos = mean_cosine(predictions, self.truth_vectors, self.exec)?;
        let acc = lmd_accuracy_multi(&self.index, predictions, &self.truths, &self.ks, self.exec)?;
        Ok((cos.value, self.ks.iter().copied().zip(acc.by_k).collect()))
    }
}

pub fn run_experiment(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    lex: &BilingualLexicon,
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    let mapper = Mapper::new(&config.mapper)?;
    run_experiment_with(src, tgt, lex, config, mapper, |_| {})
}

/// [`run_experiment`] from a given starting mapper, calling `on_epoch`
/// after each epoch is scored.
pub fn run_experiment_with(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    lex: &BilingualLexicon,
    config: &ExperimentConfig,
    mut mapper: Mapper,
    mut on_epoch: impl FnMut(&MetricRecord),
) -> Result<ExperimentResult> {
    config.mapper.validate()?;
    let ks = config.sorted_ks()?;
    if src.dim() != tgt.dim() {
        return Err(Error::ShapeMismatch(format!(
            "source dimension {} differs from target dimension {}; orthogonal Procrustes needs equal widths",
            src.dim(),
            tgt.dim()
        )));
    }
    if mapper.d_in() != src.dim() || mapper.d_out() != tgt.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mapper is {}->{} but the spaces are {}->{}",
            mapper.d_in(),
            mapper.d_out(),
            src.dim(),
            tgt.dim()
        )));
    }

    let (src_unit, _) = src.normalize_rows();
    let (tgt_unit, _) = tgt.normalize_rows();
    let (src_fit, tgt_fit) = if config.normalize {
        (&src_unit, &tgt_unit)
    } else {
        (src, tgt)
    };

    let (usable, dropped) = filter_by_vocab(lex, src_fit, tgt_fit);
    if usable.len() < MIN_USABLE_PAIRS {
        return Err(Error::InsufficientData(format!(
            "{} usable lexicon pairs, need at least {MIN_USABLE_PAIRS}",
            usable.len()
        )));
    }
    let (train_lex, eval_lex) = match config.mode {
        Mode::InSample => (usable.clone(), usable),
        Mode::HeldOut => usable.split(config.train_fraction, config.split_seed)?,
    };
    let train = to_matrices(&train_lex, src_fit, tgt_fit)?;
    let eval = to_matrices(&eval_lex, src_fit, tgt_fit)?;
    let evaluator = Evaluator::new(&tgt_unit, &eval, &ks, config.execution)?;

    let procrustes = orthogonal_procrustes(train.x.view(), train.y.view())?;
    let baseline_map = Mapper::linear(procrustes.r.clone())?;
    let (mean_cos, lmd_acc) = evaluator.score(baseline_map.forward_batch(eval.x.view())?.view())?;
    let baseline = Baseline {
        train_loss: mean_loss(&baseline_map, train.x.view(), train.y.view())?,
        mean_cosine: mean_cos,
        lmd_acc,
    };

    let mut records = Vec::with_capacity(config.mapper.epochs);
    for epoch in 1..=config.mapper.epochs {
        let stats = train_epoch(&mut mapper, &train, &config.mapper, (epoch - 1) as u64)?;
        let predictions = mapper.forward_batch(eval.x.view())?;
        let (mean_cosine, lmd_acc) = evaluator.score(predictions.view())?;
        let record = MetricRecord {
            epoch,
            train_loss: stats.mean_loss,
            mean_cosine,
            lmd_acc,
        };
        on_epoch(&record);
        records.push(record);
    }

    Ok(ExperimentResult {
        config: ExperimentConfig { ks, ..config.clone() },
        records,
        baseline,
        baseline_residual: procrustes.residual,
        train_pairs: train.len(),
        eval_pairs: eval.len(),
        dropped,
        mapper,
    })
}

/// Epoch rows and optional baseline row, as stored in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub ks: Vec<usize>,
    pub records: Vec<MetricRecord>,
    pub baseline: Option<Baseline>,
}

impl ExperimentResult {
    pub fn curves(&self) -> Curves {
        Curves {
            ks: self.config.ks.clone(),
            records: self.records.clone(),
            baseline: Some(self.baseline.clone()),
        }
    }
}

const CSV_DIGITS: usize = 9;

pub fn emit_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_csv(&result.curves(), &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_csv<W: Write>(curves: &Curves, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["epoch".to_string(), "train_loss".into(), "mean_cosine".into()];
    header.extend(curves.ks.iter().map(|k| format!("lmd_acc@{k}")));
    out.write_record(&header)?;

    let num = |v: f64| format::significant(v, CSV_DIGITS);
    let row = |label: String, loss: f64, cos: f64, acc: &BTreeMap<usize, f64>| -> Result<Vec<String>> {
        let mut fields = vec![label, num(loss), num(cos)];
        for k in &curves.ks {
            let v = acc
                .get(k)
                .ok_or_else(|| Error::InvalidConfig(format!("record has no lmd_acc@{k}")))?;
            fields.push(num(*v));
        }
        Ok(fields)
    };
    for r in &curves.records {
        out.write_record(row(r.epoch.to_string(), r.train_loss, r.mean_cosine, &r.lmd_acc)?)?;
    }
    if let Some(b) = &curves.baseline {
        out.write_record(row("baseline".into(), b.train_loss, b.mean_cosine, &b.lmd_acc)?)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Curves> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: Read>(r: R) -> Result<Curves> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers()?.clone();
    let fixed = ["epoch", "train_loss", "mean_cosine"];
    if header.len() < 4 || header.iter().take(3).ne(fixed) {
        return Err(Error::format(
            1,
            "expected header epoch,train_loss,mean_cosine,lmd_acc@<k>...",
        ));
    }
    let ks = header
        .iter()
        .skip(3)
        .map(|h| h.strip_prefix("lmd_acc@").and_then(|k| k.parse::<usize>().ok()))
        .collect::<Option<Vec<usize>>>()
        .ok_or_else(|| Error::format(1, "accuracy columns must be named lmd_acc@<k>"))?;

    let mut records = Vec::new();
    let mut baseline = None;
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row?;
        if row.len() != header.len() {
            return Err(Error::format(
                line,
                format!("{} fields, expected {}", row.len(), header.len()),
            ));
        }
        let value = |j: usize| -> Result<f64> {
            row[j]
                .parse()
                .map_err(|_| Error::format(line, format!("invalid number {:?}", &row[j])))
        };
        let lmd_acc = ks
            .iter()
            .enumerate()
            .map(|(j, &k)| Ok((k, value(3 + j)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        if &row[0] == "baseline" {
            baseline = Some(Baseline {
                train_loss: value(1)?,
                mean_cosine: value(2)?,
                lmd_acc,
            });
        } else {
            let epoch = row[0]
                .parse()
                .map_err(|_| Error::format(line, format!("invalid epoch {:?}", &row[0])))?;
            records.push(MetricRecord {
                epoch,
                train_loss: value(1)?,
                mean_cosine: value(2)?,
                lmd_acc,
            });
        }
    }
    Ok(Curves { ks, records, baseline })
}

pub fn emit_plot(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let title = format!("Mapping accuracy per epoch ({} evaluation)", result.config.mode.label());
    let svg = render_svg(&result.curves(), &title)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const Y_MAX: f64 = 1.05;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Line chart of mean cosine and every `lmd_acc@k` against epoch, with the
/// baseline values as dashed horizontal lines. Values are clipped to
/// `[0, 1.05]`.
pub fn render_svg(curves: &Curves, title: &str) -> Result<String> {
    let records = &curves.records;
    if records.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "a plot needs at least 2 epochs, got {}",
            records.len()
        )));
    }
    let x_min = records[0].epoch as f64;
    let x_max = records[records.len() - 1].epoch as f64;
    if x_max <= x_min {
        return Err(Error::InvalidConfig("epochs must increase".into()));
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| TOP + plot_h - y.clamp(0.0, Y_MAX) / Y_MAX * plot_h;

    let mut series: Vec<(String, Vec<f64>, Option<f64>)> = vec![(
        "mean cosine".into(),
        records.iter().map(|r| r.mean_cosine).collect(),
        curves.baseline.as_ref().map(|b| b.mean_cosine),
    )];
    for k in &curves.ks {
        let values = records
            .iter()
            .map(|r| r.lmd_acc.get(k).copied())
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::InvalidConfig(format!("record has no lmd_acc@{k}")))?;
        let base = curves.baseline.as_ref().and_then(|b| b.lmd_acc.get(k).copied());
        series.push((format!("LMD accuracy @{k}"), values, base));
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    // Axes and ticks.
    let _ = writeln!(
        s,
        r#"<g stroke="black" fill="none"><line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h,
        TOP + plot_h
    );
    for i in 0..=5 {
        let v = i as f64 * 0.2;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
            LEFT,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let step = tick_step(x_max - x_min);
    let mut tick = (x_min / step).ceil() * step;
    while tick <= x_max + 1e-9 {
        let x = px(tick);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            tick
        );
        tick += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">epoch</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );

    for (i, (label, values, base)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = records
            .iter()
            .zip(values)
            .map(|(r, &v)| format!("{:.2},{:.2}", px(r.epoch as f64), py(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        if let Some(b) = base {
            let y = py(*b);
            let _ = writeln!(
                s,
                r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-dasharray="5,4" stroke-opacity="0.7"/>"#,
                LEFT + plot_w
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(label)
        );
    }
    if curves.baseline.is_some() {
        let ly = TOP + 10.0 + 18.0 * series.len() as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="gray" stroke-dasharray="5,4"/><text x="{:.2}" y="{:.2}">Procrustes baseline</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// 1, 2 or 5 times a power of ten, giving at most ~10 ticks over `range`.
fn tick_step(range: f64) -> f64 {
    let raw = range / 10.0;
    let magnitude = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * magnitude)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * magnitude);
    step.max(1.0)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
