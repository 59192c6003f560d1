//! `lmd`: train embeddings, align them, and run mapping experiments.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lmd_core::cbow::{train_cbow, CbowConfig};
use lmd_core::experiment::{emit_csv, emit_plot, load_csv, render_svg, run_experiment_with, Evaluator};
use lmd_core::lexicon::{filter_by_vocab, to_matrices};
use lmd_core::mapper::Mapper;
use lmd_core::metrics::rolling_ols_slope;
use lmd_core::procrustes::orthogonal_procrustes;
use lmd_core::{BilingualLexicon, EmbeddingSpace, Error, Execution, ExperimentConfig, MapperConfig, Mode};

#[derive(Parser)]
#[command(
    name = "lmd",
    version,
    about = "Language-model-distance evaluation of embedding mappings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train CBOW embeddings on a corpus (one sentence per line) and save
    /// them in word2vec text format.
    TrainEmbeddings(TrainArgs),
    /// Fit the closed-form orthogonal map on every usable lexicon pair and
    /// report its residual and LMD accuracy.
    Procrustes(ProcrustesArgs),
    /// Train a mapper epoch by epoch, writing per-epoch metrics as CSV and SVG.
    Experiment(ExperimentArgs),
    /// Re-render the SVG chart from an experiment CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus file, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Output embedding file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Context words on each side of the center word.
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Noise words per positive example.
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Initial learning rate; decays linearly to a tenth of this.
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Drop tokens seen fewer times than this.
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct PairArgs {
    /// Source-language embeddings (word2vec text).
    #[arg(long)]
    src: PathBuf,
    /// Target-language embeddings (word2vec text).
    #[arg(long)]
    tgt: PathBuf,
    /// Tab-separated `source<TAB>target` lexicon.
    #[arg(long)]
    lexicon: PathBuf,
    /// Neighborhood sizes for LMD accuracy, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
    k: Vec<usize>,
    /// Fit on the raw vectors instead of unit-normalized rows.
    #[arg(long)]
    no_normalize: bool,
    /// Score predictions on one thread.
    #[arg(long)]
    sequential: bool,
}

impl PairArgs {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn load(&self) -> Result<(EmbeddingSpace, EmbeddingSpace, BilingualLexicon)> {
        let src = EmbeddingSpace::load_word2vec_text(&self.src)?;
        let tgt = EmbeddingSpace::load_word2vec_text(&self.tgt)?;
        let lex = BilingualLexicon::load(&self.lexicon)?;
        if src.dim() != tgt.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} has dimension {} but {} has dimension {}",
                self.src.display(),
                src.dim(),
                self.tgt.display(),
                tgt.dim()
            ))
            .into());
        }
        Ok((src, tgt, lex))
    }
}

#[derive(Args)]
struct ProcrustesArgs {
    #[command(flatten)]
    pairs: PairArgs,
    /// Save R as a linear mapper checkpoint.
    #[arg(long)]
    save_r: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    InSample,
    HeldOut,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    pairs: PairArgs,
    #[arg(long, value_enum, default_value = "in-sample")]
    mode: ModeArg,
    /// Hidden units; 0 trains a linear map.
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Fraction of usable pairs used for training in held-out mode.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Seeds both the held-out split and the mapper.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epochs in the trailing window for the slope of the smallest-k accuracy.
    #[arg(long, default_value_t = 10)]
    slope_window: usize,
    /// Metrics CSV [default: lmd-<mode>.csv]
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Chart SVG [default: lmd-<mode>.svg]
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Print metrics after every epoch.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Metrics CSV written by `experiment`.
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "Mapping accuracy per epoch")]
    title: String,
}

/// A flag combination that parses but makes no sense.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::TrainEmbeddings(a) => train_embeddings(a),
        Command::Procrustes(a) => procrustes(a),
        Command::Experiment(a) => experiment(a),
        Command::Plot(a) => plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.is::<Usage>() || matches!(e.downcast_ref::<Error>(), Some(Error::InvalidConfig(_)));
            ExitCode::from(if usage { 1 } else { 2 })
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read corpus {}", path.display()))?;
    Ok(text.lines().map(String::from).collect())
}

fn train_embeddings(a: &TrainArgs) -> Result<()> {
    let config = CbowConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        initial_lr: a.lr,
        min_count: a.min_count,
        seed: a.seed,
    };
    config.validate()?;
    let lines = read_lines(&a.corpus)?;
    let trained = train_cbow(&lines, &config)?;
    println!(
        "vocabulary {} tokens, dimension {}",
        trained.space.len(),
        trained.space.dim()
    );
    for (i, loss) in trained.epoch_losses.iter().enumerate() {
        println!("epoch {:>3}  loss {loss:.6}", i + 1);
    }
    trained.space.save_word2vec_text(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn procrustes(a: &ProcrustesArgs) -> Result<()> {
    let (src, tgt, lex) = a.pairs.load()?;
    let (src_unit, _) = src.normalize_rows();
    let (tgt_unit, _) = tgt.normalize_rows();
    let (src_fit, tgt_fit) = if a.pairs.no_normalize {
        (&src, &tgt)
    } else {
        (&src_unit, &tgt_unit)
    };

    let (usable, dropped) = filter_by_vocab(&lex, src_fit, tgt_fit);
    if usable.is_empty() {
        return Err(Error::InsufficientData("no lexicon pair is in both vocabularies".into()).into());
    }
    let data = to_matrices(&usable, src_fit, tgt_fit)?;
    let fit = orthogonal_procrustes(data.x.view(), data.y.view())?;
    let map = Mapper::linear(fit.r.clone())?;
    let mut ks = a.pairs.k.clone();
    ks.sort_unstable();
    ks.dedup();
    let evaluator = Evaluator::new(&tgt_unit, &data, &ks, a.pairs.execution())?;
    let (cos, acc) = evaluator.score(map.forward_batch(data.x.view())?.view())?;

    println!(
        "pairs {} used, {} dropped as out of vocabulary",
        data.len(),
        dropped.len()
    );
    println!("residual {:.6e}", fit.residual);
    println!("mean_cosine {cos:.6}");
    for (k, v) in &acc {
        println!("lmd_acc@{k} {v:.6}");
    }
    if let Some(path) = &a.save_r {
        map.save_text(path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    if a.slope_window < 2 {
        return Err(Usage(format!("--slope-window {} must be at least 2", a.slope_window)).into());
    }
    if a.epochs < 2 {
        return Err(Usage(format!("--epochs {} is too few to plot; need at least 2", a.epochs)).into());
    }
    let (src, tgt, lex) = a.pairs.load()?;
    let mode = match a.mode {
        ModeArg::InSample => Mode::InSample,
        ModeArg::HeldOut => Mode::HeldOut,
    };
    let mapper = MapperConfig {
        hidden: a.hidden,
        lr: a.lr,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed: a.seed,
        ..MapperConfig::new(src.dim(), tgt.dim())
    };
    let config = ExperimentConfig {
        ks: a.pairs.k.clone(),
        train_fraction: a.train_fraction,
        split_seed: a.seed,
        normalize: !a.pairs.no_normalize,
        execution: a.pairs.execution(),
        ..ExperimentConfig::new(mode, mapper)
    };
    let csv = a
        .csv
        .clone()
        .unwrap_or_else(|| format!("lmd-{}.csv", mode.label()).into());
    let svg = a
        .svg
        .clone()
        .unwrap_or_else(|| format!("lmd-{}.svg", mode.label()).into());

    let verbose = a.verbose;
    let result = run_experiment_with(&src, &tgt, &lex, &config, Mapper::new(&config.mapper)?, |r| {
        if verbose {
            let acc: Vec<String> = r.lmd_acc.iter().map(|(k, v)| format!("@{k} {v:.4}")).collect();
            println!(
                "epoch {:>4}  loss {:.6}  cos {:.6}  {}",
                r.epoch,
                r.train_loss,
                r.mean_cosine,
                acc.join("  ")
            );
        }
    })?;
    emit_csv(&result, &csv)?;
    emit_plot(&result, &svg)?;

    println!(
        "{} mode: {} train pairs, {} evaluation pairs, {} dropped",
        mode.label(),
        result.train_pairs,
        result.eval_pairs,
        result.dropped.len()
    );
    let last = result.records.last().expect("at least two epochs");
    println!("final epoch {}", last.epoch);
    println!("  train_loss {:.6}", last.train_loss);
    println!("  mean_cosine {:.6}", last.mean_cosine);
    for (k, v) in &last.lmd_acc {
        println!("  lmd_acc@{k} {v:.6}");
    }
    println!("procrustes baseline: mean_cosine {:.6}", result.baseline.mean_cosine);
    for (k, v) in &result.baseline.lmd_acc {
        println!("  lmd_acc@{k} {v:.6}");
    }
    let first_k = result.config.ks[0];
    let series: Vec<(f64, f64)> = result
        .records
        .iter()
        .map(|r| (r.epoch as f64, r.lmd_acc[&first_k]))
        .collect();
    let window = a.slope_window.min(series.len());
    let slope = rolling_ols_slope(&series[series.len() - window..], window)?;
    println!(
        "lmd_acc@{first_k} slope over last {window} epochs: {:+.6e} per epoch",
        slope[0]
    );
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

fn plot(a: &PlotArgs) -> Result<()> {
    let curves = load_csv(&a.csv)?;
    let svg = render_svg(&curves, &a.title)?;
    std::fs::write(&a.out, svg).with_context(|| format!("cannot write {}", a.out.display()))?;
    println!("wrote {}", a.out.display());
    Ok(())
}
