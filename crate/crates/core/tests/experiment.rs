mod common;

use common::{random_orthogonal, random_unit_space};
use lmd_core::experiment::{emit_csv, emit_plot, load_csv, run_experiment, run_experiment_with};
use lmd_core::lexicon::Pair;
use lmd_core::{BilingualLexicon, EmbeddingSpace, Error, Execution, ExperimentConfig, Mapper, MapperConfig, Mode};
use ndarray::Array2;

/// Source space, its rotation renamed `t<i>`, and the lexicon `w<i> -> t<i>`.
fn rotated_pair(n: usize, dim: usize, seed: u64) -> (EmbeddingSpace, EmbeddingSpace, BilingualLexicon) {
    let mut rng = common::rng(seed);
    let src = random_unit_space(&mut rng, n, dim);
    let rotated = src.matrix().dot(&random_orthogonal(&mut rng, dim));
    let noise = common::random_matrix(&mut rng, n, dim) * 0.05;
    let rows = (0..n)
        .map(|i| (format!("t{i}"), (&rotated.row(i) + &noise.row(i)).to_vec()))
        .collect();
    let tgt = EmbeddingSpace::from_rows(rows).unwrap();
    let lex = BilingualLexicon::new((0..n).map(|i| Pair::new(format!("w{i}"), format!("t{i}"))).collect()).unwrap();
    (src, tgt, lex)
}

fn config(mode: Mode, dim: usize, epochs: usize) -> ExperimentConfig {
    let mapper = MapperConfig {
        hidden: 16,
        lr: 0.3,
        epochs,
        batch_size: 8,
        seed: 2,
        ..MapperConfig::new(dim, dim)
    };
    ExperimentConfig {
        split_seed: 5,
        ..ExperimentConfig::new(mode, mapper)
    }
}

#[test]
fn identity_setup_scores_perfectly() {
    let mut rng = common::rng(41);
    let space = random_unit_space(&mut rng, 30, 6);
    let lex = BilingualLexicon::new(space.vocab().tokens().iter().map(|t| Pair::new(t, t)).collect()).unwrap();
    let mut cfg = config(Mode::InSample, 6, 3);
    cfg.mapper.hidden = 0;
    cfg.mapper.lr = 0.0;
    let identity = Mapper::linear(Array2::eye(6)).unwrap();
    let result = run_experiment_with(&space, &space, &lex, &cfg, identity, |_| {}).unwrap();
    for r in &result.records {
        assert_eq!(r.mean_cosine, 1.0);
        assert!(r.lmd_acc.values().all(|&a| a == 1.0), "{:?}", r.lmd_acc);
    }
    assert!(result.baseline.lmd_acc.values().all(|&a| a == 1.0));
    assert!(result.baseline_residual < 1e-10);
}

#[test]
fn held_out_split_partitions_usable_pairs() {
    let (src, tgt, lex) = rotated_pair(50, 6, 42);
    let mut seen = 0;
    let result = run_experiment_with(
        &src,
        &tgt,
        &lex,
        &config(Mode::HeldOut, 6, 4),
        Mapper::new(&config(Mode::HeldOut, 6, 4).mapper).unwrap(),
        |_| seen += 1,
    )
    .unwrap();
    assert_eq!(seen, 4);
    assert_eq!(result.train_pairs, 40);
    assert_eq!(result.eval_pairs, 10);

    let in_sample = run_experiment(&src, &tgt, &lex, &config(Mode::InSample, 6, 4)).unwrap();
    assert_eq!(in_sample.train_pairs, 50);
    assert_eq!(in_sample.eval_pairs, 50);
}

#[test]
fn oov_pairs_are_dropped_and_reported() {
    let (src, tgt, lex) = rotated_pair(20, 4, 43);
    let mut pairs = lex.pairs().to_vec();
    pairs.push(Pair::new("missing", "t0"));
    let lex = BilingualLexicon::new(pairs).unwrap();
    let result = run_experiment(&src, &tgt, &lex, &config(Mode::InSample, 4, 2)).unwrap();
    assert_eq!(result.dropped.len(), 1);
    assert_eq!(result.train_pairs, 20);
}

#[test]
fn outputs_are_identical_across_runs_and_execution_modes() {
    let (src, tgt, lex) = rotated_pair(60, 8, 44);
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, exec) in [Execution::Sequential, Execution::Parallel, Execution::Parallel]
        .into_iter()
        .enumerate()
    {
        let cfg = ExperimentConfig {
            execution: exec,
            ..config(Mode::HeldOut, 8, 5)
        };
        let result = run_experiment(&src, &tgt, &lex, &cfg).unwrap();
        let csv = dir.path().join(format!("run{i}.csv"));
        let svg = dir.path().join(format!("run{i}.svg"));
        emit_csv(&result, &csv).unwrap();
        emit_plot(&result, &svg).unwrap();
        outputs.push((std::fs::read(&csv).unwrap(), std::fs::read(&svg).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn csv_and_svg_shapes_follow_the_run() {
    let (src, tgt, lex) = rotated_pair(30, 5, 45);
    let mut cfg = config(Mode::InSample, 5, 3);
    cfg.ks = vec![5, 1, 3, 1];
    let result = run_experiment(&src, &tgt, &lex, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    emit_csv(&result, &csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,mean_cosine,lmd_acc@1,lmd_acc@3,lmd_acc@5");
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert!(lines[4].starts_with("baseline,"));
    assert!(lines.iter().all(|l| l.split(',').count() == 6));

    let curves = load_csv(&csv).unwrap();
    assert_eq!(curves.records.len(), 3);
    for (got, want) in curves.records.iter().zip(&result.records) {
        assert!((got.mean_cosine - want.mean_cosine).abs() <= 1e-8 * want.mean_cosine.abs().max(1e-300));
    }

    let svg = dir.path().join("m.svg");
    emit_plot(&result, &svg).unwrap();
    let svg = std::fs::read_to_string(svg).unwrap();
    let polylines: Vec<&str> = svg.match_indices("<polyline").map(|(i, _)| &svg[i..]).collect();
    assert_eq!(polylines.len(), 4);
    for p in polylines {
        let points = p.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(points.split_whitespace().count(), 3);
    }
}

#[test]
fn rejects_unusable_inputs() {
    let (src, tgt, lex) = rotated_pair(30, 5, 46);
    let other = random_unit_space(&mut common::rng(1), 30, 4);
    let err = run_experiment(&src, &other, &lex, &config(Mode::InSample, 5, 1)).unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch(_)), "{err}");

    let few = BilingualLexicon::new(lex.pairs()[..5].to_vec()).unwrap();
    let err = run_experiment(&src, &tgt, &few, &config(Mode::InSample, 5, 1)).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)), "{err}");
}
