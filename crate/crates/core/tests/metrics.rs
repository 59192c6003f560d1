mod common;

use common::{full_sort, random_unit, random_unit_space, rank_of};
use lmd_core::metrics::{knn, lmd, lmd_accuracy, lmd_accuracy_multi, mean_cosine, rolling_ols_slope};
use lmd_core::{EmbeddingSpace, Execution, NeighborIndex};
use ndarray::Array2;
use proptest::prelude::*;

fn predictions(rng: &mut impl rand::Rng, n: usize, dim: usize) -> Array2<f64> {
    let mut m = Array2::zeros((n, dim));
    for mut row in m.rows_mut() {
        row.assign(&random_unit(rng, dim));
    }
    m
}

#[test]
fn knn_matches_full_sort() {
    let mut rng = common::rng(21);
    let space = random_unit_space(&mut rng, 20, 6);
    let index = NeighborIndex::new(&space).unwrap();
    for _ in 0..50 {
        let q = random_unit(&mut rng, 6) * 2.5;
        let oracle = full_sort(&space, q.view());
        for k in [1, 3, 7, 20, 25] {
            let got = knn(&index, q.view(), k).unwrap();
            let want: Vec<usize> = oracle.iter().take(k).map(|&(i, _)| i).collect();
            assert_eq!(got.indices().collect::<Vec<_>>(), want);
            for (n, &(_, s)) in got.as_slice().iter().zip(&oracle) {
                assert!((n.score - s).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn lmd_agrees_with_rank_oracle() {
    let mut rng = common::rng(22);
    let space = random_unit_space(&mut rng, 30, 4);
    let index = NeighborIndex::new(&space).unwrap();
    for trial in 0..200 {
        let q = random_unit(&mut rng, 4);
        let t = trial % space.len();
        let rank = rank_of(&space, q.view(), t).unwrap();
        for k in 1..=space.len() {
            let got = lmd(&index, q.view(), space.vocab().token(t), k).unwrap();
            assert_eq!(got, rank <= k, "trial {trial} k {k} rank {rank}");
        }
    }
}

#[test]
fn duplicate_rows_tie_by_index() {
    let space = EmbeddingSpace::from_rows(vec![
        ("x", vec![0.0, 1.0]),
        ("twin_a", vec![1.0, 0.0]),
        ("twin_b", vec![1.0, 0.0]),
    ])
    .unwrap();
    let index = NeighborIndex::new(&space).unwrap();
    let q = ndarray::arr1(&[1.0, 0.0]);
    let top: Vec<usize> = knn(&index, q.view(), 3).unwrap().indices().collect();
    assert_eq!(top, vec![1, 2, 0]);
    assert!(lmd(&index, q.view(), "twin_a", 1).unwrap());
    assert!(!lmd(&index, q.view(), "twin_b", 1).unwrap());
    assert!(lmd(&index, q.view(), "twin_b", 2).unwrap());
}

#[test]
fn zero_rows_are_never_neighbors() {
    let space = EmbeddingSpace::from_rows(vec![
        ("a", vec![1.0, 0.0]),
        ("gone", vec![0.0, 0.0]),
        ("b", vec![0.0, 1.0]),
    ])
    .unwrap();
    let index = NeighborIndex::new(&space).unwrap();
    let q = ndarray::arr1(&[0.3, -0.2]);
    let all: Vec<usize> = knn(&index, q.view(), 10).unwrap().indices().collect();
    assert_eq!(all, vec![0, 2]);
    assert!(!lmd(&index, q.view(), "gone", 3).unwrap());
}

#[test]
fn full_neighborhood_always_hits() {
    let mut rng = common::rng(23);
    let space = random_unit_space(&mut rng, 15, 3);
    let index = NeighborIndex::new(&space).unwrap();
    let preds = predictions(&mut rng, 40, 3);
    let truths: Vec<String> = (0..40).map(|i| format!("w{}", (i * 7) % 15)).collect();
    let acc = lmd_accuracy(&index, preds.view(), &truths, 15, Execution::Sequential).unwrap();
    assert_eq!(acc, 1.0);
}

#[test]
fn mean_cosine_matches_row_dot_products() {
    let mut rng = common::rng(24);
    let p = common::random_matrix(&mut rng, 25, 5);
    let t = common::random_matrix(&mut rng, 25, 5);
    let want = (0..25).map(|i| common::cosine(p.row(i), t.row(i))).sum::<f64>() / 25.0;
    let got = mean_cosine(p.view(), t.view(), Execution::Sequential).unwrap();
    assert!((got.value - want).abs() < 1e-12);
    assert!(got.skipped.is_empty());
    let neg = mean_cosine(p.view(), (-&p).view(), Execution::Sequential).unwrap();
    assert_eq!(neg.value, -1.0);
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let mut rng = common::rng(25);
    let space = random_unit_space(&mut rng, 120, 8);
    let index = NeighborIndex::new(&space).unwrap();
    let preds = predictions(&mut rng, 300, 8);
    let truths: Vec<String> = (0..300).map(|i| format!("w{}", i % 120)).collect();
    let ks = [1, 5, 10, 50];
    let a = lmd_accuracy_multi(&index, preds.view(), &truths, &ks, Execution::Sequential).unwrap();
    let b = lmd_accuracy_multi(&index, preds.view(), &truths, &ks, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let rows: Vec<usize> = (0..300).map(|i| i % 120).collect();
    let truth_rows = space.matrix().select(ndarray::Axis(0), &rows);
    let c = mean_cosine(preds.view(), truth_rows.view(), Execution::Sequential).unwrap();
    let d = mean_cosine(preds.view(), truth_rows.view(), Execution::Parallel).unwrap();
    assert_eq!(c.value.to_bits(), d.value.to_bits());
}

#[test]
fn window_two_slopes_are_difference_quotients() {
    let series = [(0.0, 1.0), (1.0, 4.0), (3.0, 2.0), (3.5, 2.5), (7.0, -1.0)];
    let slopes = rolling_ols_slope(&series, 2).unwrap();
    for (s, w) in slopes.iter().zip(series.windows(2)) {
        let want = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        assert!((s - want).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn accuracy_is_monotone_in_k(seed in any::<u64>(), n in 5usize..40, rows in 1usize..30) {
        let mut rng = common::rng(seed);
        let space = random_unit_space(&mut rng, n, 4);
        let index = NeighborIndex::new(&space).unwrap();
        let preds = predictions(&mut rng, rows, 4);
        let truths: Vec<String> = (0..rows).map(|i| format!("w{}", (i * 3) % n)).collect();
        let ks: Vec<usize> = (1..=n).collect();
        let acc = lmd_accuracy_multi(&index, preds.view(), &truths, &ks, Execution::Sequential).unwrap();
        prop_assert!(acc.by_k.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(acc.by_k[n - 1], 1.0);
    }

    #[test]
    fn rolling_slope_recovers_lines(
        a in -5.0f64..5.0, b in -5.0f64..5.0, len in 2usize..30, window in 2usize..10
    ) {
        prop_assume!(window <= len);
        let series: Vec<(f64, f64)> = (0..len).map(|i| (i as f64, a * i as f64 + b)).collect();
        for s in rolling_ols_slope(&series, window).unwrap() {
            prop_assert!((s - a).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_cosine_lies_in_unit_interval(seed in any::<u64>(), rows in 1usize..20) {
        let mut rng = common::rng(seed);
        let p = common::random_matrix(&mut rng, rows, 3);
        let t = common::random_matrix(&mut rng, rows, 3);
        let c = mean_cosine(p.view(), t.view(), Execution::Sequential).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c.value));
    }
}
