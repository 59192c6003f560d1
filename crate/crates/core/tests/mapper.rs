mod common;

use common::{random_matrix, random_orthogonal};
use lmd_core::lexicon::{Pair, PairedMatrices};
use lmd_core::mapper::{cosine_loss, grad_check, gradient, mean_loss, train_epoch};
use lmd_core::{Mapper, MapperConfig};
use proptest::prelude::*;

fn mapper(d_in: usize, d_out: usize, hidden: usize, seed: u64) -> Mapper {
    Mapper::new(&MapperConfig {
        hidden,
        seed,
        ..MapperConfig::new(d_in, d_out)
    })
    .unwrap()
}

fn paired(x: ndarray::Array2<f64>, y: ndarray::Array2<f64>) -> PairedMatrices {
    let pairs = (0..x.nrows())
        .map(|i| Pair::new(format!("s{i}"), format!("t{i}")))
        .collect();
    PairedMatrices { x, y, pairs }
}

#[test]
fn finite_difference_error_shrinks_with_step() {
    let mut rng = common::rng(31);
    for seed in 0..3 {
        let m = mapper(5, 4, 0, seed);
        let x = random_matrix(&mut rng, 6, 5);
        let y = random_matrix(&mut rng, 6, 4);
        let coarse = grad_check(&m, x.view(), y.view(), 1e-4).unwrap();
        let fine = grad_check(&m, x.view(), y.view(), 1e-6).unwrap();
        assert!(fine < coarse, "seed {seed}: {fine} !< {coarse}");
        assert!(fine < 1e-4);
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = common::rng(32);
    for (i, hidden) in [0, 8, 0, 8, 8].into_iter().enumerate() {
        let m = mapper(6, 5, hidden, 100 + i as u64);
        let x = random_matrix(&mut rng, 7, 6);
        let y = random_matrix(&mut rng, 7, 5);
        let err = grad_check(&m, x.view(), y.view(), 1e-6).unwrap();
        assert!(err < 1e-4, "config {i} (hidden {hidden}): {err}");
    }
}

#[test]
fn mlp_fits_rotation_task() {
    let mut rng = common::rng(33);
    let x = random_matrix(&mut rng, 64, 6);
    let y = x.dot(&random_orthogonal(&mut rng, 6));
    let data = paired(x, y);
    let config = MapperConfig {
        hidden: 32,
        lr: 0.5,
        epochs: 150,
        batch_size: 16,
        seed: 4,
        ..MapperConfig::new(6, 6)
    };
    let mut m = Mapper::new(&config).unwrap();
    let start = mean_loss(&m, data.x.view(), data.y.view()).unwrap();
    for epoch in 0..config.epochs as u64 {
        let stats = train_epoch(&mut m, &data, &config, epoch).unwrap();
        assert!(stats.mean_loss.is_finite());
    }
    let end = mean_loss(&m, data.x.view(), data.y.view()).unwrap();
    assert!(end < 0.1 * start, "{start} -> {end}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_loss_is_bounded(
        a in prop::collection::vec(-10.0f64..10.0, 4),
        b in prop::collection::vec(-10.0f64..10.0, 4),
    ) {
        let a = ndarray::Array1::from(a);
        let b = ndarray::Array1::from(b);
        prop_assume!(a.dot(&a) > 1e-12 && b.dot(&b) > 1e-12);
        let l = cosine_loss(a.view(), b.view()).unwrap();
        prop_assert!((0.0..=2.0).contains(&l));
    }

    #[test]
    fn gradient_is_finite_and_loss_bounded(seed in any::<u64>(), hidden in prop::sample::select(vec![0usize, 3, 8])) {
        let mut rng = common::rng(seed);
        let m = mapper(4, 3, hidden, seed);
        let x = random_matrix(&mut rng, 5, 4);
        let y = random_matrix(&mut rng, 5, 3);
        let g = gradient(&m, x.view(), y.view()).unwrap();
        prop_assert!(g.grads.iter().flatten().all(|v| v.is_finite()));
        prop_assert!((0.0..=2.0).contains(&g.loss));
    }
}
