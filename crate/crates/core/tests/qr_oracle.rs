mod common;

use fqra_core::quantile::qr_fit;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let x = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = (0..n)
        .map(|i| {
            1.0 + (0..k).map(|j| x[(i, j)] * (j as f64 + 0.5)).sum::<f64>()
                + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (x, y)
}

#[test]
fn matches_vertex_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..30 {
        let k = 1 + case % 3;
        let n = rng.random_range(12..=30);
        let (x, y) = instance(&mut rng, n, k);
        for q in [0.1, 0.5, 0.9] {
            let fit = qr_fit(&x, &y, q).unwrap();
            let oracle = common::qr_vertex_oracle(&x, &y, q);
            let rel = (fit.loss - oracle).abs() / oracle.max(1e-12);
            assert!(rel <= 1e-6, "case {case} q={q}: solver {} oracle {oracle}", fit.loss);
        }
    }
}

#[test]
fn simplex_and_vertex_oracles_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..10 {
        let (x, y) = instance(&mut rng, 15 + case, 1 + case % 2);
        for q in [0.25, 0.5, 0.8] {
            let a = common::qr_vertex_oracle(&x, &y, q);
            let b = common::qr_simplex_oracle(&x, &y, q);
            assert!((a - b).abs() <= 1e-9 * a.max(1.0), "case {case}: {a} vs {b}");
        }
    }
}

#[test]
fn matches_simplex_oracle_on_larger_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..12 {
        let (x, y) = instance(&mut rng, 60, 1 + case % 3);
        for q in [0.1, 0.5, 0.9] {
            let fit = qr_fit(&x, &y, q).unwrap();
            let oracle = common::qr_simplex_oracle(&x, &y, q);
            assert!((fit.loss - oracle).abs() <= 1e-6 * oracle, "case {case} q={q}");
        }
    }
}

#[test]
fn offset_regressor_with_small_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(132);
    for case in 0..6 {
        let n = 40 + 4 * case;
        let x = DMatrix::from_fn(n, 1, |_, _| 17_500.0 + 9.0 * rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = (0..n)
            .map(|i| 3.0 * (x[(i, 0)] - 17_500.0) + 1e6 * rng.sample::<f64, _>(rand_distr::StandardNormal).powi(3))
            .collect();
        for q in [0.05, 0.5, 0.95] {
            let fit = qr_fit(&x, &y, q).unwrap();
            let oracle = common::qr_simplex_oracle(&x, &y, q);
            assert!((fit.loss - oracle).abs() <= 1e-6 * oracle, "case {case} q={q}: {} vs {oracle}", fit.loss);
        }
    }
}
