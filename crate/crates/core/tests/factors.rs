mod common;

use fqra_core::factor::{extract_factors_via, standardize_cross_section, FactorRoute, DEFAULT_EPS_FLOOR};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn low_rank(t_len: usize, n: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(t_len, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(r, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    a * b
}

#[test]
fn rank_r_reconstruction_both_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..40 {
        let r = 1 + case % 5;
        let t_len = rng.random_range(20..=200);
        let n = rng.random_range(r + 1..=50);
        let m = low_rank(t_len, n, r, &mut rng);
        for route in [FactorRoute::Time, FactorRoute::Cross] {
            let fs = extract_factors_via(&m, r, route).unwrap();
            assert_eq!(fs.k, r);
            let err = (fs.reconstruct() - &m).norm();
            assert!(err <= 1e-8 * m.norm().max(1.0), "case {case} {route:?}: {err:e}");
        }
    }
}

#[test]
fn routes_span_the_same_subspace_as_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..30 {
        let t_len = rng.random_range(30..=200);
        let n = rng.random_range(6..=50);
        let k = 1 + case % 5;
        // full-rank panel with a decaying spectrum
        let m = low_rank(t_len, n, 5, &mut rng) * 10.0
            + DMatrix::from_fn(t_len, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let t_route = extract_factors_via(&m, k, FactorRoute::Time).unwrap();
        let n_route = extract_factors_via(&m, k, FactorRoute::Cross).unwrap();
        let svd = m.clone().svd(true, false);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let u = svd.u.unwrap();
        let oracle = DMatrix::from_fn(t_len, k, |i, j| u[(i, order[j])]);
        let a1 = common::max_principal_angle(&t_route.factors, &n_route.factors);
        let a2 = common::max_principal_angle(&t_route.factors, &oracle);
        assert!(a1 <= 1e-6 && a2 <= 1e-6, "case {case}: {a1:e} {a2:e}");
    }
}

#[test]
fn standardized_panel_factors_are_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = low_rank(120, 19, 3, &mut rng)
        + DMatrix::from_fn(120, 19, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal));
    let sp = standardize_cross_section(&m, DEFAULT_EPS_FLOOR).unwrap();
    let fs = extract_factors_via(&sp.values, 4, FactorRoute::Cross).unwrap();
    let gram = fs.factors.transpose() * &fs.factors;
    assert!((gram - DMatrix::identity(fs.k, fs.k) * 120.0).amax() <= 1e-8 * 120.0);
    // Standardized rows sum to zero, so every loading vector sums to zero
    // and the sign is fixed by the largest loading instead.
    for c in 0..fs.k {
        let l = fs.loadings.column(c);
        assert!(l.sum().abs() < 1e-9 * l.amax().max(1.0));
        let largest = l.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(largest > 0.0);
    }
}
