//! Cross-sectional standardization, principal-component factors and BIC
//! selection of the number of factors.
//!
//! Factors are normalized so that `F'F = T I` whichever eigenproblem produced
//! them, and each factor is signed so that its loadings sum to a non-negative
//! value.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::ols_fit;
use crate::quantile::{pinball, PreparedDesign};

pub const DEFAULT_EPS_FLOOR: f64 = 1e-8;
pub const DEFAULT_K_MAX: usize = 6;

/// Row-wise z-scores of a `T x N` panel.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedPanel {
    pub values: DMatrix<f64>,
    pub mu: Vec<f64>,
    /// Raw cross-sectional standard deviation of each row.
    pub sigma_raw: Vec<f64>,
    /// Standard deviation after flooring; this is what the z-scores and the
    /// back-transform use.
    pub sigma: Vec<f64>,
    /// Rows whose standard deviation fell below the floor.
    pub degenerate: Vec<bool>,
    pub eps_floor: f64,
}

impl StandardizedPanel {
    /// `(y_t - mu_t) / sigma_t` for the first `y.len()` rows.
    pub fn standardize_target(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() > self.mu.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mu.len(),
                got: y.len(),
            });
        }
        Ok(y.iter()
            .enumerate()
            .map(|(t, v)| (v - self.mu[t]) / self.sigma[t])
            .collect())
    }

    /// Maps a standardized value at row `t` back to the original units.
    #[inline]
    pub fn back_transform(&self, t: usize, p: f64) -> f64 {
        p * self.sigma[t] + self.mu[t]
    }

    /// Reconstructs the original panel.
    pub fn unstandardize(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.values.nrows(), self.values.ncols(), |t, j| {
            self.back_transform(t, self.values[(t, j)])
        })
    }
}

/// Standardizes each row across its `N` columns (sample SD, `n - 1`).
pub fn standardize_cross_section(matrix: &DMatrix<f64>, eps_floor: f64) -> Result<StandardizedPanel> {
    let (t_len, n) = matrix.shape();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    if !(eps_floor > 0.0) {
        return Err(Error::InvalidParameter(format!("eps_floor must be positive, got {eps_floor}")));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut values = DMatrix::zeros(t_len, n);
    let mut mu = Vec::with_capacity(t_len);
    let mut sigma_raw = Vec::with_capacity(t_len);
    let mut sigma = Vec::with_capacity(t_len);
    let mut degenerate = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let row = matrix.row(t);
        let m = row.sum() / n as f64;
        let ss: f64 = row.iter().map(|v| (v - m) * (v - m)).sum();
        let s = (ss / (n - 1) as f64).sqrt();
        let floored = s < eps_floor;
        let s_used = if floored { eps_floor } else { s };
        for j in 0..n {
            values[(t, j)] = (matrix[(t, j)] - m) / s_used;
        }
        mu.push(m);
        sigma_raw.push(s);
        sigma.push(s_used);
        degenerate.push(floored);
    }
    Ok(StandardizedPanel {
        values,
        mu,
        sigma_raw,
        sigma,
        degenerate,
        eps_floor,
    })
}

/// Which eigenproblem the factors came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorRoute {
    /// Eigenvectors of the `T x T` matrix `P P'`.
    Time,
    /// Eigenvectors of the `N x N` matrix `P' P`, mapped to the time axis.
    Cross,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    /// `T x K`, with `F'F = T I`.
    pub factors: DMatrix<f64>,
    /// `N x K`.
    pub loadings: DMatrix<f64>,
    /// Leading eigenvalues of `P'P`, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub k: usize,
    pub route: FactorRoute,
}

impl FactorSet {
    /// `F Λ'`, the rank-`K` approximation of the panel.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.factors * self.loadings.transpose()
    }

    /// The first `k` factors.
    pub fn leading(&self, k: usize) -> DMatrix<f64> {
        self.factors.columns(0, k.min(self.k)).into_owned()
    }
}

/// Extracts `k` factors, choosing the smaller eigenproblem.
///
/// Fewer than `k` factors are returned when the panel's numerical rank is
/// below `k`.
pub fn extract_factors(matrix: &DMatrix<f64>, k: usize) -> Result<FactorSet> {
    let route = if matrix.ncols() < matrix.nrows() {
        FactorRoute::Cross
    } else {
        FactorRoute::Time
    };
    extract_factors_via(matrix, k, route)
}

pub fn extract_factors_via(matrix: &DMatrix<f64>, k: usize, route: FactorRoute) -> Result<FactorSet> {
    let (t_len, n) = matrix.shape();
    let max = t_len.min(n);
    if k == 0 || k > max {
        return Err(Error::KTooLarge { k, max });
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }

    let gram = match route {
        FactorRoute::Time => matrix * matrix.transpose(),
        FactorRoute::Cross => matrix.transpose() * matrix,
    };
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * t_len.max(n) as f64 * f64::EPSILON;
    let order: Vec<usize> = order
        .into_iter()
        .take(k)
        .take_while(|&i| top > 0.0 && eig.eigenvalues[i] > tol)
        .collect();
    let k_eff = order.len();

    let scale = (t_len as f64).sqrt();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(k_eff);
    for &i in &order {
        let v = eig.eigenvectors.column(i);
        let f = match route {
            FactorRoute::Time => v.into_owned(),
            FactorRoute::Cross => matrix * v,
        };
        cols.push(f);
    }
    // Re-orthonormalize in eigenvalue order; the cross route loses
    // orthogonality on small eigenvalues.
    for i in 0..cols.len() {
        for _ in 0..2 {
            for j in 0..i {
                let c = cols[j].dot(&cols[i]);
                let prev = cols[j].clone();
                cols[i].axpy(-c, &prev, 1.0);
            }
        }
        let norm = cols[i].norm();
        cols[i] /= norm;
    }

    let mut factors = DMatrix::zeros(t_len, k_eff);
    for (c, col) in cols.iter().enumerate() {
        factors.set_column(c, &(col * scale));
    }
    let mut loadings = matrix.transpose() * &factors / t_len as f64;
    for c in 0..k_eff {
        if loading_sign(loadings.column(c).as_slice()) < 0.0 {
            factors.column_mut(c).neg_mut();
            loadings.column_mut(c).neg_mut();
        }
    }
    Ok(FactorSet {
        factors,
        loadings,
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        k: k_eff,
        route,
    })
}

/// `+1` when the loadings sum to a non-negative value. A sum that vanishes
/// relative to the loadings falls back to the sign of the largest loading.
fn loading_sign(loadings: &[f64]) -> f64 {
    let sum: f64 = loadings.iter().sum();
    let l1: f64 = loadings.iter().map(|v| v.abs()).sum();
    if sum.abs() > 1e-10 * l1 {
        return sum.signum();
    }
    let largest = loadings.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if largest < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicMode {
    /// Residual sum of squares of the least-squares fit.
    Linear,
    /// Total pinball loss of the median regression.
    MedianPinball,
}

/// BIC value `n ln(loss / n) + (k + 1) ln n`.
pub fn bic(loss: f64, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    nf * (loss / nf).ln() + (k + 1) as f64 * nf.ln()
}

/// Picks the number of factors in `1..=k_max` with the smallest BIC, ties
/// to the smaller count. `y` holds targets for the leading rows of `matrix`.
pub fn select_k_bic(matrix: &DMatrix<f64>, y: &[f64], k_max: usize, mode: BicMode) -> Result<usize> {
    let max = matrix.nrows().min(matrix.ncols());
    if k_max == 0 || k_max > max {
        return Err(Error::KTooLarge { k: k_max, max });
    }
    let fs = extract_factors(matrix, k_max)?;
    select_k_bic_factors(&fs, y, k_max, mode)
}

/// As [`select_k_bic`] on factors already extracted.
pub fn select_k_bic_factors(fs: &FactorSet, y: &[f64], k_max: usize, mode: BicMode) -> Result<usize> {
    if k_max == 0 {
        return Err(Error::KTooLarge { k: 0, max: fs.k });
    }
    let n = y.len();
    if n > fs.factors.nrows() {
        return Err(Error::DimensionMismatch {
            expected: fs.factors.nrows(),
            got: n,
        });
    }
    let k_top = k_max.min(fs.k);
    if k_top <= 1 {
        return Ok(1);
    }
    let mut best = (f64::INFINITY, 1);
    for k in 1..=k_top {
        let x = fs.factors.view((0, 0), (n, k)).into_owned();
        let loss = match mode {
            BicMode::Linear => {
                let design = with_intercept(&x);
                let fit = ols_fit(&design, y)?;
                let fitted = &design * DVector::from_column_slice(&fit.coef);
                fitted.iter().zip(y).map(|(f, v)| (v - f) * (v - f)).sum::<f64>()
            }
            BicMode::MedianPinball => {
                let model = PreparedDesign::new(&x, y)?.fit(0.5)?;
                (0..n)
                    .map(|t| {
                        let row: Vec<f64> = x.row(t).iter().copied().collect();
                        pinball(0.5, model.predict(&row).expect("width matches"), y[t])
                    })
                    .sum()
            }
        };
        let b = bic(loss, n, k);
        if b < best.0 {
            best = (b, k);
        }
    }
    Ok(best.1)
}

/// `[1 | x]`.
pub(crate) fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn identical_row_is_floored() {
        let m = DMatrix::from_row_slice(2, 3, &[4.0, 4.0, 4.0, -1.0, 0.0, 1.0]);
        let sp = standardize_cross_section(&m, DEFAULT_EPS_FLOOR).unwrap();
        assert!(sp.degenerate[0] && !sp.degenerate[1]);
        assert_eq!(sp.mu[0], 4.0);
        assert_eq!(sp.sigma[0], DEFAULT_EPS_FLOOR);
        assert_eq!(sp.sigma_raw[0], 0.0);
        assert!(sp.values.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_point_row_uses_n_minus_one() {
        let m = DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]);
        let sp = standardize_cross_section(&m, DEFAULT_EPS_FLOOR).unwrap();
        assert_eq!(sp.mu[0], 0.0);
        assert!((sp.sigma[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((sp.values[(0, 0)] + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(standardize_cross_section(&DMatrix::zeros(3, 1), 1e-8).is_err());
    }

    #[test]
    fn rank_one_panel() {
        let a = DVector::from_fn(30, |i, _| 1.0 + i as f64 * 0.3);
        let b = DVector::from_fn(8, |j, _| 2.0 - j as f64 * 0.1);
        let m = &a * b.transpose();
        let fs = extract_factors(&m, 1).unwrap();
        assert_eq!(fs.route, FactorRoute::Cross);
        assert!((fs.reconstruct() - &m).norm() <= 1e-8 * m.norm());
        // a positive outer product yields positive loadings and factor
        assert!(fs.loadings.iter().all(|&l| l > 0.0));
        assert!(fs.factors.iter().all(|&f| f > 0.0));
    }

    #[test]
    fn identical_columns_single_factor() {
        let col = DVector::from_fn(40, |i, _| (i as f64 * 0.7).sin() + 2.0);
        let m = DMatrix::from_fn(40, 6, |i, _| col[i]);
        let fs = extract_factors(&m, 3).unwrap();
        assert_eq!(fs.k, 1, "rank-one panel yields one factor");
        let f = fs.factors.column(0);
        let ratio = col[0] / f[0];
        assert!(f.iter().zip(col.iter()).all(|(fv, cv)| (fv * ratio - cv).abs() < 1e-10));
    }

    #[test]
    fn orthogonality_and_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = gaussian(60, 12, &mut rng);
        for route in [FactorRoute::Time, FactorRoute::Cross] {
            let fs = extract_factors_via(&m, 5, route).unwrap();
            let gram = fs.factors.transpose() * &fs.factors;
            assert!((gram - DMatrix::identity(5, 5) * 60.0).norm() <= 1e-8 * 60.0);
            assert!(fs.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rejects_bad_k_and_nan() {
        let m = DMatrix::from_element(5, 3, 1.0);
        assert!(matches!(extract_factors(&m, 4), Err(Error::KTooLarge { k: 4, max: 3 })));
        assert!(matches!(extract_factors(&m, 0), Err(Error::KTooLarge { .. })));
        let mut bad = m.clone();
        bad[(1, 1)] = f64::NAN;
        assert!(matches!(extract_factors(&bad, 1), Err(Error::NonFiniteInput)));
        assert!(select_k_bic(&m, &[0.0; 5], 4, BicMode::Linear).is_err());
    }

    #[test]
    fn bic_recovers_two_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (t_len, n) = (300, 15);
        let truth = gaussian(t_len, 4, &mut rng);
        let load = gaussian(n, 4, &mut rng);
        let panel = &truth * load.transpose() + gaussian(t_len, n, &mut rng) * 0.01;
        let fs = extract_factors(&panel, 4).unwrap();
        let est = t_len - 24;
        let y: Vec<f64> = (0..est)
            .map(|t| 1.0 + 2.0 * fs.factors[(t, 0)] - fs.factors[(t, 1)] + 1e-3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for mode in [BicMode::Linear, BicMode::MedianPinball] {
            assert_eq!(select_k_bic(&panel, &y, 4, mode).unwrap(), 2);
        }
        assert_eq!(select_k_bic(&panel, &y, 1, BicMode::Linear).unwrap(), 1);
    }

    #[test]
    fn bic_prefers_one_factor_on_noise() {
        let mut ones = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let panel = gaussian(200, 10, &mut rng);
            let y: Vec<f64> = (0..176).map(|_| rng.sample(StandardNormal)).collect();
            if select_k_bic(&panel, &y, 6, BicMode::Linear).unwrap() == 1 {
                ones += 1;
            }
        }
        assert!(ones >= 90, "{ones} of 100 seeds chose one factor");
    }

    proptest! {
        #[test]
        fn standardize_round_trip(
            seed in 0u64..1000,
            rows in 1usize..20,
            cols in 2usize..12,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = gaussian(rows, cols, &mut rng) * 50.0;
            let sp = standardize_cross_section(&m, DEFAULT_EPS_FLOOR).unwrap();
            prop_assert!((sp.unstandardize() - &m).amax() <= 1e-12 * m.amax().max(1.0));
            for t in 0..rows {
                let r = sp.values.row(t);
                prop_assert!((r.sum() / cols as f64).abs() <= 1e-10);
                let var = r.iter().map(|v| v * v).sum::<f64>() / (cols - 1) as f64;
                prop_assert!((var - 1.0).abs() <= 1e-10);
            }
        }

        #[test]
        fn column_permutation_invariance(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = gaussian(40, 3, &mut rng) * gaussian(3, 9, &mut rng);
            let mut perm: Vec<usize> = (0..9).collect();
            perm.reverse();
            perm.swap(0, 4);
            let pm = DMatrix::from_fn(40, 9, |i, j| m[(i, perm[j])]);
            let a = extract_factors(&m, 3).unwrap();
            let b = extract_factors(&pm, 3).unwrap();
            prop_assert!((&a.factors - &b.factors).amax() <= 1e-6);
        }
    }
}
