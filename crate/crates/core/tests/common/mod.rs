//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Exhaustive vertex search for linear quantile regression with intercept.
///
/// The pinball objective is piecewise linear and convex, so some optimum
/// interpolates `p` observations exactly (when the design has full column
/// rank). Enumerating every `p`-subset and keeping the best objective gives
/// the global minimum.
pub fn qr_vertex_oracle(x: &DMatrix<f64>, y: &[f64], q: f64) -> f64 {
    let n = x.nrows();
    let p = x.ncols() + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        let sub = DMatrix::from_fn(p, p, |r, c| design[(idx[r], c)]);
        let rhs = DVector::from_iterator(p, idx.iter().map(|&i| y[i]));
        if let Some(beta) = sub.lu().solve(&rhs) {
            if beta.iter().all(|b| b.is_finite()) {
                let mut loss = 0.0;
                for i in 0..n {
                    let f: f64 = (0..p).map(|j| design[(i, j)] * beta[j]).sum();
                    let r = y[i] - f;
                    loss += if r < 0.0 { (q - 1.0) * r } else { q * r };
                    if loss >= best {
                        break;
                    }
                }
                best = best.min(loss);
            }
        }
        // next combination
        let mut k = p;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < n - p + k {
                idx[k] += 1;
                for m in k + 1..p {
                    idx[m] = idx[m - 1] + 1;
                }
                break;
            }
            if k == 0 {
                return best;
            }
        }
    }
}

/// Ordinary least squares through the explicit normal equations.
pub fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    let xt = x.transpose();
    let xtx = &xt * x;
    let inv = xtx.try_inverse().expect("invertible normal matrix");
    inv * (xt * DVector::from_column_slice(y))
}

/// Largest principal angle (radians) between the column spaces of `a` and `b`.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let m = qa.transpose() * qb;
    let sv = m.singular_values();
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    smallest.acos()
}

/// Linear quantile regression with intercept solved as a linear program by a
/// dense tableau simplex (Bland's rule), independent of the library solver.
///
/// Variables are `beta+`, `beta-`, and the positive and negative residual
/// parts `u`, `v`; each row starts with `u_i` or `v_i` basic. Returns the
/// total pinball loss of the optimal coefficients.
pub fn qr_simplex_oracle(x: &DMatrix<f64>, y: &[f64], q: f64) -> f64 {
    let n = x.nrows();
    let p = x.ncols() + 1;
    let design = |i: usize, j: usize| if j == 0 { 1.0 } else { x[(i, j - 1)] };
    let m = 2 * p + 2 * n;
    let mut cost = vec![0.0; m];
    for i in 0..n {
        cost[2 * p + i] = q;
        cost[2 * p + n + i] = 1.0 - q;
    }
    // tableau rows: [A | b]
    let mut t = vec![vec![0.0; m + 1]; n];
    let mut basis = vec![0usize; n];
    for i in 0..n {
        let sign = if y[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            t[i][j] = sign * design(i, j);
            t[i][p + j] = -sign * design(i, j);
        }
        t[i][2 * p + i] = sign;
        t[i][2 * p + n + i] = -sign;
        t[i][m] = sign * y[i];
        basis[i] = if sign > 0.0 { 2 * p + i } else { 2 * p + n + i };
    }
    for _ in 0..100_000 {
        // reduced costs
        let entering = (0..m).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let r = cost[j] - (0..n).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
            r < -1e-11
        });
        let Some(j) = entering else { break };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if t[i][j] > 1e-11 {
                let ratio = t[i][m] / t[i][j];
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let l = leave.expect("pinball LP is bounded below");
        let piv = t[l][j];
        for v in t[l].iter_mut() {
            *v /= piv;
        }
        let pivot_row = t[l].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != l && row[j] != 0.0 {
                let f = row[j];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        basis[l] = j;
    }
    let mut beta = vec![0.0; p];
    for (i, &b) in basis.iter().enumerate() {
        if b < p {
            beta[b] += t[i][m];
        } else if b < 2 * p {
            beta[b - p] -= t[i][m];
        }
    }
    (0..n)
        .map(|i| {
            let f: f64 = (0..p).map(|j| design(i, j) * beta[j]).sum();
            let r = y[i] - f;
            if r < 0.0 {
                (q - 1.0) * r
            } else {
                q * r
            }
        })
        .sum()
}
