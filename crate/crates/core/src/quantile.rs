//! Linear quantile regression.
//!
//! Fits minimize total pinball loss with a primal-dual interior-point method
//! (Mehrotra predictor-corrector) on the bounded dual of the quantile LP:
//!
//! ```text
//!   max  y'a   s.t.  X'a = (1 - q) X'1,   0 <= a <= 1
//! ```
//!
//! The regression coefficients are the multipliers of the equality
//! constraints. After convergence the solution is snapped to the basic
//! solution through the `p` smallest residuals whenever that does not raise
//! the loss, which makes the reported objective exact up to rounding.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of percentiles in the quantile grid (`q = 0.01, ..., 0.99`).
pub const N_PERCENTILES: usize = 99;

const MAX_ITER: usize = 200;
const GAP_TOL: f64 = 1e-12;
const STEP_DAMP: f64 = 0.99995;
const COLINEAR_TOL: f64 = 1e-9;

/// Percentile grid `0.01 ..= 0.99`.
pub fn percentile_grid() -> [f64; N_PERCENTILES] {
    std::array::from_fn(|i| (i + 1) as f64 / 100.0)
}

/// Pinball loss of a single quantile forecast.
#[inline]
pub fn pinball(q: f64, forecast: f64, actual: f64) -> f64 {
    if actual < forecast {
        (1.0 - q) * (forecast - actual)
    } else {
        q * (actual - forecast)
    }
}

pub fn total_pinball(q: f64, forecasts: &[f64], actuals: &[f64]) -> f64 {
    forecasts
        .iter()
        .zip(actuals)
        .map(|(&f, &a)| pinball(q, f, a))
        .sum()
}

/// Fitted linear quantile model `intercept + weights . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel {
    pub q: f64,
    pub intercept: f64,
    pub weights: Vec<f64>,
    /// In-sample total pinball loss.
    pub loss: f64,
}

impl QuantileModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        qr_predict(self, x)
    }
}

pub fn qr_predict(model: &QuantileModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            got: x.len(),
        });
    }
    Ok(model.intercept + model.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
}

/// Fits one quantile regression of `y` on the columns of `x` plus an intercept.
///
/// Columns that are linearly dependent on the intercept or on earlier
/// columns receive weight zero.
pub fn qr_fit(x: &DMatrix<f64>, y: &[f64], q: f64) -> Result<QuantileModel> {
    PreparedDesign::new(x, y)?.fit(q)
}

/// Independent fits for `q = 0.01, ..., 0.99`, ordered by `q`.
pub fn fit_percentile_grid(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<QuantileModel>> {
    let design = PreparedDesign::new(x, y)?;
    percentile_grid()
        .par_iter()
        .map(|&q| design.fit(q))
        .collect()
}

/// Design shared by all quantile fits on the same data: intercept added,
/// dependent columns removed, columns and target rescaled.
#[derive(Debug, Clone)]
pub struct PreparedDesign {
    n: usize,
    p: usize,
    /// Column-major `n x p`, intercept in column 0.
    cols: Vec<f64>,
    /// Scale of each retained column (intercept has scale 1).
    col_scale: Vec<f64>,
    /// Mean removed from each retained column (0 for the intercept).
    col_center: Vec<f64>,
    /// Original column index of each retained non-intercept column.
    kept: Vec<usize>,
    k_orig: usize,
    y: Vec<f64>,
    y_scale: f64,
    y_raw: Vec<f64>,
    x_raw: DMatrix<f64>,
}

impl PreparedDesign {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let (n, k) = x.shape();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }

        // Gram-Schmidt screen for columns already spanned by the intercept
        // and earlier retained columns.
        let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut basis: Vec<DVector<f64>> = vec![ones];
        let mut kept = Vec::new();
        for j in 0..k {
            let col = x.column(j).into_owned();
            let norm = col.norm();
            if norm == 0.0 {
                continue;
            }
            let mut r = col.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&r);
                    r.axpy(-c, b, 1.0);
                }
            }
            let rn = r.norm();
            if rn > COLINEAR_TOL * norm {
                basis.push(r / rn);
                kept.push(j);
            }
        }
        let p = kept.len() + 1;
        if n <= p {
            return Err(Error::DegenerateDesign(format!(
                "{n} observations for {p} free coefficients"
            )));
        }

        // Centred columns keep regressors that sit far from zero with little
        // spread well conditioned against the intercept.
        let mut col_scale = vec![1.0; p];
        let mut col_center = vec![0.0; p];
        let mut cols = vec![1.0; n * p];
        for (c, &j) in kept.iter().enumerate() {
            let mean = x.column(j).mean();
            let sd = (x.column(j).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
            col_scale[c + 1] = sd;
            col_center[c + 1] = mean;
            for (dst, src) in cols[(c + 1) * n..(c + 2) * n].iter_mut().zip(x.column(j).iter()) {
                *dst = (src - mean) / sd;
            }
        }
        let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let y_scale = if y_scale > 0.0 { y_scale } else { 1.0 };

        Ok(Self {
            n,
            p,
            cols,
            col_scale,
            col_center,
            kept,
            k_orig: k,
            y: y.iter().map(|v| v / y_scale).collect(),
            y_scale,
            y_raw: y.to_vec(),
            x_raw: x.clone(),
        })
    }

    pub fn fit(&self, q: f64) -> Result<QuantileModel> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!("quantile order {q} outside (0, 1)")));
        }
        let beta_ipm = self.interior_point(q)?;
        let loss_ipm = self.scaled_loss(&beta_ipm, q);
        let beta = match self.vertex_polish(&beta_ipm) {
            Some(v) if self.scaled_loss(&v, q) <= loss_ipm => v,
            _ => beta_ipm,
        };
        Ok(self.unscale(beta, q))
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cols[j * self.n + i]
    }

    /// `out = X beta`.
    fn x_mul(&self, beta: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (j, &b) in beta.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.col(j)) {
                *o += b * c;
            }
        }
    }

    /// `out = X' v`.
    fn xt_mul(&self, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(self.col(j), v);
        }
    }

    fn scaled_loss(&self, beta: &[f64], q: f64) -> f64 {
        let mut fitted = vec![0.0; self.n];
        self.x_mul(beta, &mut fitted);
        total_pinball(q, &fitted, &self.y)
    }

    fn unscale(&self, beta: Vec<f64>, q: f64) -> QuantileModel {
        let mut intercept = beta[0] * self.y_scale;
        let mut weights = vec![0.0; self.k_orig];
        for (c, &j) in self.kept.iter().enumerate() {
            weights[j] = beta[c + 1] * self.y_scale / self.col_scale[c + 1];
            intercept -= weights[j] * self.col_center[c + 1];
        }
        let mut fitted = vec![intercept; self.n];
        for (j, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                for (f, v) in fitted.iter_mut().zip(self.x_raw.column(j).iter()) {
                    *f += w * v;
                }
            }
        }
        let loss = total_pinball(q, &fitted, &self.y_raw);
        QuantileModel {
            q,
            intercept,
            weights,
            loss,
        }
    }

    /// Upper triangle of `X' diag(d) X`, mirrored into the full row-major
    /// `p x p` matrix `out`.
    fn weighted_gram(&self, d: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        let p = self.p;
        for a in 0..p {
            let src: &[f64] = if a == 0 {
                d
            } else {
                for ((t, c), di) in tmp.iter_mut().zip(self.col(a)).zip(d) {
                    *t = c * di;
                }
                tmp
            };
            let mut b = a;
            while b + 1 < p {
                let (v0, v1) = dot2(src, self.col(b), self.col(b + 1));
                out[a * p + b] = v0;
                out[b * p + a] = v0;
                out[a * p + b + 1] = v1;
                out[(b + 1) * p + a] = v1;
                b += 2;
            }
            if b < p {
                let v = dot(src, self.col(b));
                out[a * p + b] = v;
                out[b * p + a] = v;
            }
        }
    }

    fn interior_point(&self, q: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let p = self.p;
        let nf = n as f64;
        let y = &self.y[..n];

        let mut st = IpmState::new(n);
        let mut gram = vec![0.0; p * p];
        let mut chol = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        let mut rb = vec![0.0; p];

        // Least-squares start for the multipliers.
        st.dvec.fill(1.0);
        self.weighted_gram(&st.dvec, &mut st.tmp, &mut gram);
        self.xt_mul(y, &mut rhs);
        let beta0 = if cholesky(&gram, p, &mut chol) {
            chol_solve(&chol, p, &rhs)
        } else {
            vec![0.0; p]
        };
        let mut dual: Vec<f64> = beta0.iter().map(|b| -b).collect();

        let mut b_rhs = vec![0.0; p];
        st.tmp.fill(1.0 - q);
        self.xt_mul(&st.tmp, &mut b_rhs);
        st.a.fill(1.0 - q);
        st.s.fill(q);
        // `fitted` tracks X * dual, so it starts at -X beta0.
        self.x_mul(&dual, &mut st.fitted);
        let resid_scale = y.iter().zip(&st.fitted).map(|(a, b)| (a + b).abs()).sum::<f64>() / nf;
        let delta = 0.1 * resid_scale + 1e-4;
        for ((z, w), (f, yi)) in st.z.iter_mut().zip(st.w.iter_mut()).zip(st.fitted.iter().zip(y)) {
            // c - X dual = X beta0 - y
            let r = -f - yi;
            *z = r.max(0.0) + delta;
            *w = (-r).max(0.0) + delta;
        }

        let mut last_gap = f64::INFINITY;
        let mut primal_obj = 0.0;
        for _ in 0..MAX_ITER {
            let (gap, pobj, rc_norm) = st.prepare(y);
            primal_obj = pobj;
            self.xt_mul(&st.a, &mut rb);
            let mut rb_norm = 0.0f64;
            for (r, b) in rb.iter_mut().zip(&b_rhs) {
                *r = b - *r;
                rb_norm = rb_norm.max(r.abs());
            }
            last_gap = gap;
            if gap <= GAP_TOL * (1.0 + pobj.abs()) && rc_norm <= 1e-10 && rb_norm <= 1e-10 * nf {
                break;
            }

            self.weighted_gram(&st.dvec, &mut st.tmp, &mut gram);
            if !cholesky(&gram, p, &mut chol) {
                break;
            }

            // Predictor.
            st.weight_rt();
            self.reduced_solve(&chol, &rb, &mut st, &mut rhs);
            let (ap, ad) = st.affine_step();
            let mu = gap / (2.0 * nf);
            let mu_aff = st.affine_complementarity(ap, ad) / (2.0 * nf);
            let sigma = (mu_aff / mu).powi(3).min(1.0);

            // Corrector.
            st.corrector_rhs(sigma * mu);
            let dy = self.reduced_solve(&chol, &rb, &mut st, &mut rhs);
            let (ap, ad) = st.corrector_step();
            let ap = (STEP_DAMP * ap).min(1.0);
            let ad = (STEP_DAMP * ad).min(1.0);
            st.update(ap, ad);
            for (dv, step) in dual.iter_mut().zip(&dy) {
                *dv += ad * step;
            }
        }

        if !last_gap.is_finite() || last_gap > 1e-6 * (1.0 + primal_obj.abs()) {
            return Err(Error::NonConvergence {
                iterations: MAX_ITER,
                gap: last_gap,
            });
        }
        Ok(dual.iter().map(|v| -v).collect())
    }

    /// Solves `(X' D X) dy = X' (d * rt) + rb` and leaves `X dy` in `st.xdy`.
    fn reduced_solve(&self, chol: &[f64], rb: &[f64], st: &mut IpmState, rhs: &mut [f64]) -> Vec<f64> {
        self.xt_mul(&st.tmp, rhs);
        for (r, b) in rhs.iter_mut().zip(rb) {
            *r += b;
        }
        let dy = chol_solve(chol, self.p, rhs);
        self.x_mul(&dy, &mut st.xdy);
        dy
    }

    /// Basic solution interpolating the `p` observations with the smallest
    /// residuals under `beta` (skipping rows that are linearly dependent).
    fn vertex_polish(&self, beta: &[f64]) -> Option<Vec<f64>> {
        let p = self.p;
        let mut fitted = vec![0.0; self.n];
        self.x_mul(beta, &mut fitted);
        let resid: Vec<f64> = self.y.iter().zip(&fitted).map(|(y, f)| (y - f).abs()).collect();
        let cmp = |i: &usize, j: &usize| resid[*i].total_cmp(&resid[*j]).then(i.cmp(j));
        let mut order: Vec<usize> = (0..self.n).collect();
        // Only the first few candidates are usually needed, so the rest is
        // sorted lazily.
        let head = (4 * p).min(self.n);
        if head < self.n {
            order.select_nth_unstable_by(head, cmp);
        }
        order[..head].sort_by(cmp);

        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
        let mut chosen = Vec::with_capacity(p);
        let mut start = 0;
        while chosen.len() < p && start < self.n {
            if start == head {
                order[head..].sort_by(cmp);
            }
            let end = if start < head { head } else { self.n };
            for &i in &order[start..end] {
                let row = DVector::from_fn(p, |j, _| self.at(i, j));
                let norm = row.norm();
                let mut r = row.clone();
                for b in &basis {
                    let c = b.dot(&r);
                    r.axpy(-c, b, 1.0);
                }
                let rn = r.norm();
                if rn > 1e-8 * norm {
                    basis.push(r / rn);
                    chosen.push(i);
                    if chosen.len() == p {
                        break;
                    }
                }
            }
            start = end;
        }
        if chosen.len() < p {
            return None;
        }
        let xb = DMatrix::from_fn(p, p, |r, c| self.at(chosen[r], c));
        let yb = DVector::from_iterator(p, chosen.iter().map(|&i| self.y[i]));
        let sol = xb.lu().solve(&yb)?;
        sol.iter().all(|v| v.is_finite()).then(|| sol.as_slice().to_vec())
    }
}

/// Per-observation buffers of the interior-point iteration. The slack
/// `s = 1 - a` is stored separately so both bounds stay accurate near zero.
/// Largest step from the ratio test; unbounded when no component shrinks.
#[inline]
fn step_length(inv: f64) -> f64 {
    if inv > 0.0 {
        1.0 / inv
    } else {
        f64::INFINITY
    }
}

struct IpmState {
    a: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
    fitted: Vec<f64>,
    inv_a: Vec<f64>,
    inv_s: Vec<f64>,
    inv_z: Vec<f64>,
    inv_w: Vec<f64>,
    dvec: Vec<f64>,
    rt: Vec<f64>,
    tmp: Vec<f64>,
    xdy: Vec<f64>,
    da: Vec<f64>,
    rxz: Vec<f64>,
    rsw: Vec<f64>,
}

impl IpmState {
    fn new(n: usize) -> Self {
        let v = || vec![0.0; n];
        Self {
            a: v(),
            s: v(),
            z: v(),
            w: v(),
            fitted: v(),
            inv_a: v(),
            inv_s: v(),
            inv_z: v(),
            inv_w: v(),
            dvec: v(),
            rt: v(),
            tmp: v(),
            xdy: v(),
            da: v(),
            rxz: v(),
            rsw: v(),
        }
    }

    /// Residuals, reciprocals and the Newton scaling for the current point.
    /// Returns `(gap, primal objective, max |dual residual|)`.
    fn prepare(&mut self, y: &[f64]) -> (f64, f64, f64) {
        let n = y.len();
        let (a, s, z, w) = (&self.a[..n], &self.s[..n], &self.z[..n], &self.w[..n]);
        let fitted = &self.fitted[..n];
        let inv_a = &mut self.inv_a[..n];
        let inv_s = &mut self.inv_s[..n];
        let inv_z = &mut self.inv_z[..n];
        let inv_w = &mut self.inv_w[..n];
        let dvec = &mut self.dvec[..n];
        let rt = &mut self.rt[..n];
        let mut gap = 0.0;
        let mut pobj = 0.0;
        let mut rc_norm = 0.0f64;
        for i in 0..n {
            gap += a[i] * z[i] + s[i] * w[i];
            pobj -= y[i] * a[i];
            let r = -y[i] - fitted[i];
            rc_norm = rc_norm.max((r - z[i] + w[i]).abs());
            // Predictor right-hand side: rc + z - w.
            rt[i] = r;
            let (ia, is) = (1.0 / a[i], 1.0 / s[i]);
            inv_a[i] = ia;
            inv_s[i] = is;
            inv_z[i] = 1.0 / z[i];
            inv_w[i] = 1.0 / w[i];
            dvec[i] = 1.0 / (z[i] * ia + w[i] * is);
        }
        (gap, pobj, rc_norm)
    }

    fn weight_rt(&mut self) {
        for ((t, d), r) in self.tmp.iter_mut().zip(&self.dvec).zip(&self.rt) {
            *t = d * r;
        }
    }

    /// Affine-scaling direction `da` from `xdy` and its full step lengths.
    fn affine_step(&mut self) -> (f64, f64) {
        let n = self.a.len();
        let (inv_a, inv_s) = (&self.inv_a[..n], &self.inv_s[..n]);
        let (dvec, rt, xdy) = (&self.dvec[..n], &self.rt[..n], &self.xdy[..n]);
        let da = &mut self.da[..n];
        let mut p_inv = 0.0f64;
        let mut d_inv = 0.0f64;
        for i in 0..n {
            let v = dvec[i] * (xdy[i] - rt[i]);
            da[i] = v;
            let (ra, rs) = (v * inv_a[i], v * inv_s[i]);
            // dz / z = -(1 + ra), dw / w = rs - 1
            p_inv = p_inv.max(rs.max(-ra));
            d_inv = d_inv.max((1.0 + ra).max(1.0 - rs));
        }
        (step_length(p_inv).min(1.0), step_length(d_inv).min(1.0))
    }

    /// Sum of complementarity products after the affine step.
    fn affine_complementarity(&self, ap: f64, ad: f64) -> f64 {
        let n = self.a.len();
        let (a, s, z, w) = (&self.a[..n], &self.s[..n], &self.z[..n], &self.w[..n]);
        let (inv_a, inv_s, da) = (&self.inv_a[..n], &self.inv_s[..n], &self.da[..n]);
        let mut sum = 0.0;
        for i in 0..n {
            let dz = -z[i] * (1.0 + da[i] * inv_a[i]);
            let dw = w[i] * (da[i] * inv_s[i] - 1.0);
            sum += (a[i] + ap * da[i]) * (z[i] + ad * dz) + (s[i] - ap * da[i]) * (w[i] + ad * dw);
        }
        sum
    }

    /// Mehrotra corrector right-hand sides centred on `target`.
    fn corrector_rhs(&mut self, target: f64) {
        let n = self.a.len();
        let (a, s, z, w) = (&self.a[..n], &self.s[..n], &self.z[..n], &self.w[..n]);
        let (inv_a, inv_s, da, dvec) = (&self.inv_a[..n], &self.inv_s[..n], &self.da[..n], &self.dvec[..n]);
        let rt = &mut self.rt[..n];
        let tmp = &mut self.tmp[..n];
        let rxz = &mut self.rxz[..n];
        let rsw = &mut self.rsw[..n];
        for i in 0..n {
            let dz = -z[i] * (1.0 + da[i] * inv_a[i]);
            let dw = w[i] * (da[i] * inv_s[i] - 1.0);
            let cz = target - a[i] * z[i] - da[i] * dz;
            let cw = target - s[i] * w[i] + da[i] * dw;
            rxz[i] = cz;
            rsw[i] = cw;
            // rc - rxz / a + rsw / s, with rc = rt - z + w
            let r = rt[i] - z[i] + w[i] - cz * inv_a[i] + cw * inv_s[i];
            rt[i] = r;
            tmp[i] = dvec[i] * r;
        }
    }

    /// Full corrector direction from `xdy` (`da` overwritten, `dz`/`dw` into
    /// `rxz`/`rsw`) and its step lengths to the boundary.
    fn corrector_step(&mut self) -> (f64, f64) {
        let n = self.a.len();
        let (z, w) = (&self.z[..n], &self.w[..n]);
        let (inv_a, inv_s, inv_z, inv_w) = (&self.inv_a[..n], &self.inv_s[..n], &self.inv_z[..n], &self.inv_w[..n]);
        let (dvec, rt, xdy) = (&self.dvec[..n], &self.rt[..n], &self.xdy[..n]);
        let da = &mut self.da[..n];
        let rxz = &mut self.rxz[..n];
        let rsw = &mut self.rsw[..n];
        let mut p_inv = 0.0f64;
        let mut d_inv = 0.0f64;
        for i in 0..n {
            let v = dvec[i] * (xdy[i] - rt[i]);
            da[i] = v;
            let dz = (rxz[i] - z[i] * v) * inv_a[i];
            let dw = (rsw[i] + w[i] * v) * inv_s[i];
            rxz[i] = dz;
            rsw[i] = dw;
            p_inv = p_inv.max((v * inv_s[i]).max(-v * inv_a[i]));
            d_inv = d_inv.max((-dz * inv_z[i]).max(-dw * inv_w[i]));
        }
        (step_length(p_inv), step_length(d_inv))
    }

    fn update(&mut self, ap: f64, ad: f64) {
        let n = self.a.len();
        let (da, dz, dw, xdy) = (&self.da[..n], &self.rxz[..n], &self.rsw[..n], &self.xdy[..n]);
        let (a, s) = (&mut self.a[..n], &mut self.s[..n]);
        let (z, w) = (&mut self.z[..n], &mut self.w[..n]);
        let fitted = &mut self.fitted[..n];
        for i in 0..n {
            a[i] += ap * da[i];
            s[i] -= ap * da[i];
            z[i] += ad * dz[i];
            w[i] += ad * dw[i];
            fitted[i] += ad * xdy[i];
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0; 4];
    for (ca, cb) in a.chunks_exact(4).zip(b.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += ca[l] * cb[l];
        }
    }
    let mut tail = 0.0;
    for i in n / 4 * 4..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `(t . b0, t . b1)` in one pass over `t`.
#[inline]
fn dot2(t: &[f64], b0: &[f64], b1: &[f64]) -> (f64, f64) {
    let n = t.len().min(b0.len()).min(b1.len());
    let (t, b0, b1) = (&t[..n], &b0[..n], &b1[..n]);
    let mut acc0 = [0.0; 4];
    let mut acc1 = [0.0; 4];
    for ((ct, c0), c1) in t.chunks_exact(4).zip(b0.chunks_exact(4)).zip(b1.chunks_exact(4)) {
        for l in 0..4 {
            acc0[l] += ct[l] * c0[l];
            acc1[l] += ct[l] * c1[l];
        }
    }
    let (mut t0, mut t1) = (0.0, 0.0);
    for i in n / 4 * 4..n {
        t0 += t[i] * b0[i];
        t1 += t[i] * b1[i];
    }
    (
        (acc0[0] + acc0[1]) + (acc0[2] + acc0[3]) + t0,
        (acc1[0] + acc1[1]) + (acc1[2] + acc1[3]) + t1,
    )
}

/// Dense Cholesky of a small SPD matrix (row-major), retried with a growing
/// ridge when the pivots collapse. Writes the lower factor into `out`.
fn cholesky(m: &[f64], p: usize, out: &mut [f64]) -> bool {
    let scale = (0..p).map(|k| m[k * p + k]).fold(f64::MIN_POSITIVE, f64::max);
    'ridge: for ridge in [0.0, 1e-14, 1e-12, 1e-10] {
        out.fill(0.0);
        for i in 0..p {
            for j in 0..=i {
                let mut sum = m[i * p + j];
                if i == j {
                    sum += ridge * scale;
                }
                for k in 0..j {
                    sum -= out[i * p + k] * out[j * p + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        continue 'ridge;
                    }
                    out[i * p + i] = sum.sqrt();
                } else {
                    out[i * p + j] = sum / out[j * p + j];
                }
            }
        }
        return true;
    }
    false
}

fn chol_solve(l: &[f64], p: usize, rhs: &[f64]) -> Vec<f64> {
    let mut x = rhs.to_vec();
    for i in 0..p {
        for k in 0..i {
            x[i] -= l[i * p + k] * x[k];
        }
        x[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            x[i] -= l[k * p + i] * x[k];
        }
        x[i] /= l[i * p + i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn pinball_examples() {
        assert_eq!(pinball(0.3, 5.0, 5.0), 0.0);
        assert!((pinball(0.5, 2.0, 4.0) - 1.0).abs() < 1e-15);
        assert!((pinball(0.9, 4.0, 2.0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn predict_examples() {
        let m = QuantileModel {
            q: 0.5,
            intercept: 0.0,
            weights: vec![2.0, -1.0],
            loss: 0.0,
        };
        assert_eq!(qr_predict(&m, &[3.0, 4.0]).unwrap(), 2.0);
        let z = QuantileModel {
            q: 0.5,
            intercept: 7.5,
            weights: vec![0.0, 0.0],
            loss: 0.0,
        };
        assert_eq!(z.predict(&[3.0, 4.0]).unwrap(), 7.5);
        assert!(matches!(qr_predict(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn constant_target_has_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(40, 2, |_, _| rng.random::<f64>());
        let y = vec![3.25; 40];
        for q in [0.1, 0.5, 0.9] {
            let m = qr_fit(&x, &y, q).unwrap();
            assert!(m.loss < 1e-10, "q={q} loss={}", m.loss);
            assert!((m.intercept + m.weights.iter().sum::<f64>() * 0.0 - 3.25).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_fit_recovers_identity() {
        let x = DMatrix::from_fn(30, 1, |i, _| (i as f64 * 0.37).sin() * 10.0);
        let y: Vec<f64> = x.column(0).iter().copied().collect();
        let m = qr_fit(&x, &y, 0.5).unwrap();
        assert!(m.loss < 1e-10);
        assert!((m.weights[0] - 1.0).abs() < 1e-9);
        assert!(m.intercept.abs() < 1e-9);
        for i in [0, 7, 29] {
            assert!((m.predict(&[x[(i, 0)]]).unwrap() - y[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_has_99_models_and_normal_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let y: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let x = DMatrix::<f64>::zeros(200, 0);
        let grid = fit_percentile_grid(&x, &y).unwrap();
        assert_eq!(grid.len(), 99);
        assert!(grid.windows(2).all(|w| w[0].q < w[1].q));
        assert!((grid[89].intercept - 1.2816).abs() < 0.15);
    }

    #[test]
    fn intercept_only_quantile_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..101).map(|_| rng.random::<f64>() * 10.0).collect();
        let x = DMatrix::<f64>::zeros(101, 0);
        for q in [0.05, 0.3, 0.5, 0.77] {
            let m = qr_fit(&x, &y, q).unwrap();
            let below = y.iter().filter(|&&v| v < m.intercept - 1e-9).count() as f64 / 101.0;
            let at_or_below = y.iter().filter(|&&v| v <= m.intercept + 1e-9).count() as f64 / 101.0;
            assert!(below <= q && q <= at_or_below, "q={q} below={below} atb={at_or_below}");
        }
    }

    #[test]
    fn colinear_columns_get_zero_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = base.iter().map(|b| 2.0 * b + rng.random::<f64>() * 0.1).collect();
        let x6 = DMatrix::from_fn(60, 6, |i, _| base[i]);
        let x1 = DMatrix::from_fn(60, 1, |i, _| base[i]);
        for q in [0.1, 0.5, 0.9] {
            let a = qr_fit(&x6, &y, q).unwrap();
            let b = qr_fit(&x1, &y, q).unwrap();
            assert!((a.loss - b.loss).abs() <= 1e-9 * b.loss.max(1.0));
            assert!(a.weights[1..].iter().all(|&w| w == 0.0));
        }
    }

    #[test]
    fn invalid_inputs() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0, 5.0]);
        assert!(matches!(qr_fit(&x, &[1.0, 2.0, 3.0], 0.5), Err(Error::DegenerateDesign(_))));
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64);
        assert!(qr_fit(&x, &[0.0; 10], 1.0).is_err());
        assert!(matches!(qr_fit(&x, &[0.0; 9], 0.5), Err(Error::DimensionMismatch { .. })));
    }
}
