//! Normal-distribution probability integral transform.
//!
//! A value is mapped through the empirical CDF of a fitting sample and then
//! through the inverse standard normal CDF. The empirical CDF is the
//! piecewise-linear curve through the order statistics at plotting positions
//! `(rank - 0.5) / n` (tied values share their mid-rank), held constant beyond
//! the sample range and clamped into `[eps, 1 - eps]` so the output is always
//! finite. The inverse interpolates the same knots in the other direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_cdf, normal_quantile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpitMap {
    sorted_sample: Vec<f64>,
    clamp_eps: f64,
    /// Distinct sample values.
    knots_x: Vec<f64>,
    /// Mid-rank plotting positions of `knots_x`.
    knots_p: Vec<f64>,
}

impl NpitMap {
    /// Fits with the default clamp `1 / (2n)`.
    pub fn fit(sample: &[f64]) -> Result<Self> {
        let n = sample.len().max(1);
        Self::fit_with_eps(sample, 0.5 / n as f64)
    }

    pub fn fit_with_eps(sample: &[f64], clamp_eps: f64) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::SampleTooSmall {
                needed: 2,
                got: sample.len(),
            });
        }
        if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "clamp_eps must lie in (0, 0.5), got {clamp_eps}"
            )));
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted[0] == sorted[sorted.len() - 1] {
            return Err(Error::DegenerateSample);
        }

        let n = sorted.len() as f64;
        let mut knots_x = Vec::new();
        let mut knots_p = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            // ranks i+1 ..= j+1, mid-rank (i + j + 2) / 2
            let mid_rank = 0.5 * (i + j + 2) as f64;
            knots_x.push(sorted[i]);
            knots_p.push((mid_rank - 0.5) / n);
            i = j + 1;
        }

        Ok(Self {
            sorted_sample: sorted,
            clamp_eps,
            knots_x,
            knots_p,
        })
    }

    pub fn n(&self) -> usize {
        self.sorted_sample.len()
    }

    pub fn clamp_eps(&self) -> f64 {
        self.clamp_eps
    }

    pub fn sorted_sample(&self) -> &[f64] {
        &self.sorted_sample
    }

    /// Empirical CDF value before clamping.
    pub fn ecdf(&self, x: f64) -> f64 {
        let xs = &self.knots_x;
        let ps = &self.knots_p;
        if x <= xs[0] {
            return ps[0];
        }
        let last = xs.len() - 1;
        if x >= xs[last] {
            return ps[last];
        }
        // first knot strictly greater than x
        let hi = xs.partition_point(|&k| k <= x);
        let lo = hi - 1;
        ps[lo] + (x - xs[lo]) / (xs[hi] - xs[lo]) * (ps[hi] - ps[lo])
    }

    pub fn transform(&self, x: f64) -> f64 {
        let p = self.ecdf(x).clamp(self.clamp_eps, 1.0 - self.clamp_eps);
        normal_quantile(p)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        let p = normal_cdf(y);
        let xs = &self.knots_x;
        let ps = &self.knots_p;
        if p <= ps[0] {
            return xs[0];
        }
        let last = ps.len() - 1;
        if p >= ps[last] {
            return xs[last];
        }
        let hi = ps.partition_point(|&k| k <= p);
        let lo = hi - 1;
        xs[lo] + (p - ps[lo]) / (ps[hi] - ps[lo]) * (xs[hi] - xs[lo])
    }

    pub fn transform_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.transform(x)).collect()
    }

    pub fn inverse_all(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.inverse(y)).collect()
    }
}

/// How series are mapped into the modelling domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Npit,
    Identity,
}

/// A fitted map into the modelling domain and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriceMap {
    Identity,
    Npit(NpitMap),
    /// Fitted on a sample without variation: everything maps to 0 and back
    /// to the constant.
    Constant(f64),
}

impl PriceMap {
    /// Fits the map selected by `transform` on `sample`.
    pub fn fit(sample: &[f64], transform: Transform) -> Result<Self> {
        match transform {
            Transform::Identity => Ok(PriceMap::Identity),
            Transform::Npit => match NpitMap::fit(sample) {
                Ok(m) => Ok(PriceMap::Npit(m)),
                Err(Error::DegenerateSample) => Ok(PriceMap::Constant(sample[0])),
                Err(e) => Err(e),
            },
        }
    }

    pub fn transform(&self, x: f64) -> f64 {
        match self {
            PriceMap::Identity => x,
            PriceMap::Npit(m) => m.transform(x),
            PriceMap::Constant(_) => 0.0,
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match self {
            PriceMap::Identity => y,
            PriceMap::Npit(m) => m.inverse(y),
            PriceMap::Constant(c) => *c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plotting_position_example() {
        let m = NpitMap::fit(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        // N^{-1}(0.375)
        assert!((m.transform(2.0) - -0.3186393639643751630219485).abs() < 1e-12);
    }

    #[test]
    fn median_maps_to_zero_and_back() {
        let odd = NpitMap::fit(&[5.0, 1.0, 3.0]).unwrap();
        assert!(odd.transform(3.0).abs() < 1e-15);
        assert!((odd.inverse(0.0) - 3.0).abs() < 1e-12);
        let even = NpitMap::fit(&[1.0, 2.0, 3.0, 10.0]).unwrap();
        assert!((even.inverse(0.0) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn clamped_outside_sample() {
        let m = NpitMap::fit(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let low = m.transform(-1e9);
        assert!(low.is_finite());
        assert!((low - normal_quantile(m.clamp_eps())).abs() < 1e-15);
        assert!(m.transform(1e300).is_finite());
        assert_eq!(m.inverse(-50.0), 1.0);
        assert_eq!(m.inverse(50.0), 4.0);
    }

    #[test]
    fn degenerate_and_short_samples_rejected() {
        assert!(matches!(NpitMap::fit(&[2.0, 2.0, 2.0]), Err(Error::DegenerateSample)));
        assert!(matches!(NpitMap::fit(&[2.0]), Err(Error::SampleTooSmall { .. })));
        assert!(NpitMap::fit_with_eps(&[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn price_map_fallbacks() {
        let c = PriceMap::fit(&[7.0, 7.0], Transform::Npit).unwrap();
        assert_eq!(c, PriceMap::Constant(7.0));
        assert_eq!(c.transform(100.0), 0.0);
        assert_eq!(c.inverse(1.3), 7.0);
        let id = PriceMap::fit(&[1.0, 2.0], Transform::Identity).unwrap();
        assert_eq!(id.transform(-3.5), -3.5);
        assert_eq!(id.inverse(-3.5), -3.5);
    }

    #[test]
    fn ties_share_mid_rank() {
        let m = NpitMap::fit(&[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!(m.transform(2.0).abs() < 1e-15);
        for x in [1.0, 2.0, 3.0] {
            assert!((m.inverse(m.transform(x)) - x).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn round_trip_in_sample(sample in prop::collection::vec(-500.0f64..3000.0, 2..300)) {
            prop_assume!(sample.iter().any(|&v| v != sample[0]));
            let m = NpitMap::fit(&sample).unwrap();
            for &x in &sample {
                prop_assert!((m.inverse(m.transform(x)) - x).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn transform_preserves_order(
            sample in prop::collection::vec(-100.0f64..100.0, 5..200),
            queries in prop::collection::vec(-150.0f64..150.0, 100),
        ) {
            prop_assume!(sample.iter().any(|&v| v != sample[0]));
            let m = NpitMap::fit(&sample).unwrap();
            let mut sorted = queries.clone();
            sorted.sort_by(f64::total_cmp);
            let ys: Vec<f64> = sorted.iter().map(|&x| m.transform(x)).collect();
            prop_assert!(ys.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(ys.iter().all(|y| y.is_finite()));
            // strictly increasing between distinct knots inside the range
            let (lo, hi) = (m.sorted_sample()[0], m.sorted_sample()[m.n() - 1]);
            for w in sorted.windows(2) {
                if w[0] > lo && w[1] < hi && w[1] - w[0] > 1e-9 {
                    prop_assert!(m.transform(w[0]) < m.transform(w[1]));
                }
            }
        }
    }
}
