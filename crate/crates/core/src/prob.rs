//! Probabilistic forecasts from the point-forecast panel.
//!
//! Every forecast day has its own working domain: a price map fitted on the
//! realized prices of the calibration days before it. Panel forecasts and
//! prices are mapped into that domain, each method produces 99 percentiles
//! there, the percentiles are sorted and then mapped back to price units
//! one by one.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{
    extract_factors, select_k_bic_factors, standardize_cross_section, with_intercept, BicMode,
    DEFAULT_EPS_FLOOR, DEFAULT_K_MAX,
};
use crate::npit::{PriceMap, Transform};
use crate::point::{ols_fit, ForecastPanel, DEFAULT_LOOKBACK};
use crate::quantile::{percentile_grid, PreparedDesign, N_PERCENTILES};
use crate::stats::quantile_sorted;
use crate::timeseries::{HourlyValues, HOURS};

/// 99 percentiles of one `(day, hour)`.
pub type Percentiles = [f64; N_PERCENTILES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "HS")]
    Hs,
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "QRA")]
    Qra,
    #[serde(rename = "QRM")]
    Qrm,
    #[serde(rename = "FQRA")]
    Fqra,
    #[serde(rename = "FQRM")]
    Fqrm,
    #[serde(rename = "sFQRA")]
    Sfqra,
    #[serde(rename = "sFQRM")]
    Sfqrm,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Hs,
        Method::Cp,
        Method::Qra,
        Method::Qrm,
        Method::Fqra,
        Method::Fqrm,
        Method::Sfqra,
        Method::Sfqrm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Hs => "HS",
            Method::Cp => "CP",
            Method::Qra => "QRA",
            Method::Qrm => "QRM",
            Method::Fqra => "FQRA",
            Method::Fqrm => "FQRM",
            Method::Sfqra => "sFQRA",
            Method::Sfqrm => "sFQRM",
        }
    }

    /// Factor specification for the four factor methods.
    pub fn fqr(self) -> Option<(FqrMode, bool)> {
        match self {
            Method::Fqra => Some((FqrMode::Fqra, false)),
            Method::Fqrm => Some((FqrMode::Fqrm, false)),
            Method::Sfqra => Some((FqrMode::Fqra, true)),
            Method::Sfqrm => Some((FqrMode::Fqrm, true)),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

/// Sorts percentiles into ascending order.
pub fn rearrange_quantiles(raw: &[f64]) -> Vec<f64> {
    let mut v = raw.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Nominal coverages `0.50, 0.52, ..., 0.98`.
pub fn level_grid() -> Vec<f64> {
    (0..25).map(|i| (50 + 2 * i) as f64 / 100.0).collect()
}

/// Percentile indices (into the 99-point grid) of the lower and upper bound
/// of the interval with nominal coverage `level`.
pub fn level_indices(level: f64) -> Result<(usize, usize)> {
    let half_alpha = (1.0 - level) / 2.0 * 100.0;
    let i = half_alpha.round();
    if !(level > 0.0 && level < 1.0) || (half_alpha - i).abs() > 1e-9 || !(1.0..=49.0).contains(&i) {
        return Err(Error::LevelNotOnGrid(level));
    }
    let i = i as usize;
    Ok((i - 1, N_PERCENTILES - i))
}

/// Historical-simulation interval: empirical error quantiles added to the
/// point forecast.
pub fn hs_interval(avg_fc: f64, errors: &[f64], alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let sorted = sorted_errors(errors)?;
    Ok((
        avg_fc + quantile_sorted(&sorted, alpha / 2.0),
        avg_fc + quantile_sorted(&sorted, 1.0 - alpha / 2.0),
    ))
}

/// Conformal interval: symmetric around the point forecast with half-width
/// the `(1 - alpha)` quantile of the absolute errors.
pub fn cp_interval(avg_fc: f64, errors: &[f64], alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let sorted = sorted_errors(&abs)?;
    let lambda = quantile_sorted(&sorted, 1.0 - alpha);
    Ok((avg_fc - lambda, avg_fc + lambda))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1)")))
    }
}

fn sorted_errors(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::InsufficientErrors { needed: 1, got: 0 });
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut v = errors.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Historical-simulation percentiles for one `(day, hour)`.
pub fn hs_percentiles(avg_fc: f64, errors: &[f64]) -> Result<Percentiles> {
    let sorted = sorted_errors(errors)?;
    let grid = percentile_grid();
    Ok(std::array::from_fn(|i| avg_fc + quantile_sorted(&sorted, grid[i])))
}

/// Conformal percentiles for one `(day, hour)`: the bounds of every
/// symmetric interval, with the point forecast at the median.
pub fn cp_percentiles(avg_fc: f64, errors: &[f64]) -> Result<Percentiles> {
    let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let sorted = sorted_errors(&abs)?;
    let grid = percentile_grid();
    Ok(std::array::from_fn(|i| {
        let q = grid[i];
        if i == N_PERCENTILES / 2 {
            avg_fc
        } else if q < 0.5 {
            avg_fc - quantile_sorted(&sorted, 1.0 - 2.0 * q)
        } else {
            avg_fc + quantile_sorted(&sorted, 2.0 * q - 1.0)
        }
    }))
}

/// Fits 99 quantile regressions of `y` on `x_est` and evaluates them on the
/// rows of `x_new`. Also returns each fit's in-sample pinball loss.
pub fn qr_percentiles(
    x_est: &DMatrix<f64>,
    y: &[f64],
    x_new: &DMatrix<f64>,
) -> Result<(Vec<Percentiles>, Percentiles)> {
    if x_new.ncols() != x_est.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x_est.ncols(),
            got: x_new.ncols(),
        });
    }
    let design = PreparedDesign::new(x_est, y)?;
    let models = percentile_grid()
        .par_iter()
        .map(|&q| design.fit(q))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![[0.0; N_PERCENTILES]; x_new.nrows()];
    let mut row = vec![0.0; x_new.ncols()];
    for (r, o) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = x_new[(r, j)];
        }
        for (i, m) in models.iter().enumerate() {
            o[i] = m.predict(&row)?;
        }
    }
    Ok((out, std::array::from_fn(|i| models[i].loss)))
}

/// QRA: the selected point forecasts as regressors. One row per day.
pub fn qra_forecast(
    forecasts_est: &DMatrix<f64>,
    prices: &[f64],
    forecasts_new: &DMatrix<f64>,
) -> Result<Vec<Percentiles>> {
    Ok(qr_percentiles(forecasts_est, prices, forecasts_new)?.0)
}

/// QRM: the averaged point forecast as the only regressor.
pub fn qrm_forecast(avg_est: &[f64], prices: &[f64], avg_new: &[f64]) -> Result<Vec<Percentiles>> {
    let x_est = DMatrix::from_column_slice(avg_est.len(), 1, avg_est);
    let x_new = DMatrix::from_column_slice(avg_new.len(), 1, avg_new);
    Ok(qr_percentiles(&x_est, prices, &x_new)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FqrMode {
    /// Quantile regression on the factors.
    Fqra,
    /// Quantile regression on the least-squares fit of the factors.
    Fqrm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FqrSpec {
    pub mode: FqrMode,
    pub standardize: bool,
    pub k_max: usize,
    pub eps_floor: f64,
    /// Skip BIC and use this many factors.
    pub k_fixed: Option<usize>,
}

impl FqrSpec {
    pub fn new(mode: FqrMode, standardize: bool) -> Self {
        Self {
            mode,
            standardize,
            k_max: DEFAULT_K_MAX,
            eps_floor: DEFAULT_EPS_FLOOR,
            k_fixed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FqrOutput {
    /// Raw (unsorted) percentiles for each forecast row, in the units of `y`.
    pub percentiles: Vec<Percentiles>,
    /// Number of factors used.
    pub k: usize,
    /// In-sample pinball loss of each percentile fit, in regression units.
    pub losses: Percentiles,
}

/// Factor quantile regression for one forecast window.
///
/// `window` stacks the estimation rows (those with a target in `y`) on top
/// of the forecast rows. Factors come from the whole window; the regression
/// weights from the estimation rows only.
pub fn fqr_forecast(window: &DMatrix<f64>, y: &[f64], spec: &FqrSpec) -> Result<FqrOutput> {
    let (t_len, n) = window.shape();
    let n_est = y.len();
    if n_est == 0 || n_est >= t_len {
        return Err(Error::DimensionMismatch {
            expected: t_len.saturating_sub(1),
            got: n_est,
        });
    }
    if spec.k_max == 0 {
        return Err(Error::KTooLarge { k: 0, max: t_len.min(n) });
    }
    let standardized = if spec.standardize {
        Some(standardize_cross_section(window, spec.eps_floor)?)
    } else {
        None
    };
    let (z, target) = match &standardized {
        Some(sp) => (&sp.values, sp.standardize_target(y)?),
        None => (window, y.to_vec()),
    };

    let k_cap = spec.k_fixed.unwrap_or(spec.k_max).min(t_len.min(n));
    if let Some(k) = spec.k_fixed {
        if k > t_len.min(n) {
            return Err(Error::KTooLarge { k, max: t_len.min(n) });
        }
    }
    let fs = extract_factors(z, k_cap.max(1))?;
    let k = match (fs.k, spec.k_fixed) {
        (0, _) => 0,
        (_, Some(k)) => k.min(fs.k),
        (_, None) => {
            let mode = match spec.mode {
                FqrMode::Fqra => BicMode::MedianPinball,
                FqrMode::Fqrm => BicMode::Linear,
            };
            select_k_bic_factors(&fs, &target, k_cap, mode)?
        }
    };
    let f = fs.leading(k);

    let regressors = match spec.mode {
        FqrMode::Fqra => f,
        FqrMode::Fqrm => {
            let design = with_intercept(&f);
            let est = design.rows(0, n_est).into_owned();
            let fit = ols_fit(&est, &target)?;
            let fitted = design * DVector::from_column_slice(&fit.coef);
            DMatrix::from_column_slice(t_len, 1, fitted.as_slice())
        }
    };
    let x_est = regressors.rows(0, n_est).into_owned();
    let x_new = regressors.rows(n_est, t_len - n_est).into_owned();
    let (mut percentiles, losses) = qr_percentiles(&x_est, &target, &x_new)?;
    if let Some(sp) = &standardized {
        for (i, row) in percentiles.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = sp.back_transform(n_est + i, *v);
            }
        }
    }
    Ok(FqrOutput { percentiles, k, losses })
}

/// Settings shared by all probabilistic methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbSettings {
    /// Days of history behind every forecast day.
    pub calibration_days: usize,
    pub averaging_windows: Vec<usize>,
    pub k_max: usize,
    pub eps_floor: f64,
    pub transform: Transform,
}

impl Default for ProbSettings {
    fn default() -> Self {
        Self {
            calibration_days: DEFAULT_LOOKBACK,
            averaging_windows: crate::point::PAPER_AVERAGING_WINDOWS.to_vec(),
            k_max: DEFAULT_K_MAX,
            eps_floor: DEFAULT_EPS_FLOOR,
            transform: Transform::Npit,
        }
    }
}

/// Percentiles per `(day, hour)`, in the working domain and in price units.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSurface {
    pub method: Method,
    pub start_date: NaiveDate,
    pub first_day: usize,
    pub n_days: usize,
    pub calibration_days: usize,
    /// Sorted working-domain percentiles, one entry per `(day, hour)`.
    pub transformed: Vec<Percentiles>,
    /// Sorted price-unit percentiles.
    pub natural: Vec<Percentiles>,
    /// Factors used on each day (factor methods only).
    pub k_used: Vec<Option<usize>>,
}

impl QuantileSurface {
    pub fn days(&self) -> std::ops::Range<usize> {
        self.first_day..self.first_day + self.n_days
    }

    #[inline]
    pub fn row(&self, day: usize, hour: usize) -> usize {
        HOURS * (day - self.first_day) + hour - 1
    }

    /// Writes `date,hour,method,q01..q99` in price units.
    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        if let Some(h) = config_hash {
            writeln!(out, "# config_hash={h}").map_err(io)?;
        }
        write!(out, "date,hour,method").map_err(io)?;
        for i in 1..=N_PERCENTILES {
            write!(out, ",q{i:02}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        for day in self.days() {
            let date = self.start_date + chrono::Duration::days(day as i64);
            for hour in 1..=HOURS {
                write!(out, "{},{hour},{}", date.format("%Y-%m-%d"), self.method).map_err(io)?;
                for v in &self.natural[self.row(day, hour)] {
                    write!(out, ",{v}").map_err(io)?;
                }
                writeln!(out).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }
}

/// Mapped panel window and prices for one forecast day.
struct DayData {
    map: PriceMap,
    /// `24 (C + 1)` rows by the panel's columns.
    window: DMatrix<f64>,
    /// Mapped prices of the `C` calibration days.
    prices: Vec<f64>,
    /// Mapped average of the averaging windows over the same rows as `window`.
    avg: Vec<f64>,
    avg_cols: Vec<usize>,
}

fn day_data(
    panel: &ForecastPanel,
    prices: &HourlyValues,
    day: usize,
    settings: &ProbSettings,
    avg_cols: &[usize],
) -> Result<DayData> {
    let c = settings.calibration_days;
    let from = day - c;
    let raw_prices = prices.slice_days(from, day)?.values;
    let map = PriceMap::fit(&raw_prices, settings.transform)?;
    let r0 = panel.row(from, 1);
    let rows = HOURS * (c + 1);
    let window = panel.values.rows(r0, rows).map(|v| map.transform(v));
    let inv = 1.0 / avg_cols.len() as f64;
    let avg = (0..rows)
        .map(|r| avg_cols.iter().map(|&j| window[(r, j)]).sum::<f64>() * inv)
        .collect();
    Ok(DayData {
        prices: raw_prices.iter().map(|&v| map.transform(v)).collect(),
        map,
        window,
        avg,
        avg_cols: avg_cols.to_vec(),
    })
}

/// Working-domain percentiles of the 24 hours of one day.
fn day_percentiles(method: Method, data: &DayData, settings: &ProbSettings) -> Result<(Vec<Percentiles>, Option<usize>)> {
    let c = settings.calibration_days;
    let est = HOURS * c;
    let per_hour = |hour: usize| -> (Vec<usize>, usize) {
        ((0..c).map(|i| HOURS * i + hour - 1).collect(), est + hour - 1)
    };
    match method {
        Method::Hs | Method::Cp => {
            let mut out = Vec::with_capacity(HOURS);
            for hour in 1..=HOURS {
                let (rows, new) = per_hour(hour);
                let errors: Vec<f64> = rows.iter().map(|&r| data.prices[r] - data.avg[r]).collect();
                out.push(if method == Method::Hs {
                    hs_percentiles(data.avg[new], &errors)?
                } else {
                    cp_percentiles(data.avg[new], &errors)?
                });
            }
            Ok((out, None))
        }
        Method::Qra | Method::Qrm => {
            let mut out = Vec::with_capacity(HOURS);
            for hour in 1..=HOURS {
                let (rows, new) = per_hour(hour);
                let y: Vec<f64> = rows.iter().map(|&r| data.prices[r]).collect();
                let pct = if method == Method::Qra {
                    let cols = &data.avg_cols;
                    let x_est = DMatrix::from_fn(c, cols.len(), |i, j| data.window[(rows[i], cols[j])]);
                    let x_new = DMatrix::from_fn(1, cols.len(), |_, j| data.window[(new, cols[j])]);
                    qra_forecast(&x_est, &y, &x_new)?
                } else {
                    let x_est: Vec<f64> = rows.iter().map(|&r| data.avg[r]).collect();
                    qrm_forecast(&x_est, &y, &[data.avg[new]])?
                };
                out.push(pct[0]);
            }
            Ok((out, None))
        }
        _ => {
            let (mode, standardize) = method.fqr().expect("factor method");
            let spec = FqrSpec {
                mode,
                standardize,
                k_max: settings.k_max,
                eps_floor: settings.eps_floor,
                k_fixed: None,
            };
            let out = fqr_forecast(&data.window, &data.prices, &spec)?;
            Ok((out.percentiles, Some(out.k)))
        }
    }
}

/// Runs `method` for every day in `days`.
///
/// `panel` must cover the `calibration_days` before the first forecast day
/// and `prices` the realized target prices over the same span.
pub fn forecast_surface(
    method: Method,
    panel: &ForecastPanel,
    prices: &HourlyValues,
    days: std::ops::Range<usize>,
    settings: &ProbSettings,
) -> Result<QuantileSurface> {
    let c = settings.calibration_days;
    if c < 2 {
        return Err(Error::InvalidParameter("calibration window must span at least 2 days".into()));
    }
    if days.is_empty() {
        return Err(Error::InvalidParameter("empty forecast range".into()));
    }
    if days.start < panel.first_day + c || days.end > panel.first_day + panel.n_days {
        return Err(Error::InsufficientHistory(format!(
            "forecast days {days:?} need panel days {}..{} but the panel covers {:?}",
            days.start - c.min(days.start),
            days.end,
            panel.days()
        )));
    }
    if days.start - c < prices.first_day || prices.days().end < days.end - 1 {
        return Err(Error::MisalignedIndex(format!(
            "prices {:?} do not cover calibration days from {}",
            prices.days(),
            days.start - c
        )));
    }
    let avg_cols: Vec<usize> = settings
        .averaging_windows
        .iter()
        .map(|&t| panel.tau_column(t))
        .collect::<Result<_>>()?;
    if avg_cols.is_empty() {
        return Err(Error::InvalidParameter("no averaging windows".into()));
    }

    let per_day: Vec<(Vec<Percentiles>, Vec<Percentiles>, Option<usize>)> = days
        .clone()
        .into_par_iter()
        .map(|day| {
            let data = day_data(panel, prices, day, settings, &avg_cols)?;
            let (raw, k) = day_percentiles(method, &data, settings)?;
            let mut transformed = Vec::with_capacity(HOURS);
            let mut natural = Vec::with_capacity(HOURS);
            for r in raw {
                let sorted: Percentiles = rearrange_quantiles(&r).try_into().expect("99 values");
                natural.push(sorted.map(|v| data.map.inverse(v)));
                transformed.push(sorted);
            }
            Ok((transformed, natural, k))
        })
        .collect::<Result<_>>()?;

    let mut surface = QuantileSurface {
        method,
        start_date: panel.start_date,
        first_day: days.start,
        n_days: days.len(),
        calibration_days: c,
        transformed: Vec::with_capacity(HOURS * days.len()),
        natural: Vec::with_capacity(HOURS * days.len()),
        k_used: Vec::with_capacity(days.len()),
    };
    for (t, n, k) in per_day {
        surface.transformed.extend(t);
        surface.natural.extend(n);
        surface.k_used.push(k);
    }
    Ok(surface)
}

/// Interval bounds per nominal coverage and `(day, hour)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    pub method: Method,
    pub start_date: NaiveDate,
    pub first_day: usize,
    pub n_days: usize,
    pub levels: Vec<f64>,
    /// `lower[level][row]`, rows ordered by day then hour.
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl IntervalSet {
    pub fn days(&self) -> std::ops::Range<usize> {
        self.first_day..self.first_day + self.n_days
    }

    pub fn level_index(&self, level: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| (l - level).abs() < 1e-9)
            .ok_or(Error::LevelNotOnGrid(level))
    }

    #[inline]
    pub fn bounds(&self, level_idx: usize, day: usize, hour: usize) -> (f64, f64) {
        let r = HOURS * (day - self.first_day) + hour - 1;
        (self.lower[level_idx][r], self.upper[level_idx][r])
    }

    /// Writes `date,hour,method,level,lower,upper`, level in percent.
    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        if let Some(h) = config_hash {
            writeln!(out, "# config_hash={h}").map_err(io)?;
        }
        writeln!(out, "date,hour,method,level,lower,upper").map_err(io)?;
        for day in self.days() {
            let date = self.start_date + chrono::Duration::days(day as i64);
            for hour in 1..=HOURS {
                for (li, level) in self.levels.iter().enumerate() {
                    let (lo, hi) = self.bounds(li, day, hour);
                    writeln!(
                        out,
                        "{},{hour},{},{},{lo},{hi}",
                        date.format("%Y-%m-%d"),
                        self.method,
                        (level * 100.0).round() as u32
                    )
                    .map_err(io)?;
                }
            }
        }
        out.flush().map_err(io)
    }

    /// Reads a file written by [`IntervalSet::write_csv`]. `start_date` is
    /// the calendar date of day index 0.
    pub fn read_csv(path: &Path, start_date: NaiveDate) -> Result<IntervalSet> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["date", "hour", "method", "level", "lower", "upper"] {
            return Err(Error::MalformedHeader(headers.iter().collect::<Vec<_>>().join(",")));
        }
        let mut method = None;
        let mut levels: Vec<f64> = Vec::new();
        let mut lower: Vec<Vec<f64>> = Vec::new();
        let mut upper: Vec<Vec<f64>> = Vec::new();
        let mut first_day = None;
        let mut last_day = 0;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |col: &str, v: &str| Error::BadValue {
                line: line + 2,
                column: col.into(),
                value: v.into(),
            };
            let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|_| bad("date", &rec[0]))?;
            let day = (date - start_date).num_days();
            if day < 0 {
                return Err(bad("date", &rec[0]));
            }
            let day = day as usize;
            let m: Method = rec[2].parse()?;
            if *method.get_or_insert(m) != m {
                return Err(bad("method", &rec[2]));
            }
            let level = rec[3].parse::<f64>().map_err(|_| bad("level", &rec[3]))? / 100.0;
            let li = match levels.iter().position(|&l| (l - level).abs() < 1e-9) {
                Some(i) => i,
                None => {
                    levels.push(level);
                    lower.push(Vec::new());
                    upper.push(Vec::new());
                    levels.len() - 1
                }
            };
            first_day.get_or_insert(day);
            last_day = day;
            lower[li].push(rec[4].parse().map_err(|_| bad("lower", &rec[4]))?);
            upper[li].push(rec[5].parse().map_err(|_| bad("upper", &rec[5]))?);
        }
        let (Some(method), Some(first_day)) = (method, first_day) else {
            return Err(Error::MissingStage(format!("{} holds no intervals", path.display())));
        };
        let n_days = last_day + 1 - first_day;
        if lower.iter().any(|l| l.len() != HOURS * n_days) {
            return Err(Error::MisalignedIndex(format!("{} has ragged interval rows", path.display())));
        }
        Ok(IntervalSet {
            method,
            start_date,
            first_day,
            n_days,
            levels,
            lower,
            upper,
        })
    }
}

/// Looks up the `alpha/2` and `1 - alpha/2` percentiles for each level.
pub fn assemble_intervals(surface: &QuantileSurface, levels: &[f64]) -> Result<IntervalSet> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no coverage levels".into()));
    }
    let idx: Vec<(usize, usize)> = levels.iter().map(|&l| level_indices(l)).collect::<Result<_>>()?;
    let lower = idx
        .iter()
        .map(|&(lo, _)| surface.natural.iter().map(|p| p[lo]).collect())
        .collect();
    let upper = idx
        .iter()
        .map(|&(_, hi)| surface.natural.iter().map(|p| p[hi]).collect())
        .collect();
    Ok(IntervalSet {
        method: surface.method,
        start_date: surface.start_date,
        first_day: surface.first_day,
        n_days: surface.n_days,
        levels: levels.to_vec(),
        lower,
        upper,
    })
}
