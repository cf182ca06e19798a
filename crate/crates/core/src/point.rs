//! ARX point forecasts over rolling calibration windows.
//!
//! For every forecast day and window length `tau`, each series is mapped into
//! the modelling domain with a transform fitted on the `tau` calibration days,
//! 24 hourly regressions are estimated by least squares and the forecast is
//! mapped back to price units with the target's map. The resulting
//! [`ForecastPanel`] therefore holds natural-unit forecasts, one column per
//! window length.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::npit::{PriceMap, Transform};
use crate::timeseries::{HourlyPanel, HourlyValues, SeriesId, HOURS};

/// Largest lag used by either model.
pub const MAX_LAG: usize = 7;

/// Window lengths averaged into the reference point forecast.
pub const PAPER_AVERAGING_WINDOWS: [usize; 6] = [56, 84, 112, 714, 721, 728];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Market {
    /// Day-ahead auction prices.
    Da,
    /// Intraday ID3 index forecast on the day before delivery.
    Ida,
}

impl Market {
    pub fn target(self) -> SeriesId {
        match self {
            Market::Da => SeriesId::DaPrice,
            Market::Ida => SeriesId::Id3Price,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Market::Da => "da",
            Market::Ida => "ida",
        }
    }
}

/// Regressor descriptors. Lags and previous-day statistics refer to day
/// `d - k` relative to the forecast day `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feature {
    /// Weekday dummy, 0 = Monday.
    Weekday(u8),
    DaLag(usize),
    DaMin,
    DaMax,
    /// Hour-24 price of the previous day.
    DaLast,
    /// Latest intraday information for the same hour of the previous day.
    Id3Star,
    Id3Lag(usize),
    Load,
    Solar,
    Wind,
    Eua,
    Gas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub market: Market,
    pub include_solar: bool,
    pub solar_hours: Vec<usize>,
    pub transform: Transform,
}

impl ModelSpec {
    pub fn new(market: Market, include_solar: bool) -> Self {
        Self {
            market,
            include_solar,
            solar_hours: (9..=17).collect(),
            transform: Transform::Npit,
        }
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }

    /// Every regressor the model can use, in model order.
    pub fn candidate_features(&self) -> Vec<Feature> {
        let mut f: Vec<Feature> = (0..7).map(Feature::Weekday).collect();
        match self.market {
            Market::Da => {
                f.extend([
                    Feature::DaLag(1),
                    Feature::DaLag(2),
                    Feature::DaLag(7),
                    Feature::DaMin,
                    Feature::DaMax,
                    Feature::DaLast,
                    Feature::Load,
                ]);
                if self.include_solar {
                    f.push(Feature::Solar);
                }
                f.extend([Feature::Wind, Feature::Eua, Feature::Gas]);
            }
            Market::Ida => {
                f.extend([
                    Feature::Id3Star,
                    Feature::Id3Lag(2),
                    Feature::Id3Lag(7),
                    Feature::DaLag(1),
                    Feature::DaLast,
                    Feature::DaMin,
                    Feature::DaMax,
                    Feature::Eua,
                    Feature::Gas,
                    Feature::Load,
                ]);
                if self.include_solar {
                    f.push(Feature::Solar);
                }
                f.push(Feature::Wind);
            }
        }
        f
    }

    /// Regressors used for `hour`.
    pub fn features(&self, hour: usize) -> Vec<Feature> {
        let solar = self.include_solar && self.solar_hours.contains(&hour);
        self.candidate_features()
            .into_iter()
            .filter(|f| solar || *f != Feature::Solar)
            .collect()
    }

    /// Series the model reads.
    pub fn required_series(&self) -> Vec<SeriesId> {
        let mut ids = vec![SeriesId::DaPrice];
        if self.market == Market::Ida {
            ids.extend([SeriesId::Id3Price, SeriesId::IdPartial]);
        }
        ids.push(SeriesId::LoadFc);
        if self.include_solar {
            ids.push(SeriesId::SolarFc);
        }
        ids.extend([SeriesId::WindFc, SeriesId::EuaPrice, SeriesId::GasPrice]);
        ids
    }

    fn check_panel(&self, panel: &HourlyPanel) -> Result<()> {
        for id in self.required_series() {
            panel.get(id)?;
        }
        Ok(())
    }
}

/// Read access to (possibly transformed) series for design rows.
trait FeatureSource {
    fn value(&self, id: SeriesId, day: usize, hour: usize) -> f64;
    fn da_min(&self, day: usize) -> f64;
    fn da_max(&self, day: usize) -> f64;
}

impl FeatureSource for HourlyPanel {
    fn value(&self, id: SeriesId, day: usize, hour: usize) -> f64 {
        HourlyPanel::value(self, id, day, hour)
    }

    fn da_min(&self, day: usize) -> f64 {
        self.day(SeriesId::DaPrice, day).iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn da_max(&self, day: usize) -> f64 {
        self.day(SeriesId::DaPrice, day).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn fill_row<S: FeatureSource>(src: &S, weekday: usize, d: usize, hour: usize, features: &[Feature], out: &mut [f64]) {
    for (o, f) in out.iter_mut().zip(features) {
        *o = match *f {
            Feature::Weekday(i) => f64::from(u8::from(i as usize == weekday)),
            Feature::DaLag(k) => src.value(SeriesId::DaPrice, d - k, hour),
            Feature::DaMin => src.da_min(d - 1),
            Feature::DaMax => src.da_max(d - 1),
            Feature::DaLast => src.value(SeriesId::DaPrice, d - 1, HOURS),
            Feature::Id3Star => {
                if hour > 10 {
                    src.value(SeriesId::IdPartial, d - 1, hour)
                } else {
                    src.value(SeriesId::Id3Price, d - 1, hour)
                }
            }
            Feature::Id3Lag(k) => src.value(SeriesId::Id3Price, d - k, hour),
            Feature::Load => src.value(SeriesId::LoadFc, d, hour),
            Feature::Solar => src.value(SeriesId::SolarFc, d, hour),
            Feature::Wind => src.value(SeriesId::WindFc, d, hour),
            Feature::Eua => src.value(SeriesId::EuaPrice, d - 1, 1),
            Feature::Gas => src.value(SeriesId::GasPrice, d - 1, 1),
        };
    }
}

fn check_row_request(panel: &HourlyPanel, d: usize, hour: usize) -> Result<()> {
    if !(1..=HOURS).contains(&hour) {
        return Err(Error::InvalidParameter(format!("hour {hour} outside 1..=24")));
    }
    if d < MAX_LAG {
        return Err(Error::InsufficientHistory(format!(
            "day {d} has no lag-{MAX_LAG} history"
        )));
    }
    if d >= panel.n_days {
        return Err(Error::InsufficientHistory(format!(
            "day {d} is past the end of the panel ({} days)",
            panel.n_days
        )));
    }
    Ok(())
}

fn build_row(panel: &HourlyPanel, d: usize, hour: usize, spec: &ModelSpec, market: Market) -> Result<Vec<f64>> {
    if spec.market != market {
        return Err(Error::InvalidParameter(format!(
            "model spec is for the {} market",
            spec.market.as_str()
        )));
    }
    spec.check_panel(panel)?;
    check_row_request(panel, d, hour)?;
    let features = spec.features(hour);
    let mut row = vec![0.0; features.len()];
    let weekday = panel.weekday(d).num_days_from_monday() as usize;
    fill_row(panel, weekday, d, hour, &features, &mut row);
    Ok(row)
}

/// Day-ahead model regressors for `(d, hour)`, read from `panel` as given.
pub fn build_design_row_da(panel: &HourlyPanel, d: usize, hour: usize, spec: &ModelSpec) -> Result<Vec<f64>> {
    build_row(panel, d, hour, spec, Market::Da)
}

/// Intraday model regressors for `(d, hour)`, read from `panel` as given.
pub fn build_design_row_ida(panel: &HourlyPanel, d: usize, hour: usize, spec: &ModelSpec) -> Result<Vec<f64>> {
    build_row(panel, d, hour, spec, Market::Ida)
}

/// Least-squares coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub rank: usize,
    /// Set when the design has lower rank than its column count; `coef` is
    /// then the minimum-norm solution.
    pub rank_deficient: bool,
}

/// Smallest Cholesky pivot of the equilibrated normal matrix (unit
/// diagonal) accepted before falling back to the SVD.
const CHOL_PIVOT_TOL: f64 = 1e-8;

/// Least squares with the minimum-norm solution for rank-deficient designs.
///
/// Columns are equilibrated to unit norm first. Well-conditioned problems are
/// solved through the normal equations; the rest through an SVD of the
/// equilibrated design, followed by a projection onto the row space of `x`
/// so the norm is minimal in the original coordinates.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if p == 0 {
        return Ok(OlsFit {
            coef: Vec::new(),
            rank: 0,
            rank_deficient: false,
        });
    }
    let scale: Vec<f64> = x
        .column_iter()
        .map(|c| {
            let nrm = c.norm();
            if nrm > 0.0 {
                nrm
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (mut c, s) in xs.column_iter_mut().zip(&scale) {
        c /= *s;
    }
    let yv = DVector::from_column_slice(y);

    if n >= p {
        if let Some(chol) = xs.tr_mul(&xs).cholesky() {
            let l = chol.l_dirty();
            let min_pivot = (0..p).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
            if min_pivot > CHOL_PIVOT_TOL {
                let bs = chol.solve(&xs.tr_mul(&yv));
                return Ok(OlsFit {
                    coef: bs.iter().zip(&scale).map(|(b, s)| b / s).collect(),
                    rank: p,
                    rank_deficient: false,
                });
            }
        }
    }

    let svd = xs.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = (n.max(p) as f64) * f64::EPSILON * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let mut coef = DVector::zeros(p);
    if rank > 0 {
        let bs = svd.solve(&yv, tol).map_err(|e| Error::DegenerateDesign(e.to_string()))?;
        for i in 0..p {
            coef[i] = bs[i] / scale[i];
        }
    }
    if rank < p && rank > 0 {
        // The minimum-norm solution is the one inside the row space of X,
        // which is D times the row space of the equilibrated design.
        let v_t = svd.v_t.as_ref().expect("requested V");
        let rows: Vec<DVector<f64>> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > tol)
            .map(|k| DVector::from_fn(p, |i, _| v_t[(k, i)] * scale[i]))
            .collect();
        let q = DMatrix::from_columns(&rows).qr().q();
        coef = &q * (q.transpose() * &coef);
    }
    Ok(OlsFit {
        coef: coef.as_slice().to_vec(),
        rank,
        rank_deficient: rank < p,
    })
}

/// Point forecasts, one column per calibration window length.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPanel {
    pub market: Market,
    pub transform: Transform,
    /// Calendar date of panel day 0.
    pub start_date: NaiveDate,
    pub first_day: usize,
    pub n_days: usize,
    /// Window lengths in ascending order.
    pub taus: Vec<usize>,
    /// `24 * n_days` rows (day-major, hour-minor) by `taus.len()` columns.
    pub values: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PanelMeta {
    market: Market,
    transform: Transform,
    start_date: NaiveDate,
    first_day: usize,
    n_days: usize,
    tau_index: Vec<usize>,
    t_index: Vec<(NaiveDate, usize)>,
    npit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

impl ForecastPanel {
    pub fn n_rows(&self) -> usize {
        HOURS * self.n_days
    }

    pub fn days(&self) -> std::ops::Range<usize> {
        self.first_day..self.first_day + self.n_days
    }

    #[inline]
    pub fn row(&self, day: usize, hour: usize) -> usize {
        HOURS * (day - self.first_day) + hour - 1
    }

    pub fn tau_column(&self, tau: usize) -> Result<usize> {
        self.taus.iter().position(|&t| t == tau).ok_or(Error::UnknownTau(tau))
    }

    pub fn column(&self, tau: usize) -> Result<HourlyValues> {
        let c = self.tau_column(tau)?;
        HourlyValues::new(self.first_day, self.values.column(c).iter().copied().collect())
    }

    /// `(date, hour)` of every row.
    pub fn t_index(&self) -> Vec<(NaiveDate, usize)> {
        let mut out = Vec::with_capacity(self.n_rows());
        for day in self.days() {
            let date = self.start_date + chrono::Duration::days(day as i64);
            out.extend((1..=HOURS).map(|h| (date, h)));
        }
        out
    }

    /// Rows for days `[from, to)`.
    pub fn slice_days(&self, from: usize, to: usize) -> Result<ForecastPanel> {
        if from < self.first_day || to > self.first_day + self.n_days || from >= to {
            return Err(Error::MisalignedIndex(format!(
                "days {from}..{to} outside forecast panel {:?}",
                self.days()
            )));
        }
        let rows = self.values.rows(HOURS * (from - self.first_day), HOURS * (to - from)).into_owned();
        Ok(ForecastPanel {
            first_day: from,
            n_days: to - from,
            values: rows,
            taus: self.taus.clone(),
            ..*self
        })
    }

    fn sidecar(path: &Path) -> PathBuf {
        path.with_extension("meta.json")
    }

    /// Writes the matrix as CSV (`date,hour,tau_<n>...`) plus a JSON sidecar
    /// next to it with the row and column index.
    pub fn write(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut out = std::io::BufWriter::new(file);
        if let Some(h) = config_hash {
            writeln!(out, "# config_hash={h}").map_err(io)?;
        }
        write!(out, "date,hour").map_err(io)?;
        for t in &self.taus {
            write!(out, ",tau_{t}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        for (r, (date, hour)) in self.t_index().into_iter().enumerate() {
            write!(out, "{date},{hour}").map_err(io)?;
            for c in 0..self.taus.len() {
                write!(out, ",{}", self.values[(r, c)]).map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)?;

        let meta = PanelMeta {
            market: self.market,
            transform: self.transform,
            start_date: self.start_date,
            first_day: self.first_day,
            n_days: self.n_days,
            tau_index: self.taus.clone(),
            t_index: self.t_index(),
            npit: match self.transform {
                Transform::Npit => "per series and calibration window; plotting position (rank-0.5)/n; clamp 1/(2n)".into(),
                Transform::Identity => "none".into(),
            },
            config_hash: config_hash.map(str::to_string),
        };
        let side = Self::sidecar(path);
        let json = serde_json::to_string_pretty(&meta)?;
        std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
    }

    pub fn read(path: &Path) -> Result<ForecastPanel> {
        let side = Self::sidecar(path);
        let meta_raw = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: PanelMeta = serde_json::from_str(&meta_raw)?;
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
        let n_cols = meta.tau_index.len();
        let n_rows = HOURS * meta.n_days;
        let mut values = DMatrix::zeros(n_rows, n_cols);
        let mut r = 0;
        for record in rdr.records() {
            let record = record?;
            if r >= n_rows || record.len() != n_cols + 2 {
                return Err(Error::MisalignedIndex(format!("unexpected row {} in {}", r + 1, path.display())));
            }
            for c in 0..n_cols {
                let cell = &record[c + 2];
                values[(r, c)] = cell.parse().map_err(|_| Error::BadValue {
                    line: r + 2,
                    column: format!("tau_{}", meta.tau_index[c]),
                    value: cell.to_string(),
                })?;
            }
            r += 1;
        }
        if r != n_rows {
            return Err(Error::MisalignedIndex(format!("{} has {r} rows, expected {n_rows}", path.display())));
        }
        Ok(ForecastPanel {
            market: meta.market,
            transform: meta.transform,
            start_date: meta.start_date,
            first_day: meta.first_day,
            n_days: meta.n_days,
            taus: meta.tau_index,
            values,
        })
    }
}

/// Transformed copies of the series one window needs, for days
/// `first_day ..= forecast day`.
struct WindowData {
    first_day: usize,
    series: [Vec<f64>; 8],
    da_min: Vec<f64>,
    da_max: Vec<f64>,
}

impl FeatureSource for WindowData {
    #[inline]
    fn value(&self, id: SeriesId, day: usize, hour: usize) -> f64 {
        self.series[id as usize][HOURS * (day - self.first_day) + hour - 1]
    }

    fn da_min(&self, day: usize) -> f64 {
        self.da_min[day - self.first_day]
    }

    fn da_max(&self, day: usize) -> f64 {
        self.da_max[day - self.first_day]
    }
}

/// Forecasts the 24 hours of day `d` from the `tau` days before it.
fn forecast_window(panel: &HourlyPanel, spec: &ModelSpec, d: usize, tau: usize) -> Result<[f64; HOURS]> {
    let first = d - tau - MAX_LAG;
    let cal = HOURS * (d - tau)..HOURS * d;
    let span = HOURS * first..HOURS * (d + 1);

    let mut maps: [Option<PriceMap>; 8] = Default::default();
    let mut series: [Vec<f64>; 8] = Default::default();
    for id in spec.required_series() {
        let raw = panel.get(id)?;
        // Partial intraday prices live on the ID3 scale.
        let fit_id = if id == SeriesId::IdPartial { SeriesId::Id3Price } else { id };
        if maps[fit_id as usize].is_none() {
            maps[fit_id as usize] = Some(PriceMap::fit(&panel.get(fit_id)?[cal.clone()], spec.transform)?);
        }
        let map = maps[fit_id as usize].as_ref().expect("fitted above");
        series[id as usize] = raw[span.clone()].iter().map(|&v| map.transform(v)).collect();
    }
    let da = &series[SeriesId::DaPrice as usize];
    let da_min = da.chunks(HOURS).map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let da_max = da.chunks(HOURS).map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let data = WindowData {
        first_day: first,
        series,
        da_min,
        da_max,
    };
    let target = spec.market.target();
    let target_map = maps[target as usize].as_ref().expect("target is a required series");

    let weekdays: Vec<usize> = (d - tau..=d)
        .map(|day| panel.weekday(day).num_days_from_monday() as usize)
        .collect();
    let mut out = [0.0; HOURS];
    let mut row = Vec::new();
    for (hour, o) in (1..=HOURS).zip(out.iter_mut()) {
        if let PriceMap::Constant(c) = target_map {
            *o = *c;
            continue;
        }
        let features = spec.features(hour);
        let p = features.len();
        row.resize(p, 0.0);
        let mut x = DMatrix::zeros(tau, p);
        let mut y = Vec::with_capacity(tau);
        for (i, day) in (d - tau..d).enumerate() {
            fill_row(&data, weekdays[i], day, hour, &features, &mut row);
            for (j, v) in row.iter().enumerate() {
                x[(i, j)] = *v;
            }
            y.push(data.value(target, day, hour));
        }
        let fit = ols_fit(&x, &y)?;
        fill_row(&data, weekdays[tau], d, hour, &features, &mut row);
        let yhat: f64 = fit.coef.iter().zip(&row).map(|(b, v)| b * v).sum();
        *o = target_map.inverse(yhat);
    }
    Ok(out)
}

/// Rolling-window forecasts for every day in `eval_days`, hour and window
/// length in `tau_range`.
pub fn rolling_forecast(
    panel: &HourlyPanel,
    spec: &ModelSpec,
    tau_range: &[usize],
    eval_days: std::ops::Range<usize>,
) -> Result<ForecastPanel> {
    spec.check_panel(panel)?;
    if tau_range.is_empty() || eval_days.is_empty() {
        return Err(Error::InvalidParameter("empty window set or evaluation range".into()));
    }
    let mut taus = tau_range.to_vec();
    taus.sort_unstable();
    taus.dedup();
    if taus[0] < 2 {
        return Err(Error::InvalidParameter("window lengths must be at least 2 days".into()));
    }
    let tau_max = *taus.last().expect("non-empty");
    if eval_days.start < tau_max + MAX_LAG {
        return Err(Error::InsufficientHistory(format!(
            "first forecast day {} needs {} days of history",
            eval_days.start,
            tau_max + MAX_LAG
        )));
    }
    if eval_days.end > panel.n_days {
        return Err(Error::InsufficientHistory(format!(
            "forecast days run to {} but the panel has {} days",
            eval_days.end, panel.n_days
        )));
    }

    let jobs: Vec<(usize, usize)> = eval_days
        .clone()
        .flat_map(|d| taus.iter().map(move |&t| (d, t)))
        .collect();
    let results: Vec<[f64; HOURS]> = jobs
        .par_iter()
        .map(|&(d, tau)| forecast_window(panel, spec, d, tau))
        .collect::<Result<_>>()?;

    let n_days = eval_days.len();
    let mut values = DMatrix::zeros(HOURS * n_days, taus.len());
    for (k, day_fc) in results.iter().enumerate() {
        let (di, c) = (k / taus.len(), k % taus.len());
        for (h, v) in day_fc.iter().enumerate() {
            values[(HOURS * di + h, c)] = *v;
        }
    }
    Ok(ForecastPanel {
        market: spec.market,
        transform: spec.transform,
        start_date: panel.start_date,
        first_day: eval_days.start,
        n_days,
        taus,
        values,
    })
}

/// Mean of the panel columns for `taus`.
pub fn average_point_forecast(panel: &ForecastPanel, taus: &[usize]) -> Result<HourlyValues> {
    if taus.is_empty() {
        return Err(Error::InvalidParameter("no averaging windows".into()));
    }
    let cols: Vec<usize> = taus.iter().map(|&t| panel.tau_column(t)).collect::<Result<_>>()?;
    let inv = 1.0 / cols.len() as f64;
    let values = (0..panel.n_rows())
        .map(|r| cols.iter().map(|&c| panel.values[(r, c)]).sum::<f64>() * inv)
        .collect();
    HourlyValues::new(panel.first_day, values)
}

/// Realized minus forecast, per `(day, hour)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub errors: HourlyValues,
    /// Days of errors used by the error-distribution interval methods.
    pub lookback: usize,
}

pub const DEFAULT_LOOKBACK: usize = 182;

pub fn compute_errors(panel: &HourlyPanel, market: Market, avg_fc: &HourlyValues) -> Result<ErrorSeries> {
    let prices = panel.get(market.target())?;
    if avg_fc.first_day + avg_fc.n_days() > panel.n_days {
        return Err(Error::MisalignedIndex(format!(
            "forecast days {:?} extend past the panel",
            avg_fc.days()
        )));
    }
    let start = HOURS * avg_fc.first_day;
    let errors = prices[start..start + avg_fc.values.len()]
        .iter()
        .zip(&avg_fc.values)
        .map(|(p, f)| p - f)
        .collect();
    Ok(ErrorSeries {
        errors: HourlyValues::new(avg_fc.first_day, errors)?,
        lookback: DEFAULT_LOOKBACK,
    })
}

/// Weekday index used by the dummies (0 = Monday).
pub fn weekday_index(date: NaiveDate) -> usize {
    date.weekday().num_days_from_monday() as usize
}
