//! Seeded synthetic market with a known linear-Gaussian price process.
//!
//! Day-ahead prices follow the day-ahead ARX structure in natural units with
//! Gaussian noise, so the conditional distribution of each price given the
//! information at forecast time is `N(mean, noise_sd^2)` and its quantiles are
//! available in closed form. Intraday prices add an autocorrelated premium on
//! top of the day-ahead price.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_quantile;
use crate::timeseries::{HourlyPanel, HourlyValues, SeriesId, HOURS};

/// Coefficients of the generating process, in the day-ahead model's
/// regressor order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArxCoefficients {
    /// Monday first.
    pub weekday: [f64; 7],
    pub lag1: f64,
    pub lag2: f64,
    pub lag7: f64,
    pub prev_min: f64,
    pub prev_max: f64,
    pub prev_last: f64,
    pub load: f64,
    pub solar: f64,
    pub wind: f64,
    pub eua: f64,
    pub gas: f64,
}

impl Default for ArxCoefficients {
    fn default() -> Self {
        Self {
            weekday: [2.0, 2.0, 2.0, 2.0, 1.0, -3.0, -5.0],
            lag1: 0.4,
            lag2: 0.1,
            lag7: 0.15,
            prev_min: 0.05,
            prev_max: 0.05,
            prev_last: 0.05,
            load: 3e-4,
            solar: -3e-4,
            wind: -8e-4,
            eua: 0.2,
            gas: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub coefficients: ArxCoefficients,
    /// Standard deviation of the day-ahead innovation.
    pub noise_sd: f64,
    /// Standard deviation of the intraday premium innovation.
    pub id_noise_sd: f64,
    /// Persistence of the intraday premium.
    pub id_persistence: f64,
    pub include_solar: bool,
    pub load_level: f64,
    pub load_daily_amplitude: f64,
    pub load_seasonal_amplitude: f64,
    pub wind_level: f64,
    pub solar_peak: f64,
    pub gas_start: f64,
    pub eua_start: f64,
    /// Daily log-volatility of the gas and EUA random walks.
    pub commodity_vol: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            start_date: NaiveDate::from_ymd_opt(2019, 1, 7).expect("valid date"),
            n_days: 730,
            coefficients: ArxCoefficients::default(),
            noise_sd: 5.0,
            id_noise_sd: 4.0,
            id_persistence: 0.3,
            include_solar: true,
            load_level: 50_000.0,
            load_daily_amplitude: 10_000.0,
            load_seasonal_amplitude: 5_000.0,
            wind_level: 10_000.0,
            solar_peak: 20_000.0,
            gas_start: 20.0,
            eua_start: 25.0,
            commodity_vol: 0.01,
        }
    }
}

/// A generated panel together with the conditional mean of the day-ahead
/// price given everything known before the day.
#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub panel: HourlyPanel,
    pub da_mean: HourlyValues,
    pub noise_sd: f64,
}

impl SyntheticMarket {
    /// True conditional `q`-quantile of the day-ahead price.
    pub fn da_quantile(&self, day: usize, hour: usize, q: f64) -> f64 {
        self.da_mean.get(day, hour) + self.noise_sd * normal_quantile(q)
    }
}

/// Days discarded at the start so the autoregression forgets its start value.
const BURN_IN: usize = 28;

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<HourlyPanel> {
    generate_market(spec, seed).map(|m| m.panel)
}

pub fn generate_market(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticMarket> {
    if spec.n_days < 120 {
        return Err(Error::InvalidParameter(format!(
            "synthetic panels need at least 120 days, got {}",
            spec.n_days
        )));
    }
    if spec.noise_sd < 0.0 || spec.id_noise_sd < 0.0 || spec.commodity_vol < 0.0 {
        return Err(Error::InvalidParameter("noise scales must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let total = spec.n_days + BURN_IN;
    let first_date = spec.start_date - Duration::days(BURN_IN as i64);
    let c = &spec.coefficients;

    let mut load = vec![0.0; HOURS * total];
    let mut wind = vec![0.0; HOURS * total];
    let mut solar = vec![0.0; HOURS * total];
    let mut gas = vec![0.0; HOURS * total];
    let mut eua = vec![0.0; HOURS * total];
    let (mut g, mut e) = (spec.gas_start, spec.eua_start);
    let mut wind_state = 0.0;
    for day in 0..total {
        let date = first_date + Duration::days(day as i64);
        let season = (2.0 * std::f64::consts::PI * date.ordinal() as f64 / 365.25).cos();
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        if !weekend {
            g *= (spec.commodity_vol * normal()).exp();
            e *= (spec.commodity_vol * normal()).exp();
        }
        let cloud = (0.7 + 0.2 * normal()).clamp(0.1, 1.0);
        let weekend_factor = if weekend { 0.85 } else { 1.0 };
        for h in 1..=HOURS {
            let i = HOURS * day + h - 1;
            let shape = -(2.0 * std::f64::consts::PI * (h as f64 - 4.0) / 24.0).cos();
            let l = spec.load_level * weekend_factor
                + spec.load_daily_amplitude * shape
                + spec.load_seasonal_amplitude * season
                + 0.02 * spec.load_level * normal();
            load[i] = l.max(0.1 * spec.load_level);
            wind_state = 0.95 * wind_state + 0.3 * normal();
            wind[i] = spec.wind_level * (0.5 * wind_state).exp();
            let sun = (std::f64::consts::PI * (h as f64 - 5.0) / 16.0).sin().max(0.0);
            solar[i] = spec.solar_peak * sun * cloud * (1.0 - 0.3 * season);
            gas[i] = g;
            eua[i] = e;
        }
    }

    let mut da = vec![0.0; HOURS * total];
    let mut da_mean = vec![0.0; HOURS * total];
    let stationary = 80.0;
    da[..HOURS * 7].fill(stationary);
    da_mean[..HOURS * 7].fill(stationary);
    for day in 7..total {
        let date = first_date + Duration::days(day as i64);
        let wd = date.weekday().num_days_from_monday() as usize;
        let prev = &da[HOURS * (day - 1)..HOURS * day];
        let pmin = prev.iter().copied().fold(f64::INFINITY, f64::min);
        let pmax = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let plast = prev[HOURS - 1];
        let commodities = c.eua * eua[HOURS * (day - 1)] + c.gas * gas[HOURS * (day - 1)];
        for h in 1..=HOURS {
            let i = HOURS * day + h - 1;
            let solar_term = if spec.include_solar && (9..=17).contains(&h) {
                c.solar * solar[i]
            } else {
                0.0
            };
            let mean = c.weekday[wd]
                + c.lag1 * da[i - HOURS]
                + c.lag2 * da[i - 2 * HOURS]
                + c.lag7 * da[i - 7 * HOURS]
                + c.prev_min * pmin
                + c.prev_max * pmax
                + c.prev_last * plast
                + c.load * load[i]
                + solar_term
                + c.wind * wind[i]
                + commodities;
            da_mean[i] = mean;
            da[i] = mean + spec.noise_sd * normal();
        }
    }

    let mut id3 = vec![0.0; HOURS * total];
    let mut partial = vec![0.0; HOURS * total];
    for i in 0..HOURS * total {
        let prev_premium = if i >= HOURS { id3[i - HOURS] - da[i - HOURS] } else { 0.0 };
        id3[i] = da[i] + spec.id_persistence * prev_premium + spec.id_noise_sd * normal();
        partial[i] = id3[i] + 0.5 * spec.id_noise_sd * normal();
    }

    let keep = |v: Vec<f64>| v[HOURS * BURN_IN..].to_vec();
    let mut series = BTreeMap::new();
    series.insert(SeriesId::DaPrice, keep(da));
    series.insert(SeriesId::Id3Price, keep(id3));
    series.insert(SeriesId::IdPartial, keep(partial));
    series.insert(SeriesId::LoadFc, keep(load));
    series.insert(SeriesId::WindFc, keep(wind));
    if spec.include_solar {
        series.insert(SeriesId::SolarFc, keep(solar));
    }
    series.insert(SeriesId::GasPrice, keep(gas));
    series.insert(SeriesId::EuaPrice, keep(eua));
    let panel = HourlyPanel::new(spec.start_date, spec.n_days, series)?;
    Ok(SyntheticMarket {
        panel,
        da_mean: HourlyValues::new(0, keep(da_mean))?,
        noise_sd: spec.noise_sd,
    })
}
