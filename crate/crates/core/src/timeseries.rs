//! Calendar-aligned hourly market data.
//!
//! Days are addressed by a zero-based index from [`HourlyPanel::start_date`]
//! and hours by `1..=24`, so the flat position of `(day, hour)` is
//! `24 * day + hour - 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS: usize = 24;

/// Series that can appear in a market file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesId {
    DaPrice,
    Id3Price,
    IdPartial,
    LoadFc,
    WindFc,
    SolarFc,
    GasPrice,
    EuaPrice,
}

impl SeriesId {
    pub const ALL: [SeriesId; 8] = [
        SeriesId::DaPrice,
        SeriesId::Id3Price,
        SeriesId::IdPartial,
        SeriesId::LoadFc,
        SeriesId::WindFc,
        SeriesId::SolarFc,
        SeriesId::GasPrice,
        SeriesId::EuaPrice,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SeriesId::DaPrice => "da_price",
            SeriesId::Id3Price => "id3_price",
            SeriesId::IdPartial => "id_partial",
            SeriesId::LoadFc => "load_fc",
            SeriesId::WindFc => "wind_fc",
            SeriesId::SolarFc => "solar_fc",
            SeriesId::GasPrice => "gas_price",
            SeriesId::EuaPrice => "eua_price",
        }
    }

    /// Daily closing prices, quoted on trading days only.
    pub fn is_daily(self) -> bool {
        matches!(self, SeriesId::GasPrice | SeriesId::EuaPrice)
    }
}

impl fmt::Display for SeriesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeriesId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeriesId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownSeries(s.to_string()))
    }
}

/// One hourly slot of a raw file before calendar normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawCell {
    Missing,
    Value(f64),
    /// Repeated local hour at the autumn clock change.
    Duplicate(f64, f64),
}

/// Panel as read from disk: gaps and DST duplicates are still explicit.
#[derive(Debug, Clone)]
pub struct RawPanel {
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub series: BTreeMap<SeriesId, Vec<RawCell>>,
}

/// Clean, gap-free hourly panel.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyPanel {
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub series: BTreeMap<SeriesId, Vec<f64>>,
}

impl HourlyPanel {
    pub fn new(start_date: NaiveDate, n_days: usize, series: BTreeMap<SeriesId, Vec<f64>>) -> Result<Self> {
        for (id, values) in &series {
            if values.len() != HOURS * n_days {
                return Err(Error::InvalidParameter(format!(
                    "series {id} has {} entries, expected {}",
                    values.len(),
                    HOURS * n_days
                )));
            }
        }
        Ok(Self {
            start_date,
            n_days,
            series,
        })
    }

    /// Flat index of `(day, hour)` with `hour` in `1..=24`.
    #[inline]
    pub fn index(day: usize, hour: usize) -> usize {
        debug_assert!((1..=HOURS).contains(&hour));
        HOURS * day + hour - 1
    }

    pub fn has(&self, id: SeriesId) -> bool {
        self.series.contains_key(&id)
    }

    pub fn get(&self, id: SeriesId) -> Result<&[f64]> {
        self.series
            .get(&id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSeries(id.to_string()))
    }

    #[inline]
    pub fn value(&self, id: SeriesId, day: usize, hour: usize) -> f64 {
        self.series[&id][Self::index(day, hour)]
    }

    /// The 24 values of one day.
    pub fn day(&self, id: SeriesId, day: usize) -> &[f64] {
        &self.series[&id][HOURS * day..HOURS * (day + 1)]
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }

    pub fn weekday(&self, day: usize) -> Weekday {
        self.date(day).weekday()
    }

    pub fn day_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        (offset >= 0 && (offset as usize) < self.n_days).then_some(offset as usize)
    }

    /// Writes the panel in the same layout `load_market_csv` reads.
    pub fn write_csv(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let ids: Vec<SeriesId> = self.series.keys().copied().collect();
        let io = |e| Error::io(path, e);
        if let Some(h) = config_hash {
            writeln!(out, "# config_hash={h}").map_err(io)?;
        }
        write!(out, "timestamp").map_err(io)?;
        for id in &ids {
            write!(out, ",{id}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        for day in 0..self.n_days {
            let date = self.date(day);
            for hour in 1..=HOURS {
                write!(out, "{} {:02}:00", date.format("%Y-%m-%d"), hour - 1).map_err(io)?;
                for id in &ids {
                    write!(out, ",{}", self.value(*id, day, hour)).map_err(io)?;
                }
                writeln!(out).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }
}

/// One value per `(day, hour)` over a contiguous block of days, addressed by
/// the panel's absolute day index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyValues {
    pub first_day: usize,
    pub values: Vec<f64>,
}

impl HourlyValues {
    pub fn new(first_day: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() % HOURS != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values do not fill whole days",
                values.len()
            )));
        }
        Ok(Self { first_day, values })
    }

    pub fn n_days(&self) -> usize {
        self.values.len() / HOURS
    }

    pub fn days(&self) -> std::ops::Range<usize> {
        self.first_day..self.first_day + self.n_days()
    }

    pub fn contains_day(&self, day: usize) -> bool {
        self.days().contains(&day)
    }

    #[inline]
    pub fn get(&self, day: usize, hour: usize) -> f64 {
        self.values[HourlyPanel::index(day - self.first_day, hour)]
    }

    pub fn day(&self, day: usize) -> &[f64] {
        let i = HOURS * (day - self.first_day);
        &self.values[i..i + HOURS]
    }

    /// Values of one hour across all days.
    pub fn hour(&self, hour: usize) -> Vec<f64> {
        self.values.iter().skip(hour - 1).step_by(HOURS).copied().collect()
    }

    /// Sub-block of days `[from, to)`.
    pub fn slice_days(&self, from: usize, to: usize) -> Result<Self> {
        if from < self.first_day || to > self.first_day + self.n_days() || from > to {
            return Err(Error::MisalignedIndex(format!(
                "days {from}..{to} outside {:?}",
                self.days()
            )));
        }
        let a = HOURS * (from - self.first_day);
        let b = HOURS * (to - self.first_day);
        Ok(Self {
            first_day: from,
            values: self.values[a..b].to_vec(),
        })
    }
}

/// Reads a market CSV (`timestamp,<series-id>,...`) into a raw panel.
///
/// The header must list exactly the series in `schema` (any order).
/// Timestamps are local market time `YYYY-MM-DD HH:00`; a repeated hour is
/// kept as a [`RawCell::Duplicate`] and a skipped hour becomes
/// [`RawCell::Missing`].
pub fn load_market_csv(path: &Path, schema: &[SeriesId]) -> Result<RawPanel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_market_csv(file, schema)
}

pub fn read_market_csv<R: std::io::Read>(reader: R, schema: &[SeriesId]) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("timestamp") {
        return Err(Error::MalformedHeader(
            "first column must be `timestamp`".to_string(),
        ));
    }
    let mut columns = Vec::with_capacity(header.len() - 1);
    for name in header.iter().skip(1) {
        let id: SeriesId = name.parse()?;
        if columns.contains(&id) {
            return Err(Error::MalformedHeader(format!("duplicate column `{name}`")));
        }
        columns.push(id);
    }
    let mut expected: Vec<SeriesId> = schema.to_vec();
    expected.sort();
    expected.dedup();
    let mut found = columns.clone();
    found.sort();
    if expected != found {
        return Err(Error::MalformedHeader(format!(
            "header {:?} does not match schema {:?}",
            found, expected
        )));
    }

    let mut rows: Vec<(usize, NaiveDateTime, Vec<Option<f64>>)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let ts_raw = record.get(0).unwrap_or_default();
        let ts = NaiveDateTime::parse_from_str(ts_raw, "%Y-%m-%d %H:%M")
            .ok()
            .filter(|t| t.minute() == 0)
            .ok_or_else(|| Error::BadTimestamp {
                line,
                timestamp: ts_raw.to_string(),
            })?;
        if record.len() != columns.len() + 1 {
            return Err(Error::MalformedHeader(format!(
                "line {line} has {} fields, expected {}",
                record.len(),
                columns.len() + 1
            )));
        }
        let mut values = Vec::with_capacity(columns.len());
        for (j, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() {
                values.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::BadValue {
                    line,
                    column: columns[j].to_string(),
                    value: cell.to_string(),
                })?;
                values.push(Some(v));
            }
        }
        rows.push((line, ts, values));
    }

    let Some((_, first, _)) = rows.first() else {
        return Err(Error::MalformedHeader("file has no data rows".to_string()));
    };
    let start_date = first.date();
    let last_date = rows.last().map(|r| r.1.date()).unwrap_or(start_date);
    let n_days = (last_date - start_date).num_days() as usize + 1;

    let mut series: BTreeMap<SeriesId, Vec<RawCell>> = columns
        .iter()
        .map(|id| (*id, vec![RawCell::Missing; HOURS * n_days]))
        .collect();
    let mut filled = vec![0u8; HOURS * n_days];
    let mut prev: Option<NaiveDateTime> = None;
    for (line, ts, values) in rows {
        if let Some(p) = prev {
            if ts < p {
                return Err(Error::NonMonotoneTimestamps {
                    line,
                    timestamp: ts.to_string(),
                });
            }
        }
        let slot = (ts.date() - start_date).num_days() as usize * HOURS + ts.hour() as usize;
        filled[slot] += 1;
        if filled[slot] > 2 || (filled[slot] == 2 && prev != Some(ts)) {
            return Err(Error::NonMonotoneTimestamps {
                line,
                timestamp: ts.to_string(),
            });
        }
        for (id, v) in columns.iter().zip(values) {
            let cell = &mut series.get_mut(id).expect("column registered")[slot];
            *cell = match (*cell, v) {
                (RawCell::Value(a), Some(b)) => RawCell::Duplicate(a, b),
                (c, None) => c,
                (_, Some(b)) => RawCell::Value(b),
            };
        }
        prev = Some(ts);
    }

    Ok(RawPanel {
        start_date,
        n_days,
        series,
    })
}

/// Collapses DST duplicates, fills gaps and carries daily prices over
/// non-trading days.
pub fn normalize_calendar(raw: &RawPanel) -> Result<HourlyPanel> {
    let n = HOURS * raw.n_days;
    for day in 0..raw.n_days {
        let empty = raw.series.values().all(|cells| {
            cells[HOURS * day..HOURS * (day + 1)]
                .iter()
                .all(|c| matches!(c, RawCell::Missing))
        });
        if empty {
            return Err(Error::AllSeriesMissingDay { day });
        }
    }

    let collapsed: BTreeMap<SeriesId, Vec<Option<f64>>> = raw
        .series
        .iter()
        .map(|(id, cells)| {
            let values = cells
                .iter()
                .map(|c| match *c {
                    RawCell::Missing => None,
                    RawCell::Value(v) => Some(v),
                    RawCell::Duplicate(a, b) => Some(0.5 * (a + b)),
                })
                .collect();
            (*id, values)
        })
        .collect();

    let mut out = BTreeMap::new();
    for (id, values) in &collapsed {
        if id.is_daily() || *id == SeriesId::IdPartial {
            continue;
        }
        out.insert(*id, fill_gaps(*id, values)?);
    }
    for id in [SeriesId::GasPrice, SeriesId::EuaPrice] {
        if let Some(values) = collapsed.get(&id) {
            out.insert(id, carry_daily(id, values, raw.n_days)?);
        }
    }
    if let Some(values) = collapsed.get(&SeriesId::IdPartial) {
        // Products without intraday trades fall back to the day-ahead price.
        let filled = match out.get(&SeriesId::DaPrice) {
            Some(da) => values
                .iter()
                .zip(da)
                .map(|(v, d)| v.unwrap_or(*d))
                .collect(),
            None => fill_gaps(SeriesId::IdPartial, values)?,
        };
        out.insert(SeriesId::IdPartial, filled);
    }
    debug_assert!(out.values().all(|v: &Vec<f64>| v.len() == n));
    HourlyPanel::new(raw.start_date, raw.n_days, out)
}

fn fill_gaps(id: SeriesId, values: &[Option<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    let mut i = 0;
    while i < values.len() {
        match values[i] {
            Some(v) => {
                out.push(v);
                i += 1;
            }
            None => {
                let end = (i..values.len())
                    .find(|&j| values[j].is_some())
                    .ok_or(Error::GapAtSeriesBoundary {
                        series: id.to_string(),
                        index: i,
                    })?;
                let before = out.last().copied().ok_or(Error::GapAtSeriesBoundary {
                    series: id.to_string(),
                    index: i,
                })?;
                let after = values[end].expect("found by search");
                let fill = 0.5 * (before + after);
                out.extend(std::iter::repeat_n(fill, end - i));
                i = end;
            }
        }
    }
    Ok(out)
}

fn carry_daily(id: SeriesId, values: &[Option<f64>], n_days: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    let mut last: Option<f64> = None;
    for day in 0..n_days {
        let today = values[HOURS * day..HOURS * (day + 1)].iter().flatten().next().copied();
        let v = today.or(last).ok_or(Error::GapAtSeriesBoundary {
            series: id.to_string(),
            index: HOURS * day,
        })?;
        last = Some(v);
        out.extend(std::iter::repeat_n(v, HOURS));
    }
    Ok(out)
}
