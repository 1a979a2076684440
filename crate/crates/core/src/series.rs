//! The [`TimeSeries`] value type and the transforms every model shares:
//! differencing and its inverse, min-max scaling, chronological splitting and
//! sliding windows.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Daily,
    Monthly,
}

impl Frequency {
    /// The stamp that follows `date` at this frequency. Monthly stamps sit at month end.
    pub fn next(self, date: NaiveDate) -> NaiveDate {
        match self {
            Frequency::Daily => date + Days::new(1),
            Frequency::Monthly => {
                let (y, m) = if date.month() == 12 {
                    (date.year() + 1, 1)
                } else {
                    (date.year(), date.month() + 1)
                };
                month_end(y, m)
            }
        }
    }

    /// `count` consecutive stamps after `last`.
    pub fn following(self, last: NaiveDate, count: usize) -> Vec<NaiveDate> {
        let mut out = Vec::with_capacity(count);
        let mut d = last;
        for _ in 0..count {
            d = self.next(d);
            out.push(d);
        }
        out
    }
}

impl std::str::FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "daily" | "d" => Ok(Frequency::Daily),
            "monthly" | "m" => Ok(Frequency::Monthly),
            other => Err(Error::InvalidArgument(format!("unknown frequency {other:?}"))),
        }
    }
}

impl std::fmt::Display for Frequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Frequency::Daily => "daily",
            Frequency::Monthly => "monthly",
        })
    }
}

/// Last calendar day of the given month.
pub fn month_end(year: i32, month: u32) -> NaiveDate {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .and_then(|d| d.pred_opt())
        .expect("month in 1..=12")
}

/// Ordered observations with strictly ascending dates and finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    frequency: Frequency,
}

impl TimeSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>, frequency: Frequency) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if dates.is_empty() {
            return Err(Error::InvalidSeries("series is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at {}",
                dates[i]
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries(format!(
                "dates not strictly ascending at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(TimeSeries {
            dates,
            values,
            frequency,
        })
    }

    /// Consecutive stamps at `frequency` starting from `start`.
    pub fn from_start(start: NaiveDate, values: Vec<f64>, frequency: Frequency) -> Result<Self> {
        let mut dates = Vec::with_capacity(values.len());
        if !values.is_empty() {
            dates.push(start);
            dates.extend(frequency.following(start, values.len() - 1));
        }
        TimeSeries::new(dates, values, frequency)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> NaiveDate {
        *self.dates.last().expect("series is non-empty")
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Same dates, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        TimeSeries::new(self.dates.clone(), values, self.frequency)
    }

    /// Elements `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "slice {start}..{end} out of range for length {}",
                self.len()
            )));
        }
        TimeSeries::new(
            self.dates[start..end].to_vec(),
            self.values[start..end].to_vec(),
            self.frequency,
        )
    }

    /// Appends `other`, which must start after this series ends.
    pub fn concat(&self, other: &TimeSeries) -> Result<Self> {
        let mut dates = self.dates.clone();
        dates.extend_from_slice(&other.dates);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        TimeSeries::new(dates, values, self.frequency)
    }

    pub fn into_parts(self) -> (Vec<NaiveDate>, Vec<f64>, Frequency) {
        (self.dates, self.values, self.frequency)
    }

    /// Reads the canonical two-column `date,value` CSV.
    pub fn read_csv<R: Read>(reader: R, frequency: Frequency) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let bad = || Error::InvalidSeries(format!("malformed row {}", i + 2));
            let date = row
                .get(0)
                .and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
                .ok_or_else(bad)?;
            let value = row.get(1).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad)?;
            dates.push(date);
            values.push(value);
        }
        TimeSeries::new(dates, values, frequency)
    }

    pub fn read_csv_path(path: &Path, frequency: Frequency) -> Result<Self> {
        TimeSeries::read_csv(std::fs::File::open(path)?, frequency)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "value"])?;
        for (d, v) in self.dates.iter().zip(&self.values) {
            w.write_record([d.format("%Y-%m-%d").to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// One differencing pass at a given lag, with the head values it consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceStage {
    pub lag: usize,
    pub head_dates: Vec<NaiveDate>,
    pub head_values: Vec<f64>,
}

/// Everything needed to undo [`difference`]. Stages are stored in application order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DifferenceLedger {
    pub d: usize,
    pub seasonal_d: usize,
    pub period: usize,
    pub stages: Vec<DifferenceStage>,
}

impl DifferenceLedger {
    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Number of observations consumed by differencing.
    pub fn consumed(&self) -> usize {
        self.stages.iter().map(|s| s.lag).sum()
    }
}

fn diff_once(dates: &[NaiveDate], values: &[f64], lag: usize) -> (Vec<NaiveDate>, Vec<f64>, DifferenceStage) {
    let out: Vec<f64> = (lag..values.len()).map(|t| values[t] - values[t - lag]).collect();
    let stage = DifferenceStage {
        lag,
        head_dates: dates[..lag].to_vec(),
        head_values: values[..lag].to_vec(),
    };
    (dates[lag..].to_vec(), out, stage)
}

/// Applies `seasonal_d` seasonal differences at lag `period` followed by `d` ordinary
/// differences.
pub fn difference(
    series: &TimeSeries,
    d: usize,
    seasonal_d: usize,
    period: usize,
) -> Result<(TimeSeries, DifferenceLedger)> {
    if seasonal_d > 0 && period == 0 {
        return Err(Error::InvalidArgument(
            "seasonal differencing requires a positive period".into(),
        ));
    }
    let consumed = d + seasonal_d * period;
    if series.len() <= consumed {
        return Err(Error::TooShort {
            required: consumed,
            actual: series.len(),
        });
    }
    let mut dates = series.dates.clone();
    let mut values = series.values.clone();
    let mut stages = Vec::with_capacity(d + seasonal_d);
    let lags = std::iter::repeat(period)
        .take(seasonal_d)
        .chain(std::iter::repeat(1).take(d));
    for lag in lags {
        let (nd, nv, stage) = diff_once(&dates, &values, lag);
        dates = nd;
        values = nv;
        stages.push(stage);
    }
    let ledger = DifferenceLedger {
        d,
        seasonal_d,
        period,
        stages,
    };
    Ok((TimeSeries::new(dates, values, series.frequency)?, ledger))
}

/// Inverse of [`difference`]. The differenced series may extend past the original
/// (e.g. forecasts appended), in which case the reconstruction extends too.
pub fn undifference(diffed: &TimeSeries, ledger: &DifferenceLedger) -> Result<TimeSeries> {
    let mut dates = diffed.dates.clone();
    let mut values = diffed.values.clone();
    for stage in ledger.stages.iter().rev() {
        if stage.head_values.len() != stage.lag || stage.head_dates.len() != stage.lag {
            return Err(Error::LedgerMismatch(format!(
                "stage at lag {} holds {} head values",
                stage.lag,
                stage.head_values.len()
            )));
        }
        if let (Some(last_head), Some(first)) = (stage.head_dates.last(), dates.first()) {
            if last_head >= first {
                return Err(Error::LedgerMismatch(format!(
                    "head ends at {last_head} but series starts at {first}"
                )));
            }
        }
        let mut restored = stage.head_values.clone();
        restored.reserve(values.len());
        for (k, z) in values.iter().enumerate() {
            let prev = restored[k];
            restored.push(z + prev);
        }
        let mut rd = stage.head_dates.clone();
        rd.extend_from_slice(&dates);
        dates = rd;
        values = restored;
    }
    TimeSeries::new(dates, values, diffed.frequency)
}

/// Chronological split at `floor(n * train_fraction)`; never shuffles.
pub fn split(series: &TimeSeries, train_fraction: f64) -> Result<(TimeSeries, TimeSeries)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = series.len();
    let boundary = (n as f64 * train_fraction).floor() as usize;
    if boundary == 0 || boundary >= n {
        return Err(Error::InvalidArgument(format!(
            "fraction {train_fraction} leaves an empty side for length {n}"
        )));
    }
    Ok((series.slice(0, boundary)?, series.slice(boundary, n)?))
}

/// A supervised pair: `size` past values and the value that follows.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub input: Vec<f64>,
    pub target: f64,
}

/// Stride-1 sliding windows over raw values.
pub fn window_values(values: &[f64], size: usize) -> Result<Vec<Window>> {
    if size == 0 {
        return Err(Error::InvalidArgument("window size must be at least 1".into()));
    }
    if values.len() <= size {
        return Err(Error::TooShort {
            required: size,
            actual: values.len(),
        });
    }
    Ok((0..values.len() - size)
        .map(|k| Window {
            input: values[k..k + size].to_vec(),
            target: values[k + size],
        })
        .collect())
}

pub fn window(series: &TimeSeries, size: usize) -> Result<Vec<Window>> {
    window_values(&series.values, size)
}

/// Observed range of the training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub min: f64,
    pub max: f64,
}

/// Min-max scaler mapping the fitted range onto [0, 1]. Values outside the
/// fitted range extrapolate linearly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    state: Option<ScalerState>,
}

impl MinMaxScaler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_state(state: ScalerState) -> Self {
        MinMaxScaler { state: Some(state) }
    }

    pub fn state(&self) -> Option<ScalerState> {
        self.state
    }

    pub fn fit(&mut self, values: &[f64]) -> Result<ScalerState> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("cannot fit scaler on no data".into()));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Err(Error::ConstantSeries);
        }
        let state = ScalerState { min, max };
        self.state = Some(state);
        Ok(state)
    }

    fn fitted(&self) -> Result<ScalerState> {
        self.state.ok_or(Error::ScalerNotFitted)
    }

    pub fn apply(&self, x: f64) -> Result<f64> {
        let s = self.fitted()?;
        Ok((x - s.min) / (s.max - s.min))
    }

    pub fn invert(&self, y: f64) -> Result<f64> {
        let s = self.fitted()?;
        Ok(y * (s.max - s.min) + s.min)
    }

    pub fn apply_all(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }

    pub fn invert_all(&self, ys: &[f64]) -> Result<Vec<f64>> {
        ys.iter().map(|&y| self.invert(y)).collect()
    }

    pub fn apply_series(&self, series: &TimeSeries) -> Result<TimeSeries> {
        series.with_values(self.apply_all(series.values())?)
    }
}
