//! Additive forecaster `y(t) = g(t) + s(t) + h(t) + e_t`.
//!
//! `g` is piecewise linear with slope changes at fixed changepoints, `s` is a
//! sum of Fourier harmonics (yearly and optionally weekly) and `h` holds one
//! indicator per holiday name. All coefficients come from one ridge solve.
//!
//! Design columns, in order:
//! `1, t, relu(t − c_1) .. relu(t − c_m), yearly sin/cos k=1..K_y, weekly sin/cos k=1..K_w, holidays`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{ridge_solve_weighted, Matrix};
use crate::series::{Frequency, TimeSeries};

const YEAR_DAYS: f64 = 365.25;
const WEEK_DAYS: f64 = 7.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holiday {
    pub name: String,
    pub date: NaiveDate,
    /// Days before `date` covered by the effect (zero or negative).
    pub lower_window: i64,
    /// Days after `date` covered by the effect (zero or positive).
    pub upper_window: i64,
}

impl Holiday {
    fn covers(&self, date: NaiveDate) -> bool {
        let offset = (date - self.date).num_days();
        offset >= self.lower_window && offset <= self.upper_window
    }
}

#[derive(Deserialize)]
struct HolidayRow {
    name: String,
    date: NaiveDate,
    #[serde(default)]
    lower_window: i64,
    #[serde(default)]
    upper_window: i64,
}

/// Reads `name,date,lower_window,upper_window` rows.
pub fn read_holidays<R: Read>(reader: R) -> Result<Vec<Holiday>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: HolidayRow = row?;
        if row.lower_window > 0 || row.upper_window < 0 {
            return Err(Error::InvalidArgument(format!(
                "holiday {} on {}: lower_window must be <= 0 and upper_window >= 0",
                row.name, row.date
            )));
        }
        out.push(Holiday {
            name: row.name,
            date: row.date,
            lower_window: row.lower_window,
            upper_window: row.upper_window,
        });
    }
    Ok(out)
}

pub fn read_holidays_path(path: &Path) -> Result<Vec<Holiday>> {
    read_holidays(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveModelSpec {
    pub changepoints: usize,
    /// Fraction of the training span over which changepoints are spread.
    pub changepoint_range: f64,
    pub yearly_order: usize,
    pub weekly_order: usize,
    pub weekly_seasonality: bool,
    pub holidays: Vec<Holiday>,
    pub trend_penalty: f64,
    pub seasonal_penalty: f64,
    pub holiday_penalty: f64,
}

impl Default for AdditiveModelSpec {
    fn default() -> Self {
        AdditiveModelSpec {
            changepoints: 25,
            changepoint_range: 0.8,
            yearly_order: 10,
            weekly_order: 3,
            weekly_seasonality: false,
            holidays: Vec::new(),
            trend_penalty: 20.0,
            seasonal_penalty: 1.0,
            holiday_penalty: 1.0,
        }
    }
}

impl AdditiveModelSpec {
    /// Linear trend only: no changepoints, seasonality or holidays, no penalty.
    pub fn linear() -> Self {
        AdditiveModelSpec {
            changepoints: 0,
            yearly_order: 0,
            weekly_seasonality: false,
            trend_penalty: 0.0,
            seasonal_penalty: 0.0,
            holiday_penalty: 0.0,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let penalties = [self.trend_penalty, self.seasonal_penalty, self.holiday_penalty];
        if penalties.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument("penalties must be finite and non-negative".into()));
        }
        if !(self.changepoint_range > 0.0 && self.changepoint_range <= 1.0) {
            return Err(Error::InvalidArgument("changepoint_range must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn effective_weekly(&self) -> usize {
        if self.weekly_seasonality {
            self.weekly_order
        } else {
            0
        }
    }

    fn holiday_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.holidays.iter().map(|h| h.name.clone()).collect();
        names.sort();
        names.dedup();
        names
    }
}

/// Mapping from calendar dates to normalized model time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeScale {
    pub origin: NaiveDate,
    pub span_days: f64,
}

impl TimeScale {
    pub fn from_dates(dates: &[NaiveDate]) -> Self {
        let origin = dates[0];
        let span = (dates[dates.len() - 1] - origin).num_days() as f64;
        TimeScale {
            origin,
            span_days: if span > 0.0 { span } else { 1.0 },
        }
    }

    pub fn t(&self, date: NaiveDate) -> f64 {
        (date - self.origin).num_days() as f64 / self.span_days
    }
}

/// Changepoints in normalized time: whole days spread over the leading
/// `changepoint_range` of the span, strictly inside it.
pub fn changepoint_grid(spec: &AdditiveModelSpec, scale: &TimeScale) -> Vec<f64> {
    let n = spec.changepoints;
    let mut days: Vec<i64> = (1..=n)
        .map(|j| (spec.changepoint_range * scale.span_days * j as f64 / n as f64).round() as i64)
        .filter(|d| *d > 0 && (*d as f64) < scale.span_days)
        .collect();
    days.dedup();
    days.into_iter().map(|d| d as f64 / scale.span_days).collect()
}

fn epoch_days(date: NaiveDate) -> f64 {
    (date - NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days() as f64
}

fn fourier_into(row: &mut Vec<f64>, date: NaiveDate, period: f64, order: usize) {
    let x = epoch_days(date) / period;
    for k in 1..=order {
        let a = 2.0 * PI * k as f64 * x;
        row.push(a.sin());
        row.push(a.cos());
    }
}

struct Layout {
    changepoints: Vec<f64>,
    yearly: usize,
    weekly: usize,
    holidays: Vec<String>,
}

impl Layout {
    fn columns(&self) -> usize {
        2 + self.changepoints.len() + 2 * self.yearly + 2 * self.weekly + self.holidays.len()
    }

    fn row(&self, spec: &AdditiveModelSpec, scale: &TimeScale, date: NaiveDate) -> Vec<f64> {
        let t = scale.t(date);
        let mut row = Vec::with_capacity(self.columns());
        row.push(1.0);
        row.push(t);
        row.extend(self.changepoints.iter().map(|c| (t - c).max(0.0)));
        fourier_into(&mut row, date, YEAR_DAYS, self.yearly);
        fourier_into(&mut row, date, WEEK_DAYS, self.weekly);
        for name in &self.holidays {
            let hit = spec.holidays.iter().any(|h| &h.name == name && h.covers(date));
            row.push(if hit { 1.0 } else { 0.0 });
        }
        row
    }

    fn penalties(&self, spec: &AdditiveModelSpec) -> Vec<f64> {
        let mut p = vec![0.0, 0.0];
        p.extend(std::iter::repeat_n(spec.trend_penalty, self.changepoints.len()));
        p.extend(std::iter::repeat_n(spec.seasonal_penalty, 2 * (self.yearly + self.weekly)));
        p.extend(std::iter::repeat_n(spec.holiday_penalty, self.holidays.len()));
        p
    }
}

fn layout(spec: &AdditiveModelSpec, scale: &TimeScale) -> Layout {
    Layout {
        changepoints: changepoint_grid(spec, scale),
        yearly: spec.yearly_order,
        weekly: spec.effective_weekly(),
        holidays: spec.holiday_names(),
    }
}

/// Design matrix for `dates`, normalizing time over the span of `dates` itself.
pub fn build_design(spec: &AdditiveModelSpec, dates: &[NaiveDate]) -> Result<Matrix> {
    if dates.is_empty() {
        return Err(Error::InvalidArgument("design needs at least one date".into()));
    }
    let scale = TimeScale::from_dates(dates);
    let lay = layout(spec, &scale);
    let rows: Vec<Vec<f64>> = dates.iter().map(|d| lay.row(spec, &scale, *d)).collect();
    Matrix::from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFit {
    pub spec: AdditiveModelSpec,
    pub scale: TimeScale,
    pub frequency: Frequency,
    pub changepoints: Vec<f64>,
    pub intercept: f64,
    pub slope: f64,
    /// Slope adjustments, one per changepoint.
    pub deltas: Vec<f64>,
    /// Interleaved sin/cos coefficients for k = 1..K.
    pub yearly: Vec<f64>,
    pub weekly: Vec<f64>,
    pub holiday_names: Vec<String>,
    pub holiday_coefs: Vec<f64>,
    /// Residual standard deviation on the training data.
    pub sigma: f64,
    pub last_train_date: NaiveDate,
}

pub fn fit(spec: &AdditiveModelSpec, train: &TimeSeries) -> Result<AdditiveFit> {
    spec.validate()?;
    let scale = TimeScale::from_dates(train.dates());
    let lay = layout(spec, &scale);
    let cols = lay.columns();
    if train.len() < cols {
        return Err(Error::TooShort {
            required: cols,
            actual: train.len(),
        });
    }
    let rows: Vec<Vec<f64>> = train.dates().iter().map(|d| lay.row(spec, &scale, *d)).collect();
    let design = Matrix::from_rows(&rows)?;
    let beta = ridge_solve_weighted(&design, train.values(), &lay.penalties(spec))?;

    let fitted = design.mul_vec(&beta);
    let ssr: f64 = train.values().iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();

    let mut it = beta.into_iter();
    let mut take = |n: usize| (&mut it).take(n).collect::<Vec<_>>();
    let base = take(2);
    let deltas = take(lay.changepoints.len());
    let yearly = take(2 * lay.yearly);
    let weekly = take(2 * lay.weekly);
    let holiday_coefs = take(lay.holidays.len());
    Ok(AdditiveFit {
        spec: spec.clone(),
        scale,
        frequency: train.frequency(),
        changepoints: lay.changepoints,
        intercept: base[0],
        slope: base[1],
        deltas,
        yearly,
        weekly,
        holiday_names: lay.holidays,
        holiday_coefs,
        sigma: (ssr / train.len() as f64).sqrt(),
        last_train_date: train.last_date(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub trend: TimeSeries,
    pub weekly: TimeSeries,
    pub yearly: TimeSeries,
    pub holidays: TimeSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditivePrediction {
    pub series: TimeSeries,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn harmonic(coefs: &[f64], date: NaiveDate, period: f64) -> f64 {
    let x = epoch_days(date) / period;
    coefs
        .chunks(2)
        .enumerate()
        .map(|(k, c)| {
            let a = 2.0 * PI * (k + 1) as f64 * x;
            c[0] * a.sin() + c[1] * a.cos()
        })
        .sum()
}

impl AdditiveFit {
    pub fn trend_at(&self, date: NaiveDate) -> f64 {
        let t = self.scale.t(date);
        self.intercept
            + self.slope * t
            + self
                .changepoints
                .iter()
                .zip(&self.deltas)
                .map(|(c, d)| d * (t - c).max(0.0))
                .sum::<f64>()
    }

    fn holiday_at(&self, date: NaiveDate) -> f64 {
        self.holiday_names
            .iter()
            .zip(&self.holiday_coefs)
            .filter(|(name, _)| self.spec.holidays.iter().any(|h| &h.name == *name && h.covers(date)))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn components(&self, dates: &[NaiveDate]) -> Result<Components> {
        let series = |f: &dyn Fn(NaiveDate) -> f64| {
            TimeSeries::new(dates.to_vec(), dates.iter().map(|d| f(*d)).collect(), self.frequency)
        };
        Ok(Components {
            trend: series(&|d| self.trend_at(d))?,
            weekly: series(&|d| harmonic(&self.weekly, d, WEEK_DAYS))?,
            yearly: series(&|d| harmonic(&self.yearly, d, YEAR_DAYS))?,
            holidays: series(&|d| self.holiday_at(d))?,
        })
    }

    /// Point forecast (sum of components) with a ±1.96σ band.
    pub fn predict(&self, dates: &[NaiveDate]) -> Result<AdditivePrediction> {
        let c = self.components(dates)?;
        let values: Vec<f64> = (0..dates.len())
            .map(|i| c.trend.values()[i] + c.yearly.values()[i] + c.weekly.values()[i] + c.holidays.values()[i])
            .collect();
        let half = 1.96 * self.sigma;
        Ok(AdditivePrediction {
            lower: values.iter().map(|v| v - half).collect(),
            upper: values.iter().map(|v| v + half).collect(),
            series: TimeSeries::new(dates.to_vec(), values, self.frequency)?,
        })
    }

    /// The `horizon` dates following the training data at training frequency.
    pub fn future_dates(&self, horizon: usize) -> Vec<NaiveDate> {
        self.frequency.following(self.last_train_date, horizon)
    }

    /// Slope of the trend after the last changepoint (per unit of normalized time).
    pub fn final_slope(&self) -> f64 {
        self.slope + self.deltas.iter().sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut doc = BTreeMap::new();
        doc.insert("kind", serde_json::Value::String("additive".into()));
        doc.insert("model", serde_json::to_value(self)?);
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: BTreeMap<String, serde_json::Value> = serde_json::from_str(text)?;
        if doc.get("kind").and_then(|k| k.as_str()) != Some("additive") {
            return Err(Error::InvalidArgument("expected an additive model document".into()));
        }
        let model = doc.remove("model").ok_or_else(|| Error::InvalidArgument("missing model".into()))?;
        Ok(serde_json::from_value(model)?)
    }
}

/// Convenience for daily future frames: `horizon` days after `last`.
pub fn daily_frame(last: NaiveDate, horizon: usize) -> Vec<NaiveDate> {
    (1..=horizon as i64).map(|k| last + Duration::days(k)).collect()
}
