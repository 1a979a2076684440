//! Error metrics, model comparison and the end-to-end study driver.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::additive::{self, AdditiveFit, AdditiveModelSpec};
use crate::arima::{self, ArimaSpec, FittedArima, GridEntry, SeasonalOrder};
use crate::diagnostics::{self, AdfReport, CorrelogramResult, Decomposition};
use crate::error::{Error, Result};
use crate::ingest::{load_city, CityKey};
use crate::neural::{self, LrFinderResult, NetworkSpec, NetworkWeights, TrainConfig, TrainHistory};
use crate::plot::{self, Line, LineChart, XAxis};
use crate::series::{split, window_values, Frequency, MinMaxScaler, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub frequency: Frequency,
    pub split: String,
    pub n: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

impl MetricsReport {
    pub fn named(mut self, model: &str, split: &str) -> Self {
        self.model = model.to_string();
        self.split = split.to_string();
        self
    }
}

/// MAE, MSE and RMSE of `predicted` against `actual`; the dates must match exactly.
pub fn metrics(actual: &TimeSeries, predicted: &TimeSeries) -> Result<MetricsReport> {
    if actual.dates() != predicted.dates() {
        let a: BTreeSet<_> = actual.dates().iter().collect();
        let p: BTreeSet<_> = predicted.dates().iter().collect();
        return Err(Error::Misaligned(a.symmetric_difference(&p).map(|d| **d).collect()));
    }
    let n = actual.len();
    let (mut abs, mut sq) = (0.0, 0.0);
    for (a, p) in actual.values().iter().zip(predicted.values()) {
        abs += (a - p).abs();
        sq += (a - p) * (a - p);
    }
    let mse = sq / n as f64;
    Ok(MetricsReport {
        model: String::new(),
        frequency: actual.frequency(),
        split: String::new(),
        n,
        start: actual.first_date(),
        end: actual.last_date(),
        mae: abs / n as f64,
        mse,
        rmse: mse.sqrt(),
    })
}

/// Reports ranked by RMSE. Rows are grouped by frequency: within one
/// frequency every report must cover the same test dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub reports: Vec<MetricsReport>,
}

impl ComparisonTable {
    pub fn new(mut reports: Vec<MetricsReport>) -> Result<Self> {
        for a in &reports {
            for b in &reports {
                if a.frequency == b.frequency && (a.n, a.start, a.end) != (b.n, b.start, b.end) {
                    return Err(Error::InvalidArgument(format!(
                        "{} and {} are scored on different {} test sets",
                        a.model, b.model, a.frequency
                    )));
                }
            }
        }
        reports.sort_by(|a, b| a.rmse.total_cmp(&b.rmse).then_with(|| a.model.cmp(&b.model)));
        Ok(ComparisonTable { reports })
    }

    pub fn get(&self, model: &str) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.model == model)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,model,frequency,split,n,start,end,mae,mse,rmse\n");
        for (i, r) in self.reports.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                i + 1,
                r.model,
                r.frequency,
                r.split,
                r.n,
                r.start,
                r.end,
                r.mae,
                r.mse,
                r.rmse
            ));
        }
        out
    }
}

/// Anything that can extend its training data forward in time.
pub trait Forecaster {
    fn frequency(&self) -> Frequency;
    fn last_date(&self) -> NaiveDate;
    /// The next `horizon` values after [`Forecaster::last_date`].
    fn forecast_values(&self, horizon: usize) -> Result<Vec<f64>>;
}

impl Forecaster for FittedArima {
    fn frequency(&self) -> Frequency {
        self.differenced.frequency()
    }

    fn last_date(&self) -> NaiveDate {
        self.differenced.last_date()
    }

    fn forecast_values(&self, horizon: usize) -> Result<Vec<f64>> {
        Ok(arima::forecast(self, horizon)?.series.values().to_vec())
    }
}

impl Forecaster for AdditiveFit {
    fn frequency(&self) -> Frequency {
        self.frequency
    }

    fn last_date(&self) -> NaiveDate {
        self.last_train_date
    }

    fn forecast_values(&self, horizon: usize) -> Result<Vec<f64>> {
        Ok(self.predict(&self.future_dates(horizon))?.series.values().to_vec())
    }
}

/// A trained network plus what it needs to roll forward: the scaler and the
/// most recent observations.
#[derive(Debug, Clone)]
pub struct NeuralForecaster {
    pub weights: NetworkWeights,
    pub scaler: MinMaxScaler,
    pub history: TimeSeries,
}

impl Forecaster for NeuralForecaster {
    fn frequency(&self) -> Frequency {
        self.history.frequency()
    }

    fn last_date(&self) -> NaiveDate {
        self.history.last_date()
    }

    /// Recursive forecasting: each prediction is fed back as the newest input.
    fn forecast_values(&self, horizon: usize) -> Result<Vec<f64>> {
        let size = self.weights.spec().window;
        let values = self.history.values();
        if values.len() < size {
            return Err(Error::TooShort {
                required: size - 1,
                actual: values.len(),
            });
        }
        let mut window = self.scaler.apply_all(&values[values.len() - size..])?;
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let y = self.weights.forward(&window)?;
            out.push(self.scaler.invert(y)?);
            window.remove(0);
            window.push(y);
        }
        Ok(out)
    }
}

impl NeuralForecaster {
    /// Keeps only the last window of history, which is all forecasting needs.
    pub fn new(weights: NetworkWeights, scaler: MinMaxScaler, history: &TimeSeries) -> Result<Self> {
        let size = weights.spec().window;
        let start = history.len().saturating_sub(size);
        Ok(NeuralForecaster {
            history: history.slice(start, history.len())?,
            weights,
            scaler,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let weights: serde_json::Value = serde_json::from_str(&self.weights.to_json()?)?;
        Ok(serde_json::to_string(&serde_json::json!({
            "kind": "lstm",
            "weights": weights,
            "scaler": self.scaler,
            "history": self.history,
        }))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text)?;
        if doc["kind"] != "lstm" {
            return Err(Error::InvalidArgument(format!("expected an lstm model, found {}", doc["kind"])));
        }
        let weights = NetworkWeights::from_json(&doc["weights"].to_string())?;
        let scaler: MinMaxScaler = serde_json::from_value(doc["scaler"].clone())?;
        let history: TimeSeries = serde_json::from_value(doc["history"].clone())?;
        let (dates, values, freq) = history.into_parts();
        Ok(NeuralForecaster {
            weights,
            scaler,
            history: TimeSeries::new(dates, values, freq)?,
        })
    }
}

/// Reads any persisted model document, dispatching on its `kind` field.
pub fn load_forecaster(text: &str) -> Result<Box<dyn Forecaster>> {
    let doc: serde_json::Value = serde_json::from_str(text)?;
    match doc["kind"].as_str() {
        Some("arima") => Ok(Box::new(FittedArima::from_json(text)?)),
        Some("additive") => Ok(Box::new(AdditiveFit::from_json(text)?)),
        Some("lstm") => Ok(Box::new(NeuralForecaster::from_json(text)?)),
        Some("network") => Err(Error::InvalidArgument(
            "bare network weights carry no scaler or history; use the model file written by train-nn".into(),
        )),
        other => Err(Error::InvalidArgument(format!("unknown model kind {other:?}"))),
    }
}

/// Forecast of `horizon` points beginning at the first calendar stamp on or
/// after `start`. Any gap between the model's data and `start` is forecast
/// through and dropped.
pub fn future_forecast(model: &dyn Forecaster, start: NaiveDate, horizon: usize) -> Result<TimeSeries> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let freq = model.frequency();
    let last = model.last_date();
    if start <= last {
        return Err(Error::InvalidArgument(format!(
            "future start {start} is not after the last observation {last}"
        )));
    }
    let mut gap = 0;
    let mut d = freq.next(last);
    while d < start {
        d = freq.next(d);
        gap += 1;
    }
    let values = model.forecast_values(gap + horizon)?;
    let dates = freq.following(last, gap + horizon);
    TimeSeries::new(dates[gap..].to_vec(), values[gap..].to_vec(), freq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Arima,
    Sarima,
    Additive,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Arima, ModelKind::Sarima, ModelKind::Additive, ModelKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Arima => "arima",
            ModelKind::Sarima => "sarima",
            ModelKind::Additive => "additive",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arima" => Ok(ModelKind::Arima),
            "sarima" => Ok(ModelKind::Sarima),
            "additive" | "prophet" => Ok(ModelKind::Additive),
            "lstm" | "nn" => Ok(ModelKind::Lstm),
            other => Err(Error::InvalidArgument(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub daily_split: f64,
    pub monthly_split: f64,
    /// Fixed ARIMA orders; `None` selects them by grid search.
    pub arima_order: Option<[usize; 3]>,
    pub grid_p: Vec<usize>,
    pub grid_d: Vec<usize>,
    pub grid_q: Vec<usize>,
    /// Non-seasonal SARIMA orders; `None` reuses the ARIMA orders.
    pub sarima_order: Option<[usize; 3]>,
    pub seasonal: SeasonalOrder,
    pub additive: AdditiveModelSpec,
    pub network: NetworkSpec,
    pub epochs: usize,
    pub learning_rate: f64,
    pub use_lr_finder: bool,
    pub finder_epochs: usize,
    pub future_start: Option<NaiveDate>,
    pub future_horizon: usize,
    pub max_lag: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: 42,
            models: ModelKind::ALL.to_vec(),
            daily_split: 0.85,
            monthly_split: 0.8,
            arima_order: None,
            grid_p: (0..=8).collect(),
            grid_d: (0..=2).collect(),
            grid_q: (0..=8).collect(),
            sarima_order: None,
            seasonal: SeasonalOrder::new(1, 1, 1, 12),
            additive: AdditiveModelSpec::default(),
            network: NetworkSpec::default(),
            epochs: 500,
            learning_rate: 1e-3,
            use_lr_finder: true,
            finder_epochs: 100,
            future_start: None,
            future_horizon: 14,
            max_lag: 36,
        }
    }
}

impl StudyConfig {
    fn wants(&self, kind: ModelKind) -> bool {
        self.models.contains(&kind)
    }

    pub fn train_config(&self, learning_rate: f64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate,
            finder_epochs: self.finder_epochs,
            seed: self.seed,
        }
    }
}

/// Test-set predictions of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelForecast {
    pub model: ModelKind,
    pub actual: TimeSeries,
    pub predicted: TimeSeries,
    pub band: Option<(Vec<f64>, Vec<f64>)>,
}

impl ModelForecast {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,actual,predicted");
        if self.band.is_some() {
            out.push_str(",lower,upper");
        }
        out.push('\n');
        for i in 0..self.actual.len() {
            out.push_str(&format!(
                "{},{},{}",
                self.actual.dates()[i],
                self.actual.values()[i],
                self.predicted.values()[i]
            ));
            if let Some((lo, hi)) = &self.band {
                out.push_str(&format!(",{},{}", lo[i], hi[i]));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub adf: AdfReport,
    pub acf: CorrelogramResult,
    pub pacf: CorrelogramResult,
    pub decomposition: Option<Decomposition>,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub city: CityKey,
    pub table: ComparisonTable,
    pub forecasts: Vec<ModelForecast>,
    pub diagnostics: DiagnosticsReport,
    pub grid: Option<Vec<GridEntry>>,
    pub arima_spec: Option<ArimaSpec>,
    pub sarima_spec: Option<ArimaSpec>,
    pub future: Option<(ModelKind, TimeSeries)>,
    pub lr_finder: Option<LrFinderResult>,
    pub history: Option<TrainHistory>,
    pub imputed: usize,
    pub rejected_rows: usize,
    pub notes: Vec<String>,
}

fn diagnose_series(series: &TimeSeries, max_lag: usize, period: usize) -> Result<DiagnosticsReport> {
    let lag = max_lag.min(series.len() - 1);
    Ok(DiagnosticsReport {
        adf: diagnostics::adf_test(series, None).map_err(|e| e.at("adf"))?,
        acf: diagnostics::acf(series, lag).map_err(|e| e.at("acf"))?,
        pacf: diagnostics::pacf(series, lag).map_err(|e| e.at("pacf"))?,
        decomposition: if series.len() >= 2 * period {
            Some(diagnostics::decompose(series, period).map_err(|e| e.at("decompose"))?)
        } else {
            None
        },
    })
}

struct StatResult {
    forecasts: Vec<ModelForecast>,
    grid: Option<Vec<GridEntry>>,
    arima_spec: Option<ArimaSpec>,
    sarima_spec: Option<ArimaSpec>,
    future: Option<(ModelKind, TimeSeries)>,
}

fn arima_forecast(kind: ModelKind, model: &FittedArima, test: &TimeSeries) -> Result<ModelForecast> {
    let fc = arima::forecast(model, test.len())?;
    Ok(ModelForecast {
        model: kind,
        actual: test.clone(),
        band: Some(fc.interval(1.96)),
        predicted: fc.series,
    })
}

fn run_statistical(monthly: &TimeSeries, cfg: &StudyConfig) -> Result<StatResult> {
    let (train, test) = split(monthly, cfg.monthly_split).map_err(|e| e.at("monthly split"))?;
    let mut out = StatResult {
        forecasts: Vec::new(),
        grid: None,
        arima_spec: None,
        sarima_spec: None,
        future: None,
    };
    let order = match cfg.arima_order {
        Some(o) => o,
        None => {
            let grid = arima::grid_search(&train, &test, &cfg.grid_p, &cfg.grid_d, &cfg.grid_q, None)
                .map_err(|e| e.at("grid search"))?;
            let best = grid[0].spec;
            out.grid = Some(grid);
            [best.p, best.d, best.q]
        }
    };
    let mut future_model: Option<(ModelKind, ArimaSpec)> = None;
    if cfg.wants(ModelKind::Arima) {
        let spec = ArimaSpec::new(order[0], order[1], order[2]).map_err(|e| e.at("arima"))?;
        let model = arima::fit(&spec, &train).map_err(|e| e.at("arima fit"))?;
        out.forecasts.push(arima_forecast(ModelKind::Arima, &model, &test).map_err(|e| e.at("arima forecast"))?);
        out.arima_spec = Some(spec);
        future_model = Some((ModelKind::Arima, spec));
    }
    if cfg.wants(ModelKind::Sarima) {
        let [p, d, q] = cfg.sarima_order.unwrap_or(order);
        let spec = ArimaSpec::seasonal(p, d, q, cfg.seasonal).map_err(|e| e.at("sarima"))?;
        let model = arima::fit(&spec, &train).map_err(|e| e.at("sarima fit"))?;
        out.forecasts.push(arima_forecast(ModelKind::Sarima, &model, &test).map_err(|e| e.at("sarima forecast"))?);
        out.sarima_spec = Some(spec);
        future_model = Some((ModelKind::Sarima, spec));
    }
    if let Some((kind, spec)) = future_model {
        let full = arima::fit(&spec, monthly).map_err(|e| e.at("future refit"))?;
        let start = cfg.future_start.unwrap_or_else(|| Frequency::Monthly.next(monthly.last_date()));
        let series = future_forecast(&full, start, cfg.future_horizon).map_err(|e| e.at("future forecast"))?;
        out.future = Some((kind, series));
    }
    Ok(out)
}

struct DailyResult {
    forecasts: Vec<ModelForecast>,
    lr_finder: Option<LrFinderResult>,
    history: Option<TrainHistory>,
    notes: Vec<String>,
}

fn run_daily(daily: &TimeSeries, cfg: &StudyConfig) -> Result<DailyResult> {
    let (train, test) = split(daily, cfg.daily_split).map_err(|e| e.at("daily split"))?;
    let size = cfg.network.window;
    if test.len() <= size {
        return Err(Error::TooShort {
            required: size,
            actual: test.len(),
        }
        .at("daily split"));
    }
    // Both daily models are scored on the dates the network can predict.
    let scored = test.slice(size, test.len())?;
    let mut out = DailyResult {
        forecasts: Vec::new(),
        lr_finder: None,
        history: None,
        notes: Vec::new(),
    };
    if cfg.wants(ModelKind::Lstm) {
        let mut scaler = MinMaxScaler::new();
        scaler.fit(train.values()).map_err(|e| e.at("scaling"))?;
        let train_windows = window_values(&scaler.apply_all(train.values())?, size).map_err(|e| e.at("windows"))?;
        let val_windows = window_values(&scaler.apply_all(test.values())?, size).map_err(|e| e.at("windows"))?;
        let mut lr = cfg.learning_rate;
        if cfg.use_lr_finder {
            match neural::lr_finder(&cfg.network, &train_windows, cfg.finder_epochs, cfg.seed) {
                Ok(r) => {
                    lr = r.suggested;
                    out.lr_finder = Some(r);
                }
                Err(Error::NoDescent) => out.notes.push(format!(
                    "learning-rate finder saw no descent; using configured rate {lr}"
                )),
                Err(e) => return Err(e.at("lr finder")),
            }
        }
        let (weights, history) = neural::train(&cfg.network, &cfg.train_config(lr), &train_windows, &val_windows)
            .map_err(|e| e.at("lstm training"))?;
        let predicted = neural::predict_series(&weights, &test, &scaler).map_err(|e| e.at("lstm predict"))?;
        out.forecasts.push(ModelForecast {
            model: ModelKind::Lstm,
            actual: scored.clone(),
            predicted,
            band: None,
        });
        out.history = Some(history);
    }
    if cfg.wants(ModelKind::Additive) {
        let fit = additive::fit(&cfg.additive, &train).map_err(|e| e.at("additive fit"))?;
        let p = fit.predict(scored.dates()).map_err(|e| e.at("additive predict"))?;
        out.forecasts.push(ModelForecast {
            model: ModelKind::Additive,
            actual: scored,
            band: Some((p.lower, p.upper)),
            predicted: p.series,
        });
    }
    Ok(out)
}

/// Runs the whole pipeline for one city: diagnostics on the monthly series,
/// ARIMA/SARIMA on monthly data, the network and the additive model on daily
/// data. Independent model families run concurrently.
pub fn run_study(dataset: &Path, city: &CityKey, cfg: &StudyConfig) -> Result<StudyReport> {
    let bytes = std::fs::read(dataset).map_err(|e| Error::from(e).at("reading dataset"))?;
    let monthly = load_city(bytes.as_slice(), city, Frequency::Monthly).map_err(|e| e.at("ingest"))?;
    let need_daily = cfg.wants(ModelKind::Lstm) || cfg.wants(ModelKind::Additive);
    let need_monthly = cfg.wants(ModelKind::Arima) || cfg.wants(ModelKind::Sarima);
    let daily = if need_daily {
        Some(load_city(bytes.as_slice(), city, Frequency::Daily).map_err(|e| e.at("ingest"))?)
    } else {
        None
    };
    let diagnostics = diagnose_series(&monthly.series, cfg.max_lag, 12)?;

    let (stat, daily_result) = rayon::join(
        || need_monthly.then(|| run_statistical(&monthly.series, cfg)).transpose(),
        || daily.as_ref().map(|d| run_daily(&d.series, cfg)).transpose(),
    );
    let stat = stat?;
    let daily_result = daily_result?;

    let mut forecasts = Vec::new();
    let mut notes = Vec::new();
    let mut report = StudyReport {
        city: city.clone(),
        table: ComparisonTable { reports: Vec::new() },
        forecasts: Vec::new(),
        diagnostics,
        grid: None,
        arima_spec: None,
        sarima_spec: None,
        future: None,
        lr_finder: None,
        history: None,
        imputed: monthly.imputed,
        rejected_rows: monthly.rejections.len(),
        notes: Vec::new(),
    };
    if let Some(s) = stat {
        forecasts.extend(s.forecasts);
        report.grid = s.grid;
        report.arima_spec = s.arima_spec;
        report.sarima_spec = s.sarima_spec;
        report.future = s.future;
    }
    if let Some(d) = daily_result {
        forecasts.extend(d.forecasts);
        report.lr_finder = d.lr_finder;
        report.history = d.history;
        notes.extend(d.notes);
    }
    forecasts.sort_by_key(|f| f.model);
    let reports = forecasts
        .iter()
        .map(|f| {
            let split_label = match f.actual.frequency() {
                Frequency::Daily => split_label(cfg.daily_split),
                Frequency::Monthly => split_label(cfg.monthly_split),
            };
            metrics(&f.actual, &f.predicted).map(|m| m.named(f.model.name(), &split_label))
        })
        .collect::<Result<Vec<_>>>()?;
    report.table = ComparisonTable::new(reports)?;
    report.forecasts = forecasts;
    report.notes = notes;
    Ok(report)
}

fn split_label(fraction: f64) -> String {
    let train = (fraction * 100.0).round() as i64;
    format!("{}/{}", train, 100 - train)
}

pub fn future_to_csv(series: &TimeSeries) -> String {
    let mut out = String::from("date,predicted\n");
    for (d, v) in series.dates().iter().zip(series.values()) {
        out.push_str(&format!("{d},{v}\n"));
    }
    out
}

pub fn grid_to_csv(grid: &[GridEntry]) -> String {
    let mut out = String::from("rank,p,d,q,rmse,aic,error\n");
    for (i, e) in grid.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i + 1,
            e.spec.p,
            e.spec.d,
            e.spec.q,
            e.rmse,
            e.aic.map(|a| a.to_string()).unwrap_or_default(),
            e.error.as_deref().unwrap_or("").replace(',', ";")
        ));
    }
    out
}

/// Writes tables, forecasts, diagnostics and plots under `out`.
pub fn write_study_artifacts(report: &StudyReport, out: &Path) -> Result<()> {
    let diag = out.join("diagnostics");
    std::fs::create_dir_all(&diag)?;
    let city = report.city.city.clone();
    std::fs::write(out.join("comparison.csv"), report.table.to_csv())?;
    for f in &report.forecasts {
        std::fs::write(out.join(format!("forecast_{}.csv", f.model)), f.to_csv())?;
        let mut chart = LineChart::new(
            &format!("{city}: {} predictions vs actual", f.model),
            "date",
            "average temperature (°F)",
            XAxis::Dates,
        )
        .line(Line::from_series("actual", &f.actual))
        .line(Line::from_series("predicted", &f.predicted));
        if let Some((lo, hi)) = &f.band {
            let xs: Vec<f64> = Line::from_series("", &f.predicted).xs;
            chart = chart
                .line(Line::new("lower 95%", xs.clone(), lo.clone()).dashed())
                .line(Line::new("upper 95%", xs, hi.clone()).dashed());
        }
        std::fs::write(out.join(format!("forecast_{}.svg", f.model)), chart.render())?;
    }
    let d = &report.diagnostics;
    std::fs::write(diag.join("adf.json"), serde_json::to_string_pretty(&d.adf)?)?;
    std::fs::write(diag.join("acf.csv"), d.acf.to_csv())?;
    std::fs::write(diag.join("pacf.csv"), d.pacf.to_csv())?;
    std::fs::write(diag.join("acf.svg"), plot::correlogram_chart(&format!("{city}: autocorrelation"), &d.acf))?;
    std::fs::write(
        diag.join("pacf.svg"),
        plot::correlogram_chart(&format!("{city}: partial autocorrelation"), &d.pacf),
    )?;
    if let Some(dec) = &d.decomposition {
        std::fs::write(diag.join("decomposition.csv"), dec.to_csv())?;
        std::fs::write(
            diag.join("decompose.svg"),
            plot::decomposition_chart(&format!("{city}: seasonal decomposition"), dec),
        )?;
    }
    if let Some(grid) = &report.grid {
        std::fs::write(out.join("gridsearch.csv"), grid_to_csv(grid))?;
    }
    if let Some((kind, series)) = &report.future {
        std::fs::write(out.join(format!("future_{kind}.csv")), future_to_csv(series))?;
        let chart = LineChart::new(&format!("{city}: future {kind} forecast"), "date", "average temperature (°F)", XAxis::Dates)
            .line(Line::from_series("forecast", series));
        std::fs::write(out.join(format!("future_{kind}.svg")), chart.render())?;
    }
    if let Some(h) = &report.history {
        std::fs::write(out.join("loss_history.csv"), h.to_csv())?;
        let epochs: Vec<f64> = (1..=h.train_loss.len()).map(|e| e as f64).collect();
        let mut chart = LineChart::new(&format!("{city}: LSTM training loss"), "epoch", "MSE (scaled)", XAxis::Linear)
            .line(Line::new("train", epochs.clone(), h.train_loss.clone()));
        if !h.validation_loss.is_empty() {
            chart = chart.line(Line::new("validation", epochs, h.validation_loss.clone()));
        }
        std::fs::write(out.join("loss_history.svg"), chart.render())?;
    }
    if let Some(r) = &report.lr_finder {
        std::fs::write(out.join("lr_finder.csv"), r.to_csv())?;
        let chart = LineChart::new(&format!("{city}: learning rate of LSTM layer"), "learning rate", "loss", XAxis::Log)
            .line(Line::new("loss", r.learning_rates.clone(), r.losses.clone()))
            .line(Line::new("smoothed", r.learning_rates.clone(), r.smoothed.clone()).dashed());
        std::fs::write(out.join("lr_finder.svg"), chart.render())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::ArimaParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn monthly(values: Vec<f64>) -> TimeSeries {
        TimeSeries::from_start(NaiveDate::from_ymd_opt(2000, 1, 31).unwrap(), values, Frequency::Monthly).unwrap()
    }

    #[test]
    fn metric_examples() {
        let a = monthly(vec![0.0, 0.0]);
        let r = metrics(&a, &a).unwrap();
        assert_eq!((r.mae, r.mse, r.rmse), (0.0, 0.0, 0.0));
        let r = metrics(&a, &monthly(vec![1.0, -1.0])).unwrap();
        assert_eq!((r.mae, r.mse, r.rmse), (1.0, 1.0, 1.0));
        assert!((5.367847f64.sqrt() - 2.31686).abs() < 1e-5);
    }

    #[test]
    fn metric_identities_and_translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a: Vec<f64> = (0..30).map(|_| rng.random_range(-10.0..10.0)).collect();
            let p: Vec<f64> = (0..30).map(|_| rng.random_range(-10.0..10.0)).collect();
            let r = metrics(&monthly(a.clone()), &monthly(p.clone())).unwrap();
            assert!((r.rmse - r.mse.sqrt()).abs() <= 1e-12);
            assert!(r.mae <= r.rmse);
            let c = rng.random_range(-100.0..100.0);
            let shifted = metrics(
                &monthly(a.iter().map(|v| v + c).collect()),
                &monthly(p.iter().map(|v| v + c).collect()),
            )
            .unwrap();
            assert!((shifted.mse - r.mse).abs() < 1e-9 && (shifted.mae - r.mae).abs() < 1e-9);
        }
    }

    #[test]
    fn misaligned_dates_are_listed() {
        let a = monthly(vec![1.0, 2.0, 3.0]);
        let b = TimeSeries::from_start(NaiveDate::from_ymd_opt(2000, 2, 29).unwrap(), vec![1.0, 2.0, 3.0], Frequency::Monthly)
            .unwrap();
        match metrics(&a, &b) {
            Err(Error::Misaligned(d)) => assert_eq!(
                d,
                vec![NaiveDate::from_ymd_opt(2000, 1, 31).unwrap(), NaiveDate::from_ymd_opt(2000, 4, 30).unwrap()]
            ),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_ranks_and_checks_coverage() {
        let a = monthly(vec![1.0, 2.0, 3.0]);
        let good = metrics(&a, &monthly(vec![1.0, 2.0, 3.5])).unwrap().named("good", "80/20");
        let bad = metrics(&a, &monthly(vec![3.0, 2.0, 1.0])).unwrap().named("bad", "80/20");
        let t = ComparisonTable::new(vec![bad.clone(), good.clone()]).unwrap();
        assert_eq!(t.reports[0].model, "good");
        assert_eq!(t.reports.len(), 2);
        let short = metrics(&a.slice(0, 2).unwrap(), &monthly(vec![1.0, 2.0])).unwrap().named("short", "80/20");
        assert!(ComparisonTable::new(vec![good, short]).is_err());
        assert!(t.to_csv().starts_with("rank,model,frequency"));
    }

    #[test]
    fn future_forecast_horizon_one_delegates() {
        let x: Vec<f64> = (0..80).map(|i| 50.0 + 10.0 * (i as f64 * 0.5).sin()).collect();
        let m = arima::fit(&"2,0,0".parse().unwrap(), &monthly(x)).unwrap();
        let next = Frequency::Monthly.next(m.last_date());
        let f = future_forecast(&m, next, 1).unwrap();
        let direct = arima::forecast(&m, 1).unwrap();
        assert_eq!(f, direct.series);
        // gap handling: starting a year later equals the tail of a longer forecast
        let later = future_forecast(&m, NaiveDate::from_ymd_opt(2007, 9, 1).unwrap(), 3).unwrap();
        assert_eq!(later.first_date(), NaiveDate::from_ymd_opt(2007, 9, 30).unwrap());
        let long = arima::forecast(&m, 15).unwrap();
        assert_eq!(later.values(), &long.series.values()[12..]);
        assert!(future_forecast(&m, m.last_date(), 2).is_err());
    }

    #[test]
    fn neural_forecaster_rolls_forward() {
        let spec = NetworkSpec::tiny();
        let mut w = NetworkWeights::zeros(&spec).unwrap();
        let last = w.layout().dense.last().unwrap().biases;
        w.params_mut()[last] = 0.25;
        let mut scaler = MinMaxScaler::new();
        scaler.fit(&[0.0, 100.0]).unwrap();
        let f = NeuralForecaster::new(w, scaler, &monthly(vec![10.0; 8])).unwrap();
        assert_eq!(f.history.len(), 5);
        assert_eq!(f.forecast_values(3).unwrap(), vec![25.0; 3]);
        let back = load_forecaster(&f.to_json().unwrap()).unwrap();
        assert_eq!(back.forecast_values(3).unwrap(), vec![25.0; 3]);
        assert_eq!(back.last_date(), f.last_date());
    }

    fn synthetic_archive(path: &Path, seed: u64) -> TimeSeries {
        // Monthly SARIMA(0,0,0)(1,1,0,12) around a seasonal cycle, one reading per month.
        let spec = ArimaSpec::seasonal(0, 0, 0, SeasonalOrder::new(1, 1, 0, 12)).unwrap();
        let params = ArimaParams {
            seasonal_ar: vec![-0.4],
            sigma2: 1.0,
            ..ArimaParams::zeros(&spec)
        };
        let noise = arima::simulate(&spec, &params, 180, 60, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut text = String::from("Region,Country,State,City,Month,Day,Year,AvgTemperature\n");
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for (i, e) in noise.iter().enumerate() {
            let year = 2000 + (i / 12) as i32;
            let month = (i % 12) as u32 + 1;
            let v = 70.0 + 15.0 * (2.0 * std::f64::consts::PI * (month as f64 - 4.0) / 12.0).sin() + e;
            text.push_str(&format!("Asia,Testland,,Synth,{month},15,{year},{v}\n"));
            dates.push(crate::series::month_end(year, month));
            values.push(v);
        }
        std::fs::write(path, text).unwrap();
        TimeSeries::new(dates, values, Frequency::Monthly).unwrap()
    }

    #[test]
    fn sarima_wins_on_seasonal_synthetic_city() {
        let dir = std::env::temp_dir().join(format!("tempora-study-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("synthetic.csv");
        synthetic_archive(&path, 17);
        let cfg = StudyConfig {
            models: vec![ModelKind::Arima, ModelKind::Sarima],
            arima_order: Some([2, 0, 1]),
            seasonal: SeasonalOrder::new(1, 1, 0, 12),
            sarima_order: Some([0, 0, 0]),
            ..Default::default()
        };
        let report = run_study(&path, &CityKey::new("Testland", "Synth"), &cfg).unwrap();
        let sarima = report.table.get("sarima").unwrap();
        let arima = report.table.get("arima").unwrap();
        assert!(sarima.rmse < arima.rmse, "{sarima:?} {arima:?}");
        assert!(sarima.rmse < 2.0, "{}", sarima.rmse);
        assert_eq!(report.future.as_ref().unwrap().1.len(), 14);
        write_study_artifacts(&report, &dir).unwrap();
        assert!(dir.join("comparison.csv").exists());
        assert!(dir.join("diagnostics/adf.json").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
