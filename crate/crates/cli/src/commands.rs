use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use tempora::additive::{self, AdditiveModelSpec};
use tempora::arima::{self, ArimaSpec, SeasonalOrder};
use tempora::diagnostics;
use tempora::evaluate::{self, metrics, ModelForecast, NeuralForecaster};
use tempora::ingest::{self, load_city};
use tempora::neural::{self, Activation, NetworkSpec, TrainConfig};
use tempora::plot::{self, Line, LineChart, XAxis};
use tempora::series::{split, window_values, MinMaxScaler};
use tempora::{CityKey, Frequency, ModelKind, StudyConfig, TimeSeries};

use crate::config::{usage, RunConfig};

type Result<T> = anyhow::Result<T>;

const TEMP_LABEL: &str = "average temperature (°F)";

/// Creates the output directory and records the resolved config in it.
fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.txt"), cfg.render())?;
    Ok(out)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn existing(cfg: &RunConfig, key: &str) -> Result<PathBuf> {
    let path = PathBuf::from(cfg.require::<String>(key)?);
    if !path.is_file() {
        return usage(format!("{key}: no such file {}", path.display()));
    }
    Ok(path)
}

fn frequency(cfg: &mut RunConfig, default: Frequency) -> Result<Frequency> {
    cfg.set_default("freq", default);
    Ok(cfg.require("freq")?)
}

fn default_split(freq: Frequency) -> f64 {
    match freq {
        Frequency::Daily => 0.85,
        Frequency::Monthly => 0.8,
    }
}

fn split_fraction(cfg: &mut RunConfig, freq: Frequency) -> Result<f64> {
    cfg.set_default("split", default_split(freq));
    let s: f64 = cfg.require("split")?;
    if !(s > 0.0 && s <= 1.0) {
        return usage(format!("split must lie in (0, 1], got {s}"));
    }
    Ok(s)
}

fn seed(cfg: &mut RunConfig) -> Result<u64> {
    cfg.set_default("seed", 42);
    cfg.require("seed")
}

fn city_label(cfg: &RunConfig) -> String {
    cfg.raw("city")
        .and_then(|c| c.split_once('/').map(|(_, city)| city.trim().to_string()))
        .unwrap_or_else(|| "series".into())
}

/// The series named by `series`, or else the `city` pulled from the `data` archive.
fn load_series(cfg: &mut RunConfig, default_freq: Frequency) -> Result<TimeSeries> {
    let freq = frequency(cfg, default_freq)?;
    if cfg.raw("series").is_some() {
        let path = existing(cfg, "series")?;
        return Ok(TimeSeries::read_csv_path(&path, freq)?);
    }
    let data = dataset(cfg)?;
    let city: CityKey = cfg.require("city")?;
    let loaded = ingest::load_city_path(&data, &city, freq)?;
    if loaded.imputed > 0 {
        eprintln!("note: imputed {} missing readings for {city}", loaded.imputed);
    }
    Ok(loaded.series)
}

fn dataset(cfg: &mut RunConfig) -> Result<PathBuf> {
    if cfg.raw("data").is_none() {
        if let Ok(p) = std::env::var("TEMPORA_DATASET") {
            cfg.set("data", p);
        }
    }
    existing(cfg, "data")
}

/// Train/test split; a fraction of 1 keeps everything for training.
fn train_test(series: &TimeSeries, fraction: f64) -> Result<(TimeSeries, Option<TimeSeries>)> {
    if fraction >= 1.0 {
        return Ok((series.clone(), None));
    }
    let (train, test) = split(series, fraction)?;
    Ok((train, Some(test)))
}

fn write_scored(out: &Path, forecast: &ModelForecast, split_label: &str, title: &str) -> Result<()> {
    let m = metrics(&forecast.actual, &forecast.predicted)?.named(forecast.model.name(), split_label);
    write(&out.join("forecast_test.csv"), forecast.to_csv())?;
    write(&out.join("metrics.json"), serde_json::to_string_pretty(&m)?)?;
    let mut chart = LineChart::new(title, "date", TEMP_LABEL, XAxis::Dates)
        .line(Line::from_series("actual", &forecast.actual))
        .line(Line::from_series("predicted", &forecast.predicted));
    if let Some((lo, hi)) = &forecast.band {
        let xs = Line::from_series("", &forecast.predicted).xs;
        chart = chart
            .line(Line::new("lower 95%", xs.clone(), lo.clone()).dashed())
            .line(Line::new("upper 95%", xs, hi.clone()).dashed());
    }
    write(&out.join("forecast_test.svg"), chart.render())?;
    println!("test  n={}  mae={:.6}  mse={:.6}  rmse={:.6}", m.n, m.mae, m.mse, m.rmse);
    Ok(())
}

fn split_label(fraction: f64) -> String {
    let train = (fraction * 100.0).round() as i64;
    format!("{}/{}", train, 100 - train)
}

pub fn ingest(cfg: &mut RunConfig) -> Result<()> {
    let data = dataset(cfg)?;
    let out = prepare_out(cfg)?;
    let bytes = fs::read(&data)?;
    if cfg.raw("city").is_none() {
        let parsed = ingest::parse_archive(bytes.as_slice())?;
        let mut csv = String::from("country,city,rows\n");
        for key in ingest::cities(&parsed.records) {
            let n = parsed.records.iter().filter(|r| r.key() == key).count();
            csv.push_str(&format!("{},{},{n}\n", key.country, key.city));
        }
        write(&out.join("cities.csv"), &csv)?;
        print!("{csv}");
        return Ok(());
    }
    let freq = frequency(cfg, Frequency::Daily)?;
    let city: CityKey = cfg.require("city")?;
    let loaded = load_city(bytes.as_slice(), &city, freq)?;
    loaded.series.write_csv_path(&out.join("series.csv"))?;
    let mut rej = String::from("line,reason\n");
    for r in &loaded.rejections {
        rej.push_str(&format!("{},\"{}\"\n", r.line, r.reason.replace('"', "'")));
    }
    write(&out.join("rejections.csv"), rej)?;
    let summary = serde_json::json!({
        "city": city.to_string(),
        "frequency": freq,
        "points": loaded.series.len(),
        "start": loaded.series.first_date(),
        "end": loaded.series.last_date(),
        "imputed": loaded.imputed,
        "rejected_rows": loaded.rejections.len(),
    });
    write(&out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{city}: {} {freq} points {}..{}, {} imputed, {} rows rejected",
        loaded.series.len(),
        loaded.series.first_date(),
        loaded.series.last_date(),
        loaded.imputed,
        loaded.rejections.len()
    );
    Ok(())
}

pub fn diagnose(cfg: &mut RunConfig) -> Result<()> {
    let series = load_series(cfg, Frequency::Monthly)?;
    let freq = series.frequency();
    cfg.set_default(
        "period",
        match freq {
            Frequency::Monthly => 12,
            Frequency::Daily => 7,
        },
    );
    cfg.set_default("max_lag", 36);
    let period: usize = cfg.require("period")?;
    let max_lag = cfg.require::<usize>("max_lag")?.min(series.len() - 1);
    let adf_max_lag: Option<usize> = cfg.get("adf_max_lag")?;
    let out = prepare_out(cfg)?;
    let name = city_label(cfg);

    let adf = diagnostics::adf_test(&series, adf_max_lag)?;
    let acf = diagnostics::acf(&series, max_lag)?;
    let pacf = diagnostics::pacf(&series, max_lag)?;
    let dec = diagnostics::decompose(&series, period)?;
    write(&out.join("adf.json"), serde_json::to_string_pretty(&adf)?)?;
    write(&out.join("acf.csv"), acf.to_csv())?;
    write(&out.join("pacf.csv"), pacf.to_csv())?;
    write(&out.join("decomposition.csv"), dec.to_csv())?;
    write(&out.join("acf.svg"), plot::correlogram_chart(&format!("{name}: autocorrelation"), &acf))?;
    write(
        &out.join("pacf.svg"),
        plot::correlogram_chart(&format!("{name}: partial autocorrelation"), &pacf),
    )?;
    write(
        &out.join("decompose.svg"),
        plot::decomposition_chart(&format!("{name}: seasonal decomposition"), &dec),
    )?;
    println!("{}", serde_json::to_string_pretty(&adf)?);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Arima,
    Sarima,
    Spec,
}

fn seasonal_order(cfg: &mut RunConfig, key: &str, warn: bool) -> Result<SeasonalOrder> {
    if cfg.raw(key).is_none() {
        if warn {
            eprintln!("warning: no seasonal order given; using (1,1,1,12)");
        }
        cfg.set(key, "1,1,1,12");
    }
    match cfg.list::<usize>(key)?.unwrap_or_default()[..] {
        [p, d, q, s] => Ok(SeasonalOrder::new(p, d, q, s)),
        _ => usage(format!("{key} expects P,D,Q,s")),
    }
}

fn order(cfg: &RunConfig, key: &str) -> Result<Option<[usize; 3]>> {
    match cfg.list::<usize>(key)? {
        None => Ok(None),
        Some(v) if v.len() == 3 => Ok(Some([v[0], v[1], v[2]])),
        Some(_) => usage(format!("{key} expects p,d,q")),
    }
}

pub fn fit_arima(cfg: &mut RunConfig, kind: FitKind) -> Result<()> {
    let spec = match kind {
        FitKind::Spec => cfg.require::<ArimaSpec>("spec")?,
        FitKind::Arima => {
            let [p, d, q] = order(cfg, "order")?.ok_or_else(|| crate::config::UsageError("missing --order p,d,q".into()))?;
            ArimaSpec::new(p, d, q)?
        }
        FitKind::Sarima => {
            let [p, d, q] = order(cfg, "order")?.ok_or_else(|| crate::config::UsageError("missing --order p,d,q".into()))?;
            ArimaSpec::seasonal(p, d, q, seasonal_order(cfg, "seasonal", true)?)?
        }
    };
    let series = load_series(cfg, Frequency::Monthly)?;
    let fraction = split_fraction(cfg, series.frequency())?;
    let out = prepare_out(cfg)?;
    let (train, test) = train_test(&series, fraction)?;
    let model = arima::fit(&spec, &train)?;
    write(&out.join("model.json"), model.to_json()?)?;
    let summary = serde_json::json!({
        "spec": spec.to_string(),
        "params": model.params,
        "aic": model.aic,
        "training_rmse": model.training_rmse,
        "n_eff": model.n_eff,
        "converged": model.converged,
        "iterations": model.iterations,
        "violations": model.violations.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>(),
    });
    write(&out.join("fit.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{spec}: aic={:.4} sigma2={:.6} training rmse={:.6}{}",
        model.aic,
        model.params.sigma2,
        model.training_rmse,
        if model.converged { "" } else { " (not converged)" }
    );
    if let Some(test) = test {
        let fc = arima::forecast(&model, test.len())?;
        let mk = if spec.is_seasonal() { ModelKind::Sarima } else { ModelKind::Arima };
        let forecast = ModelForecast {
            model: mk,
            actual: test,
            band: Some(fc.interval(1.96)),
            predicted: fc.series,
        };
        let title = format!("{}: {mk} {spec} predictions vs actual", city_label(cfg));
        write_scored(&out, &forecast, &split_label(fraction), &title)?;
    }
    Ok(())
}

fn additive_spec(cfg: &RunConfig) -> Result<AdditiveModelSpec> {
    let d = AdditiveModelSpec::default();
    let holidays = match cfg.raw("holidays") {
        Some(_) => additive::read_holidays_path(&existing(cfg, "holidays")?)?,
        None => Vec::new(),
    };
    Ok(AdditiveModelSpec {
        changepoints: cfg.get_or("changepoints", d.changepoints)?,
        changepoint_range: cfg.get_or("changepoint_range", d.changepoint_range)?,
        yearly_order: cfg.get_or("yearly_order", d.yearly_order)?,
        weekly_order: cfg.get_or("weekly_order", d.weekly_order)?,
        weekly_seasonality: cfg.flag("weekly")?,
        holidays,
        trend_penalty: cfg.get_or("trend_penalty", d.trend_penalty)?,
        seasonal_penalty: cfg.get_or("seasonal_penalty", d.seasonal_penalty)?,
        holiday_penalty: cfg.get_or("holiday_penalty", d.holiday_penalty)?,
    })
}

pub fn fit_additive(cfg: &mut RunConfig) -> Result<()> {
    let spec = additive_spec(cfg)?;
    let series = load_series(cfg, Frequency::Daily)?;
    let fraction = split_fraction(cfg, series.frequency())?;
    let out = prepare_out(cfg)?;
    let (train, test) = train_test(&series, fraction)?;
    let fit = additive::fit(&spec, &train)?;
    write(&out.join("model.json"), fit.to_json()?)?;

    let c = fit.components(train.dates())?;
    let mut csv = String::from("date,trend,yearly,weekly,holidays,yhat\n");
    for i in 0..train.len() {
        let parts = [c.trend.values()[i], c.yearly.values()[i], c.weekly.values()[i], c.holidays.values()[i]];
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            train.dates()[i],
            parts[0],
            parts[1],
            parts[2],
            parts[3],
            parts.iter().sum::<f64>()
        ));
    }
    write(&out.join("components.csv"), csv)?;
    let name = city_label(cfg);
    let mut chart = LineChart::new(&format!("{name}: additive model components"), "date", TEMP_LABEL, XAxis::Dates)
        .line(Line::from_series("trend", &c.trend))
        .line(Line::from_series("yearly", &c.yearly));
    if spec.weekly_seasonality {
        chart = chart.line(Line::from_series("weekly", &c.weekly));
    }
    if !spec.holidays.is_empty() {
        chart = chart.line(Line::from_series("holidays", &c.holidays));
    }
    write(&out.join("components.svg"), chart.render())?;
    println!(
        "additive fit: {} changepoints, sigma={:.4}, final slope={:.6}/day",
        fit.changepoints.len(),
        fit.sigma,
        fit.final_slope()
    );
    if let Some(test) = test {
        let p = fit.predict(test.dates())?;
        let forecast = ModelForecast {
            model: ModelKind::Additive,
            actual: test,
            band: Some((p.lower, p.upper)),
            predicted: p.series,
        };
        write_scored(&out, &forecast, &split_label(fraction), &format!("{name}: additive predictions vs actual"))?;
    }
    Ok(())
}

fn network_spec(cfg: &RunConfig) -> Result<NetworkSpec> {
    let d = NetworkSpec::default();
    let dense_units = cfg.list("dense")?.unwrap_or(d.dense_units.clone());
    let dense_activations = match cfg.list::<Activation>("dense_activations")? {
        Some(a) => a,
        None if dense_units == d.dense_units => d.dense_activations.clone(),
        None => (0..dense_units.len())
            .map(|i| if i + 1 == dense_units.len() { Activation::Identity } else { Activation::Relu })
            .collect(),
    };
    let spec = NetworkSpec {
        window: cfg.get_or("window", d.window)?,
        conv_filters: cfg.get_or("conv_filters", d.conv_filters)?,
        conv_kernel: cfg.get_or("kernel", d.conv_kernel)?,
        conv_activation: cfg.get_or("conv_activation", d.conv_activation)?,
        lstm_units: cfg.list("lstm")?.unwrap_or(d.lstm_units),
        dense_units,
        dense_activations,
        batch_size: cfg.get_or("batch", d.batch_size)?,
    };
    spec.validate()?;
    Ok(spec)
}

struct NetData {
    test: Option<TimeSeries>,
    scaler: MinMaxScaler,
    train_windows: Vec<tempora::series::Window>,
    test_windows: Vec<tempora::series::Window>,
    fraction: f64,
    full: TimeSeries,
}

fn net_data(cfg: &mut RunConfig, spec: &NetworkSpec) -> Result<NetData> {
    let series = load_series(cfg, Frequency::Daily)?;
    let fraction = split_fraction(cfg, series.frequency())?;
    let (train, test) = train_test(&series, fraction)?;
    let mut scaler = MinMaxScaler::new();
    scaler.fit(train.values())?;
    let train_windows = window_values(&scaler.apply_all(train.values())?, spec.window)?;
    let test_windows = match &test {
        Some(t) if t.len() > spec.window => window_values(&scaler.apply_all(t.values())?, spec.window)?,
        _ => Vec::new(),
    };
    Ok(NetData {
        test,
        scaler,
        train_windows,
        test_windows,
        fraction,
        full: series,
    })
}

fn write_lr_finder(out: &Path, name: &str, r: &neural::LrFinderResult) -> Result<()> {
    write(&out.join("lr_finder.csv"), r.to_csv())?;
    let chart = LineChart::new(&format!("{name}: learning rate of LSTM layer"), "learning rate", "loss", XAxis::Log)
        .line(Line::new("loss", r.learning_rates.clone(), r.losses.clone()))
        .line(Line::new("smoothed", r.learning_rates.clone(), r.smoothed.clone()).dashed());
    write(&out.join("lr_finder.svg"), chart.render())
}

pub fn lr_find(cfg: &mut RunConfig) -> Result<()> {
    let spec = network_spec(cfg)?;
    let seed = seed(cfg)?;
    cfg.set_default("finder_epochs", 100);
    let epochs: usize = cfg.require("finder_epochs")?;
    let data = net_data(cfg, &spec)?;
    let out = prepare_out(cfg)?;
    let r = neural::lr_finder(&spec, &data.train_windows, epochs, seed)?;
    write_lr_finder(&out, &city_label(cfg), &r)?;
    println!("suggested learning rate: {:e}", r.suggested);
    Ok(())
}

pub fn train_nn(cfg: &mut RunConfig) -> Result<()> {
    let spec = network_spec(cfg)?;
    let seed = seed(cfg)?;
    cfg.set_default("epochs", 500);
    cfg.set_default("lr", 1e-3);
    cfg.set_default("finder_epochs", 100);
    let epochs: usize = cfg.require("epochs")?;
    let finder_epochs: usize = cfg.require("finder_epochs")?;
    let data = net_data(cfg, &spec)?;
    let out = prepare_out(cfg)?;
    let name = city_label(cfg);
    let lr = if cfg.raw("lr").map(|v| v.eq_ignore_ascii_case("find")).unwrap_or(false) {
        let r = neural::lr_finder(&spec, &data.train_windows, finder_epochs, seed)?;
        write_lr_finder(&out, &name, &r)?;
        println!("learning rate from finder: {:e}", r.suggested);
        r.suggested
    } else {
        cfg.require("lr")?
    };
    let config = TrainConfig {
        epochs,
        learning_rate: lr,
        finder_epochs,
        seed,
    };
    let (weights, history) = neural::train(&spec, &config, &data.train_windows, &data.test_windows)?;
    write(&out.join("weights.json"), weights.to_json()?)?;
    write(&out.join("loss_history.csv"), history.to_csv())?;
    let ep: Vec<f64> = (1..=history.train_loss.len()).map(|e| e as f64).collect();
    let mut chart = LineChart::new(&format!("{name}: LSTM training loss"), "epoch", "MSE (scaled)", XAxis::Linear)
        .line(Line::new("train", ep.clone(), history.train_loss.clone()));
    if !history.validation_loss.is_empty() {
        chart = chart.line(Line::new("validation", ep, history.validation_loss.clone()));
    }
    write(&out.join("loss_history.svg"), chart.render())?;
    println!(
        "trained {} parameters for {epochs} epochs at lr {lr:e}; final train loss {:.6e}",
        weights.parameter_count(),
        history.train_loss.last().copied().unwrap_or(f64::NAN)
    );
    let forecaster = NeuralForecaster::new(weights.clone(), data.scaler.clone(), &data.full)?;
    write(&out.join("model.json"), forecaster.to_json()?)?;
    if let Some(test) = &data.test {
        if test.len() > spec.window {
            let predicted = neural::predict_series(&weights, test, &data.scaler)?;
            let forecast = ModelForecast {
                model: ModelKind::Lstm,
                actual: test.slice(spec.window, test.len())?,
                predicted,
                band: None,
            };
            write_scored(&out, &forecast, &split_label(data.fraction), &format!("{name}: LSTM predictions vs actual"))?;
        }
    }
    Ok(())
}

pub fn gridsearch(cfg: &mut RunConfig) -> Result<()> {
    let p = cfg.range("p", 0..=8)?;
    let d = cfg.range("d", 0..=2)?;
    let q = cfg.range("q", 0..=8)?;
    let seasonal = match cfg.raw("seasonal") {
        Some(_) => Some(seasonal_order(cfg, "seasonal", false)?),
        None => None,
    };
    let series = load_series(cfg, Frequency::Monthly)?;
    let fraction = split_fraction(cfg, series.frequency())?;
    if fraction >= 1.0 {
        return usage("gridsearch scores on the test split; use a split below 1");
    }
    let out = prepare_out(cfg)?;
    let (train, test) = split(&series, fraction)?;
    let grid = arima::grid_search(&train, &test, &p, &d, &q, seasonal)?;
    write(&out.join("gridsearch.csv"), evaluate::grid_to_csv(&grid))?;
    let failed = grid.iter().filter(|e| e.error.is_some()).count();
    println!("{} candidates, {failed} failed; best:", grid.len());
    for e in grid.iter().take(5).filter(|e| e.error.is_none()) {
        println!("  {}  rmse={:.6}", e.spec, e.rmse);
    }
    Ok(())
}

pub fn forecast(cfg: &mut RunConfig) -> Result<()> {
    let path = existing(cfg, "model")?;
    cfg.set_default("horizon", 14);
    let horizon: usize = cfg.require("horizon")?;
    let text = fs::read_to_string(&path)?;
    let model = evaluate::load_forecaster(&text)?;
    let start = match cfg.get::<chrono::NaiveDate>("start")? {
        Some(s) => s,
        None => model.frequency().next(model.last_date()),
    };
    let out = prepare_out(cfg)?;
    let series = evaluate::future_forecast(model.as_ref(), start, horizon)?;
    write(&out.join("forecast.csv"), evaluate::future_to_csv(&series))?;
    let chart = LineChart::new("future forecast", "date", TEMP_LABEL, XAxis::Dates).line(Line::from_series("forecast", &series));
    write(&out.join("forecast.svg"), chart.render())?;
    for (d, v) in series.dates().iter().zip(series.values()) {
        println!("{d}  {v:.3}");
    }
    Ok(())
}

pub fn study(cfg: &mut RunConfig) -> Result<()> {
    let data = dataset(cfg)?;
    let city: CityKey = cfg.require("city")?;
    let d = StudyConfig::default();
    let network = network_spec(cfg)?;
    let sarima_order = order(cfg, "sarima_order")?;
    let arima_order = order(cfg, "order")?;
    let seasonal = seasonal_order(cfg, "seasonal", true)?;
    let lr_raw = cfg.raw("lr").map(str::to_string);
    let (use_lr_finder, learning_rate) = match lr_raw.as_deref() {
        None | Some("find") => (true, d.learning_rate),
        Some(_) => (false, cfg.require("lr")?),
    };
    let study = StudyConfig {
        seed: seed(cfg)?,
        models: cfg.list("models")?.unwrap_or(d.models),
        daily_split: cfg.get_or("daily_split", d.daily_split)?,
        monthly_split: cfg.get_or("monthly_split", d.monthly_split)?,
        arima_order,
        grid_p: cfg.range("p", 0..=8)?,
        grid_d: cfg.range("d", 0..=2)?,
        grid_q: cfg.range("q", 0..=8)?,
        sarima_order,
        seasonal,
        additive: additive_spec(cfg)?,
        network,
        epochs: cfg.get_or("epochs", d.epochs)?,
        learning_rate,
        use_lr_finder,
        finder_epochs: cfg.get_or("finder_epochs", d.finder_epochs)?,
        future_start: cfg.get("start")?,
        future_horizon: cfg.get_or("horizon", d.future_horizon)?,
        max_lag: cfg.get_or("max_lag", d.max_lag)?,
    };
    let out = prepare_out(cfg)?;
    let report = evaluate::run_study(&data, &city, &study)?;
    evaluate::write_study_artifacts(&report, &out)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    if let Some(spec) = report.arima_spec {
        println!("arima order: {spec}");
    }
    if let Some(spec) = report.sarima_spec {
        println!("sarima order: {spec}");
    }
    print!("{}", report.table.to_csv());
    Ok(())
}

pub fn plot(cfg: &mut RunConfig) -> Result<()> {
    let input = existing(cfg, "input")?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&input)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return usage(format!("{} needs an x column and at least one y column", input.display()));
    }
    let wanted: Vec<String> = cfg.list("columns")?.unwrap_or_else(|| header[1..].to_vec());
    let mut cols = Vec::new();
    for w in &wanted {
        match header.iter().position(|h| h == w) {
            Some(i) if i > 0 => cols.push(i),
            _ => return usage(format!("no column {w:?} in {}", input.display())),
        }
    }
    let mut xs = Vec::new();
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    let mut dates = true;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?);
    }
    for rec in &rows {
        if rec[0].parse::<chrono::NaiveDate>().is_err() {
            dates = false;
        }
    }
    let log_x = cfg.flag("log_x")?;
    for (n, rec) in rows.iter().enumerate() {
        let x = if dates {
            plot::day_number(rec[0].parse().expect("checked above"))
        } else {
            match rec[0].parse::<f64>() {
                Ok(v) => v,
                Err(_) => return usage(format!("row {}: x value {:?} is neither a date nor a number", n + 2, &rec[0])),
            }
        };
        xs.push(x);
        for (k, &c) in cols.iter().enumerate() {
            ys[k].push(rec.get(c).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN));
        }
    }
    let axis = if dates {
        XAxis::Dates
    } else if log_x {
        XAxis::Log
    } else {
        XAxis::Linear
    };
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
    cfg.set_default("title", &stem);
    cfg.set_default("x_label", &header[0]);
    cfg.set_default("y_label", if cols.len() == 1 { header[cols[0]].as_str() } else { "value" });
    cfg.set_default("name", format!("{stem}.svg"));
    let mut chart = LineChart::new(
        cfg.raw("title").unwrap_or_default(),
        cfg.raw("x_label").unwrap_or_default(),
        cfg.raw("y_label").unwrap_or_default(),
        axis,
    );
    for (k, &c) in cols.iter().enumerate() {
        chart = chart.line(Line::new(&header[c], xs.clone(), ys[k].clone()));
    }
    let out = prepare_out(cfg)?;
    let path = out.join(cfg.raw("name").unwrap_or("plot.svg"));
    write(&path, chart.render())?;
    println!("wrote {}", path.display());
    Ok(())
}
