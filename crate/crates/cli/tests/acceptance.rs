//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tempora::additive::{self, AdditiveModelSpec};
use tempora::arima::{self, ArimaSpec, SeasonalOrder};
use tempora::diagnostics::adf_test;
use tempora::evaluate::{self, run_study, ModelKind, StudyConfig};
use tempora::neural::{self, Activation, NetworkSpec, NetworkWeights, TrainConfig};
use tempora::optimize::grad_check;
use tempora::series::{difference, undifference, window_values, MinMaxScaler, Window};
use tempora::{CityKey, Frequency, MetricsReport, TimeSeries};

// Tolerances and budgets.
const GRAD_REL_ERR: f64 = 1e-5;
const GRAD_BUDGET: Duration = Duration::from_secs(10);
const AR_MEAN_ERR: f64 = 0.08;
const AR_MAX_ERR: f64 = 0.2;
const AR_BUDGET: Duration = Duration::from_secs(30);
const ROUND_TRIP_ERR: f64 = 1e-9;
const ADF_MIN_HITS: usize = 18;
const RIO_SARIMA_BAND: (f64, f64) = (0.8, 3.3);
const RIO_BUDGET: Duration = Duration::from_secs(600);
const FUTURE_SWING_F: f64 = 20.0;
const ADDITIVE_COEF_REL: f64 = 0.01;
const ADDITIVE_RMSE_FRAC: f64 = 0.05;
const ADDITIVITY_ERR: f64 = 1e-9;
const SINE_RMSE: f64 = 0.1;
const SINE_SMOOTHING: usize = 10;
const SINE_BUDGET: Duration = Duration::from_secs(60);
const METRIC_IDENTITY_ERR: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn monthly(values: Vec<f64>) -> TimeSeries {
    TimeSeries::from_start(NaiveDate::from_ymd_opt(1990, 1, 31).unwrap(), values, Frequency::Monthly).unwrap()
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/city_temperature_200.csv")
}

fn real_dataset() -> Option<PathBuf> {
    let candidate = std::env::var_os("TEMPORA_DATASET")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/city_temperature.csv"));
    candidate.is_file().then_some(candidate)
}

fn blocked() -> Outcome {
    outcome(
        false,
        "blocked: city-temperature archive not found (set TEMPORA_DATASET or add data/city_temperature.csv)",
    )
}

fn gradient_correctness() -> Outcome {
    let t0 = Instant::now();
    let spec = NetworkSpec {
        window: 5,
        conv_filters: 2,
        conv_kernel: 5,
        conv_activation: Activation::Relu,
        lstm_units: vec![3, 3],
        dense_units: vec![2, 1],
        dense_activations: vec![Activation::Relu, Activation::Identity],
        batch_size: 4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut w = NetworkWeights::init(&spec, &mut rng).unwrap();
    // Nudge biases off zero so no ReLU sits exactly on its kink.
    for p in w.params_mut() {
        *p += rng.random_range(-0.05..0.05);
    }
    let batch: Vec<Window> = (0..4)
        .map(|_| Window {
            input: (0..5).map(|_| rng.random_range(0.0..1.0)).collect(),
            target: rng.random_range(0.0..1.0),
        })
        .collect();
    let loss = |p: &[f64]| NetworkWeights::from_params(&spec, p.to_vec()).unwrap().loss(&batch).unwrap();
    let grad = |p: &[f64]| NetworkWeights::from_params(&spec, p.to_vec()).unwrap().backward(&batch).unwrap().grad;
    let err = grad_check(loss, grad, w.params()).unwrap();
    let elapsed = t0.elapsed();
    outcome(
        err < GRAD_REL_ERR && elapsed < GRAD_BUDGET,
        format!(
            "max relative error {err:.3e} over {} parameters (< {GRAD_REL_ERR:e}), {:.2}s",
            w.parameter_count(),
            elapsed.as_secs_f64()
        ),
    )
}

fn parameter_counts() -> Outcome {
    let w = NetworkWeights::zeros(&NetworkSpec::default()).unwrap();
    let counts = w.layout().counts();
    let expected = [
        ("conv1d", 192),
        ("lstm1", 24832),
        ("lstm2", 33024),
        ("dense1", 2080),
        ("dense2", 1056),
        ("dense3", 33),
    ];
    let got: Vec<(&str, usize)> = counts.iter().map(|(n, c)| (n.as_str(), *c)).collect();
    outcome(
        got == expected,
        format!(
            "{} (lstm1 = 4*64*(64+32+1) = 24832; the published summary prints 24382)",
            got.iter().map(|(n, c)| format!("{n}={c}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn arima_consistency() -> Outcome {
    let t0 = Instant::now();
    let phi = 0.6;
    let spec = ArimaSpec::new(1, 0, 0).unwrap();
    let mut errs = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut x = 0.0;
        let mut values = Vec::with_capacity(500);
        for t in 0..700 {
            x = phi * x + normal(&mut rng);
            if t >= 200 {
                values.push(x);
            }
        }
        match arima::fit(&spec, &monthly(values)) {
            Ok(m) => errs.push((m.params.ar[0] - phi).abs()),
            Err(e) => return outcome(false, format!("seed {seed}: fit failed: {e}")),
        }
    }
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let elapsed = t0.elapsed();
    outcome(
        mean < AR_MEAN_ERR && worst < AR_MAX_ERR && elapsed < AR_BUDGET,
        format!(
            "mean |phi-0.6| = {mean:.4} (< {AR_MEAN_ERR}), max = {worst:.4} (< {AR_MAX_ERR}), {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn difference_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let d = case % 3;
        let seasonal_d = (case / 3) % 2;
        let period = if case % 2 == 0 { 7 } else { 12 };
        let freq = if period == 7 { Frequency::Daily } else { Frequency::Monthly };
        let n = rng.random_range(40..200);
        let mut level = rng.random_range(-50.0..50.0);
        let values: Vec<f64> = (0..n)
            .map(|_| {
                level += rng.random_range(-5.0..5.0);
                level
            })
            .collect();
        let series = TimeSeries::from_start(NaiveDate::from_ymd_opt(2001, 1, 31).unwrap(), values, freq).unwrap();
        let (diffed, ledger) = match difference(&series, d, seasonal_d, period) {
            Ok(x) => x,
            Err(e) => return outcome(false, format!("case {case}: {e}")),
        };
        let back = undifference(&diffed, &ledger).unwrap();
        if back.dates() != series.dates() {
            return outcome(false, format!("case {case}: dates changed"));
        }
        for (a, b) in back.values().iter().zip(series.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst < ROUND_TRIP_ERR, format!("max abs error {worst:.3e} over 100 series (< {ROUND_TRIP_ERR:e})"))
}

fn adf_discrimination() -> Outcome {
    let mut walk_hits = 0;
    let mut ar_hits = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let mut w = 0.0;
        let walk: Vec<f64> = (0..500)
            .map(|_| {
                w += normal(&mut rng);
                w
            })
            .collect();
        let mut x = 0.0;
        let ar: Vec<f64> = (0..600)
            .map(|_| {
                x = 0.5 * x + normal(&mut rng);
                x
            })
            .skip(100)
            .collect();
        if adf_test(&monthly(walk), None).map(|r| r.p_value > 0.05).unwrap_or(false) {
            walk_hits += 1;
        }
        if adf_test(&monthly(ar), None).map(|r| r.p_value < 0.05).unwrap_or(false) {
            ar_hits += 1;
        }
    }
    outcome(
        walk_hits >= ADF_MIN_HITS && ar_hits >= ADF_MIN_HITS,
        format!("random walk p > 0.05 on {walk_hits}/20, AR(1) p < 0.05 on {ar_hits}/20 (need >= {ADF_MIN_HITS})"),
    )
}

fn statistical_study(data: &Path, city: &CityKey, order: Option<[usize; 3]>, extra: &[ModelKind]) -> tempora::Result<evaluate::StudyReport> {
    let mut models = vec![ModelKind::Arima, ModelKind::Sarima];
    models.extend_from_slice(extra);
    let cfg = StudyConfig {
        models,
        arima_order: order,
        seasonal: SeasonalOrder::new(1, 1, 1, 12),
        future_start: Some(NaiveDate::from_ymd_opt(2022, 6, 1).unwrap()),
        future_horizon: 14,
        ..Default::default()
    };
    run_study(data, city, &cfg)
}

fn rio_ordering(reports: &mut Vec<MetricsReport>) -> Outcome {
    let Some(data) = real_dataset() else { return blocked() };
    let t0 = Instant::now();
    let extra: &[ModelKind] = if std::env::var_os("TEMPORA_ACCEPT_DAILY").is_some() {
        &[ModelKind::Additive, ModelKind::Lstm]
    } else {
        &[ModelKind::Additive]
    };
    let report = match statistical_study(&data, &CityKey::new("Brazil", "Rio de Janeiro"), None, extra) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("study failed: {e}")),
    };
    let elapsed = t0.elapsed();
    reports.extend(report.table.reports.iter().cloned());
    let rmse = |m: &str| report.table.get(m).map(|r| r.rmse).unwrap_or(f64::NAN);
    let (s, a) = (rmse("sarima"), rmse("arima"));
    println!(
        "    rio: arima {} rmse {a:.4} (published 1.834659), sarima rmse {s:.4} (published 1.634662), additive rmse {:.4} (published 3.691260), lstm rmse {:.4} (published 2.31686; not asserted)",
        report.arima_spec.map(|s| s.to_string()).unwrap_or_default(),
        rmse("additive"),
        rmse("lstm"),
    );
    outcome(
        s < a && s >= RIO_SARIMA_BAND.0 && s <= RIO_SARIMA_BAND.1 && elapsed < RIO_BUDGET,
        format!(
            "sarima {s:.4} < arima {a:.4}, sarima in [{}, {}], {:.1}s",
            RIO_SARIMA_BAND.0,
            RIO_SARIMA_BAND.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn delhi(reports: &mut Vec<MetricsReport>) -> (Outcome, Outcome) {
    let Some(data) = real_dataset() else { return (blocked(), blocked()) };
    let report = match statistical_study(&data, &CityKey::new("India", "Delhi"), Some([5, 0, 5]), &[]) {
        Ok(r) => r,
        Err(e) => {
            let f = || outcome(false, format!("study failed: {e}"));
            return (f(), f());
        }
    };
    reports.extend(report.table.reports.iter().cloned());
    let rmse = |m: &str| report.table.get(m).map(|r| r.rmse).unwrap_or(f64::NAN);
    let (s, a) = (rmse("sarima"), rmse("arima"));
    let ordering = outcome(
        s < a,
        format!("sarima (5,0,5)(1,1,1,12) rmse {s:.4} < arima (5,0,5) rmse {a:.4} (published 2.723928 vs 2.917654)"),
    );
    let shape = match &report.future {
        Some((ModelKind::Sarima, f)) => {
            let (imax, imin) = (0..f.len()).fold((0, 0), |(hi, lo), i| {
                (
                    if f.values()[i] > f.values()[hi] { i } else { hi },
                    if f.values()[i] < f.values()[lo] { i } else { lo },
                )
            });
            let (dmax, dmin) = (f.dates()[imax], f.dates()[imin]);
            let swing = f.values()[imax] - f.values()[imin];
            let pass = f.first_date() == NaiveDate::from_ymd_opt(2022, 6, 30).unwrap()
                && f.len() == 14
                && [6, 7].contains(&dmax.month())
                && [12, 1].contains(&dmin.month())
                && swing > FUTURE_SWING_F;
            outcome(
                pass,
                format!(
                    "max {:.2} on {dmax}, min {:.2} on {dmin}, swing {swing:.2} (> {FUTURE_SWING_F}; published 92.9 vs 55.8)",
                    f.values()[imax],
                    f.values()[imin]
                ),
            )
        }
        _ => outcome(false, "no sarima future forecast produced"),
    };
    (ordering, shape)
}

fn additive_recovery() -> Outcome {
    let (a, b, amp) = (50.0, 0.005, 15.0);
    let start = NaiveDate::from_ymd_opt(2012, 1, 1).unwrap();
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
    let n = 4 * 365 + 1;
    let dates: Vec<NaiveDate> = (0..n).map(|i| start + chrono::Duration::days(i)).collect();
    let values: Vec<f64> = dates
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let phase = 2.0 * PI * (*d - epoch).num_days() as f64 / 365.25;
            a + b * i as f64 + amp * phase.sin()
        })
        .collect();
    let series = TimeSeries::new(dates.clone(), values.clone(), Frequency::Daily).unwrap();
    let spec = AdditiveModelSpec {
        changepoints: 0,
        ..Default::default()
    };
    let fit = match additive::fit(&spec, &series) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("fit failed: {e}")),
    };
    let slope_true = b * (n - 1) as f64;
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    let coef_errs = [
        rel(fit.intercept, a),
        rel(fit.slope, slope_true),
        rel(fit.yearly[0], amp),
        fit.yearly[1].abs() / amp,
        fit.yearly[2..].iter().fold(0.0f64, |m, c| m.max(c.abs())) / amp,
    ];
    let worst_coef = coef_errs.iter().cloned().fold(0.0, f64::max);
    let pred = fit.predict(&dates).unwrap();
    let rmse = (pred.series.values().iter().zip(&values).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n as f64).sqrt();
    let comps = fit.components(&dates).unwrap();
    let additivity = (0..dates.len())
        .map(|i| {
            let sum = comps.trend.values()[i] + comps.yearly.values()[i] + comps.weekly.values()[i] + comps.holidays.values()[i];
            (sum - pred.series.values()[i]).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        worst_coef < ADDITIVE_COEF_REL && rmse < ADDITIVE_RMSE_FRAC * amp && additivity < ADDITIVITY_ERR,
        format!(
            "worst coefficient error {:.3}% (< 1%), in-sample rmse {rmse:.4} (< {:.2}), additivity {additivity:.1e}",
            100.0 * worst_coef,
            ADDITIVE_RMSE_FRAC * amp
        ),
    )
}

fn sine_convergence() -> Outcome {
    let t0 = Instant::now();
    let spec = NetworkSpec {
        window: 5,
        conv_filters: 8,
        conv_kernel: 3,
        conv_activation: Activation::Relu,
        lstm_units: vec![24, 24],
        dense_units: vec![24, 1],
        dense_activations: vec![Activation::Relu, Activation::Identity],
        batch_size: 32,
    };
    let values: Vec<f64> = (0..400).map(|i| (2.0 * PI * i as f64 / 25.0).sin()).collect();
    let series = TimeSeries::from_start(NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), values.clone(), Frequency::Daily).unwrap();
    let cut = (400.0 * 0.85) as usize;
    let mut scaler = MinMaxScaler::new();
    scaler.fit(&values[..cut]).unwrap();
    let train_w = window_values(&scaler.apply_all(&values[..cut]).unwrap(), spec.window).unwrap();
    let val_w = window_values(&scaler.apply_all(&values[cut..]).unwrap(), spec.window).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        learning_rate: 0.025,
        finder_epochs: 0,
        seed: 42,
    };
    let (weights, history) = match neural::train(&spec, &cfg, &train_w, &val_w) {
        Ok(x) => x,
        Err(e) => return outcome(false, format!("training failed: {e}")),
    };
    let test = series.slice(cut, series.len()).unwrap();
    let pred = neural::predict_series(&weights, &test, &scaler).unwrap();
    let actual = &test.values()[spec.window..];
    let rmse = (pred.values().iter().zip(actual).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / actual.len() as f64).sqrt();
    let smoothed: Vec<f64> = history
        .train_loss
        .windows(SINE_SMOOTHING)
        .map(|w| w.iter().sum::<f64>() / SINE_SMOOTHING as f64)
        .collect();
    let rises = smoothed.windows(2).filter(|w| w[1] > w[0]).count();
    let elapsed = t0.elapsed();
    outcome(
        rmse < SINE_RMSE && rises == 0 && elapsed < SINE_BUDGET,
        format!(
            "validation rmse {rmse:.4} (< {SINE_RMSE}), {rises} increases in the {SINE_SMOOTHING}-epoch moving average, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn study_run(out: &Path, threads: &str) -> Result<(), String> {
    let fx = fixture();
    let args = [
        "study", "--data", fx.to_str().unwrap(), "--city", "Brazil/Rio de Janeiro", "--seed", "42",
        "--out", out.to_str().unwrap(), "--p", "0..2", "--d", "0..1", "--q", "0..2", "--seasonal", "1,1,1,12",
        "--conv-filters", "4", "--lstm", "6,6", "--dense", "4,1", "--batch", "8", "--epochs", "15",
        "--finder-epochs", "30", "--changepoints", "5",
    ];
    let r = Command::new(env!("CARGO_BIN_EXE_tempora"))
        .args(args)
        .env("TEMPORA_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if r.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&r.stderr).into_owned())
    }
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(csv_files(&p));
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn parse_comparison(path: &Path) -> Vec<MetricsReport> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            MetricsReport {
                model: r[1].to_string(),
                frequency: r[2].parse().unwrap(),
                split: r[3].to_string(),
                n: r[4].parse().unwrap(),
                start: r[5].parse().unwrap(),
                end: r[6].parse().unwrap(),
                mae: r[7].parse().unwrap(),
                mse: r[8].parse().unwrap(),
                rmse: r[9].parse().unwrap(),
            }
        })
        .collect()
}

fn determinism(reports: &mut Vec<MetricsReport>) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        if let Err(e) = study_run(out, threads) {
            return outcome(false, format!("study failed: {e}"));
        }
    }
    let files_a = csv_files(&a);
    let mut compared = 0;
    for fa in &files_a {
        let fb = b.join(fa.strip_prefix(&a).unwrap());
        if fs::read(fa).ok() != fs::read(&fb).ok() {
            return outcome(false, format!("{} differs between runs", fa.strip_prefix(&a).unwrap().display()));
        }
        compared += 1;
    }
    if csv_files(&b).len() != compared {
        return outcome(false, "runs produced different file sets");
    }
    reports.extend(parse_comparison(&a.join("comparison.csv")));
    outcome(
        compared >= 10,
        format!("{compared} CSV files byte-identical across two `study --seed 42` runs (1 and 3 worker threads)"),
    )
}

fn metric_identities(reports: &[MetricsReport]) -> Outcome {
    if reports.is_empty() {
        return outcome(false, "no reports were generated");
    }
    let bad: Vec<String> = reports
        .iter()
        .filter(|r| !((r.rmse - r.mse.sqrt()).abs() <= METRIC_IDENTITY_ERR && r.mae <= r.rmse))
        .map(|r| format!("{} ({})", r.model, r.frequency))
        .collect();
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("rmse = sqrt(mse) within {METRIC_IDENTITY_ERR:e} and mae <= rmse on all {} reports", reports.len())
        } else {
            format!("violated by {}", bad.join(", "))
        },
    )
}

fn main() {
    let mut reports = Vec::new();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n: u32, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    record(1, "gradient correctness", gradient_correctness());
    record(2, "parameter counts", parameter_counts());
    record(3, "ARIMA consistency", arima_consistency());
    record(4, "differencing round trip", difference_round_trip());
    record(5, "ADF discrimination", adf_discrimination());
    record(6, "Rio ordering", rio_ordering(&mut reports));
    let (delhi_order, delhi_future) = delhi(&mut reports);
    record(7, "Delhi ordering", delhi_order);
    record(8, "Delhi future shape", delhi_future);
    record(9, "additive recovery", additive_recovery());
    record(10, "LSTM sine convergence", sine_convergence());
    record(11, "determinism", determinism(&mut reports));
    record(12, "metric identities", metric_identities(&reports));
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({failed:?})") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
