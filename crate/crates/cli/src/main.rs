use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{RunConfig, UsageError};

#[derive(Parser)]
#[command(
    name = "tempora",
    version,
    about = "Forecast city temperatures with ARIMA, SARIMA, an additive model and a Conv1D+LSTM network",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load one city from the archive, impute sentinels and write its series
    Ingest(IngestArgs),
    /// ADF test, ACF/PACF correlograms and seasonal decomposition
    Diagnose(DiagnoseArgs),
    /// Fit a non-seasonal ARIMA(p,d,q) by conditional sum of squares
    FitArima(FitArgs),
    /// Fit ARIMA or SARIMA from a single spec string
    Fit(FitArgs),
    /// Fit a seasonal ARIMA(p,d,q)(P,D,Q,s)
    FitSarima(FitArgs),
    /// Fit the additive trend + seasonality model
    FitAdditive(AdditiveArgs),
    /// Sweep learning rates and report the steepest-descent rate
    LrFind(NetArgs),
    /// Train the Conv1D+LSTM network
    TrainNn(NetArgs),
    /// Score every (p,d,q) combination on the holdout split
    Gridsearch(GridArgs),
    /// Forecast forward from a saved model
    Forecast(ForecastArgs),
    /// Run all four models on one city and compare them
    Study(StudyArgs),
    /// Render a CSV of columns as an SVG line chart
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Extra setting, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct Source {
    /// City-temperature archive CSV
    #[arg(long, value_name = "CSV")]
    data: Option<String>,
    /// "Country/City"
    #[arg(long)]
    city: Option<String>,
    /// daily or monthly
    #[arg(long)]
    freq: Option<String>,
    /// A date,value CSV to use instead of the archive
    #[arg(long, value_name = "CSV")]
    series: Option<String>,
    /// Training fraction; the rest is the test split
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    max_lag: Option<String>,
    /// Seasonal period for the decomposition
    #[arg(long)]
    period: Option<String>,
    /// Largest ADF lag considered by AIC selection
    #[arg(long)]
    adf_max_lag: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    /// p,d,q or p,d,q,P,D,Q,s
    #[arg(long)]
    spec: Option<String>,
    /// p,d,q
    #[arg(long)]
    order: Option<String>,
    /// P,D,Q,s
    #[arg(long)]
    seasonal: Option<String>,
}

#[derive(Args)]
struct AdditiveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    changepoints: Option<String>,
    #[arg(long)]
    changepoint_range: Option<String>,
    #[arg(long)]
    yearly_order: Option<String>,
    #[arg(long)]
    weekly_order: Option<String>,
    /// Add weekly seasonality
    #[arg(long)]
    weekly: bool,
    /// Holiday calendar CSV: name,date,lower_window,upper_window
    #[arg(long, value_name = "CSV")]
    holidays: Option<String>,
    #[arg(long)]
    trend_penalty: Option<String>,
}

#[derive(Args)]
struct NetworkFlags {
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    conv_filters: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    /// LSTM layer widths, e.g. 64,64
    #[arg(long)]
    lstm: Option<String>,
    /// Dense layer widths, e.g. 32,32,1
    #[arg(long)]
    dense: Option<String>,
    #[arg(long)]
    batch: Option<String>,
}

#[derive(Args)]
struct NetArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    net: NetworkFlags,
    #[arg(long)]
    epochs: Option<String>,
    /// Learning rate, or `find` to run the finder first
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    finder_epochs: Option<String>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    /// e.g. 0..8
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// P,D,Q,s shared by every candidate
    #[arg(long)]
    seasonal: Option<String>,
}

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    common: Common,
    /// Model JSON written by a fit or train command
    #[arg(long, value_name = "JSON")]
    model: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// First date to report (YYYY-MM-DD)
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    net: NetworkFlags,
    /// Subset of arima,sarima,additive,lstm
    #[arg(long)]
    models: Option<String>,
    /// ARIMA p,d,q; grid search when absent
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    sarima_order: Option<String>,
    #[arg(long)]
    seasonal: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    finder_epochs: Option<String>,
    #[arg(long)]
    changepoints: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: Common,
    /// CSV whose first column is the x axis
    #[arg(long, value_name = "CSV")]
    input: Option<String>,
    /// Columns to draw (default: all)
    #[arg(long)]
    columns: Option<String>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    x_label: Option<String>,
    #[arg(long)]
    y_label: Option<String>,
    #[arg(long)]
    log_x: bool,
    /// Output file name inside --out
    #[arg(long)]
    name: Option<String>,
}

macro_rules! put {
    ($cfg:expr, $src:expr, $($field:ident),*) => {
        $( if let Some(v) = &$src.$field { $cfg.set(stringify!($field), v); } )*
    };
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        put!(cfg, self, out);
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                return config::usage(format!("--set expects KEY=VALUE, got {kv:?}"));
            };
            cfg.set(k, v.trim());
        }
        Ok(cfg)
    }
}

impl Source {
    fn apply(&self, cfg: &mut RunConfig) {
        put!(cfg, self, data, city, freq, series, split, seed);
    }
}

impl NetworkFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        put!(cfg, self, window, conv_filters, kernel, lstm, dense, batch);
    }
}

fn resolve(command: &Command) -> anyhow::Result<RunConfig> {
    let cfg = match command {
        Command::Ingest(a) => {
            let mut c = a.common.resolve()?;
            a.source.apply(&mut c);
            c
        }
        Command::Diagnose(a) => {
            let mut c = a.common.resolve()?;
            a.source.apply(&mut c);
            put!(c, a, max_lag, period, adf_max_lag);
            c
        }
        Command::FitArima(a) | Command::Fit(a) | Command::FitSarima(a) => {
            let mut c = a.common.resolve()?;
            a.source.apply(&mut c);
            put!(c, a, spec, order, seasonal);
            c
        }
        Command::FitAdditive(a) => {
            let mut c = a.common.resolve()?;
            a.source.apply(&mut c);
            put!(c, a, changepoints, changepoint_range, yearly_order, weekly_order, holidays, trend_penalty);
            if a.weekly {
                c.set("weekly", true);
            }
            c
        }
        Command::LrFind(a) | Command::TrainNn(a) => {
            let mut c = a.common.resolve()?;
            a.source.apply(&mut c);
            a.net.apply(&mut c);
            put!(c, a, epochs, lr, finder_epochs);
            c
        }
        Command::Gridsearch(a) => {
            let mut c = a.common.resolve()?;
            a.source.apply(&mut c);
            put!(c, a, p, d, q, seasonal);
            c
        }
        Command::Forecast(a) => {
            let mut c = a.common.resolve()?;
            put!(c, a, model, horizon, start);
            c
        }
        Command::Study(a) => {
            let mut c = a.common.resolve()?;
            a.source.apply(&mut c);
            a.net.apply(&mut c);
            put!(c, a, models, order, sarima_order, seasonal, p, d, q, epochs, lr, finder_epochs, changepoints, horizon, start);
            c
        }
        Command::Plot(a) => {
            let mut c = a.common.resolve()?;
            put!(c, a, input, columns, title, x_label, y_label, name);
            if a.log_x {
                c.set("log_x", true);
            }
            c
        }
    };
    Ok(cfg)
}

fn run(command: Command) -> anyhow::Result<()> {
    let mut cfg = resolve(&command)?;
    match command {
        Command::Ingest(_) => commands::ingest(&mut cfg),
        Command::Diagnose(_) => commands::diagnose(&mut cfg),
        Command::FitArima(_) => commands::fit_arima(&mut cfg, commands::FitKind::Arima),
        Command::Fit(_) => commands::fit_arima(&mut cfg, commands::FitKind::Spec),
        Command::FitSarima(_) => commands::fit_arima(&mut cfg, commands::FitKind::Sarima),
        Command::FitAdditive(_) => commands::fit_additive(&mut cfg),
        Command::LrFind(_) => commands::lr_find(&mut cfg),
        Command::TrainNn(_) => commands::train_nn(&mut cfg),
        Command::Gridsearch(_) => commands::gridsearch(&mut cfg),
        Command::Forecast(_) => commands::forecast(&mut cfg),
        Command::Study(_) => commands::study(&mut cfg),
        Command::Plot(_) => commands::plot(&mut cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<tempora::Error>() {
            return if e.is_user_error() { 1 } else { 2 };
        }
    }
    2
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("TEMPORA_THREADS") {
        let n: usize = match v.trim().parse() {
            Ok(n) if n > 0 => n,
            _ => return config::usage(format!("TEMPORA_THREADS must be a positive integer, got {v:?}")),
        };
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match init_threads().and_then(|_| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
