//! Time-series forecasting toolkit for daily city-temperature data.
//!
//! Four model families share one [`series::TimeSeries`] currency:
//! ARIMA/SARIMA fitted by conditional sum of squares ([`arima`]), an additive
//! piecewise-linear trend plus Fourier seasonality model ([`additive`]), and a
//! Conv1D + stacked LSTM network trained by backpropagation through time
//! ([`neural`]). [`diagnostics`] provides correlograms, the augmented
//! Dickey–Fuller test and classical decomposition; [`evaluate`] scores and
//! compares models and drives end-to-end studies.

pub mod error;
pub mod ingest;
pub mod optimize;
pub mod series;
pub mod diagnostics;
pub mod arima;
pub mod additive;
pub mod neural;
pub mod evaluate;
pub mod plot;

pub use error::{Error, Result};
pub use ingest::CityKey;
pub use series::{Frequency, TimeSeries};
pub use evaluate::{MetricsReport, ModelKind, StudyConfig};
