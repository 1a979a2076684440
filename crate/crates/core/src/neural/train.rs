use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NetworkSpec, NetworkWeights};
use crate::error::{Error, Result};
use crate::series::{window_values, MinMaxScaler, TimeSeries, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub finder_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 1e-3,
            finder_epochs: 100,
            seed: 42,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss seen during each epoch.
    pub train_loss: Vec<f64>,
    /// Validation loss after each epoch; empty when no validation windows were given.
    pub validation_loss: Vec<f64>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,validation_loss\n");
        for (e, l) in self.train_loss.iter().enumerate() {
            let v = self.validation_loss.get(e).map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e + 1, l, v));
        }
        out
    }
}

fn shuffle_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// One pass of mini-batch SGD over `order`; returns the sample-weighted mean batch loss.
fn sgd_epoch(
    weights: &mut NetworkWeights,
    windows: &[Window],
    order: &[usize],
    lr: f64,
    epoch: usize,
) -> Result<f64> {
    let batch_size = weights.spec().batch_size;
    let mut total = 0.0;
    let mut batch = Vec::with_capacity(batch_size);
    for (b, chunk) in order.chunks(batch_size).enumerate() {
        batch.clear();
        batch.extend(chunk.iter().map(|i| windows[*i].clone()));
        let g = weights.backward(&batch).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { epoch, batch: b },
            other => other,
        })?;
        if !g.loss.is_finite() || g.grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch, batch: b });
        }
        for (p, d) in weights.params_mut().iter_mut().zip(&g.grad) {
            *p -= lr * d;
        }
        total += g.loss * chunk.len() as f64;
    }
    Ok(total / order.len() as f64)
}

/// Trains from a seeded Glorot initialization with plain mini-batch SGD.
/// Shuffling draws from a separate stream of the same seed, so runs with equal
/// seeds are bit-identical.
pub fn train(
    spec: &NetworkSpec,
    config: &TrainConfig,
    train_windows: &[Window],
    validation_windows: &[Window],
) -> Result<(NetworkWeights, TrainHistory)> {
    config.validate()?;
    if train_windows.is_empty() {
        return Err(Error::InvalidArgument("no training windows".into()));
    }
    let mut weights = NetworkWeights::init(spec, &mut ChaCha8Rng::seed_from_u64(config.seed))?;
    let mut rng = shuffle_rng(config.seed);
    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut history = TrainHistory::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let loss = sgd_epoch(&mut weights, train_windows, &order, config.learning_rate, epoch)?;
        history.train_loss.push(loss);
        if !validation_windows.is_empty() {
            history.validation_loss.push(weights.loss(validation_windows)?);
        }
    }
    Ok((weights, history))
}

/// Learning rate of the finder schedule: 1e-8 growing tenfold every 20 epochs.
pub fn finder_learning_rate(epoch: usize) -> f64 {
    1e-8 * 10f64.powf(epoch as f64 / 20.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrFinderResult {
    pub learning_rates: Vec<f64>,
    pub losses: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub suggested: f64,
}

impl LrFinderResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,learning_rate,loss,smoothed\n");
        for (e, ((lr, l), s)) in self.learning_rates.iter().zip(&self.losses).zip(&self.smoothed).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", e + 1, lr, l, s));
        }
        out
    }
}

fn moving_average(xs: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Runs `epoch(e, lr)` along the finder schedule and picks the rate where the
/// 5-point smoothed loss falls fastest. The sweep stops at the first divergent
/// epoch after the first; divergence at the very first epoch is an error.
pub fn lr_sweep<F>(epochs: usize, mut epoch: F) -> Result<LrFinderResult>
where
    F: FnMut(usize, f64) -> Result<f64>,
{
    let mut learning_rates = Vec::with_capacity(epochs);
    let mut losses = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let lr = finder_learning_rate(e);
        let loss = match epoch(e, lr) {
            Ok(l) if l.is_finite() => l,
            Ok(_) | Err(Error::Diverged { .. }) | Err(Error::NonFinite(_)) if e == 0 => {
                return Err(Error::Diverged { epoch: 0, batch: 0 })
            }
            Ok(_) | Err(Error::Diverged { .. }) | Err(Error::NonFinite(_)) => break,
            Err(other) => return Err(other),
        };
        learning_rates.push(lr);
        losses.push(loss);
    }
    let smoothed = moving_average(&losses, 5);
    let scale = smoothed.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let steepest = smoothed
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, w[1] - w[0]))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match steepest {
        Some((i, slope)) if slope < -1e-12 * scale => Ok(LrFinderResult {
            suggested: learning_rates[i],
            learning_rates,
            losses,
            smoothed,
        }),
        _ => Err(Error::NoDescent),
    }
}

/// Learning-rate finder on a freshly initialized network.
pub fn lr_finder(spec: &NetworkSpec, windows: &[Window], epochs: usize, seed: u64) -> Result<LrFinderResult> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument("no training windows".into()));
    }
    let mut weights = NetworkWeights::init(spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut rng = shuffle_rng(seed);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    lr_sweep(epochs, |e, lr| {
        order.shuffle(&mut rng);
        sgd_epoch(&mut weights, windows, &order, lr, e)
    })
}

/// Rolling one-step-ahead predictions over the test series, in original units.
/// The first prediction is for `test[window]`.
pub fn predict_series(weights: &NetworkWeights, test: &TimeSeries, scaler: &MinMaxScaler) -> Result<TimeSeries> {
    let size = weights.spec().window;
    let scaled = scaler.apply_all(test.values())?;
    let windows = window_values(&scaled, size)?;
    let preds: Vec<f64> = windows
        .iter()
        .map(|w| weights.forward(&w.input))
        .collect::<Result<_>>()?;
    TimeSeries::new(test.dates()[size..].to_vec(), scaler.invert_all(&preds)?, test.frequency())
}
