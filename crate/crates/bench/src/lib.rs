//! Synthetic inputs shared by the benchmarks.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempora::series::{window_values, Window};
use tempora::{Frequency, TimeSeries};

/// Monthly temperature-like series: yearly cycle plus AR(1) noise.
pub fn monthly_temperatures(n: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = 0.0;
    let values = (0..n)
        .map(|i| {
            e = 0.5 * e + rng.random_range(-1.5..1.5);
            70.0 + 12.0 * (2.0 * std::f64::consts::PI * i as f64 / 12.0).sin() + e
        })
        .collect();
    TimeSeries::from_start(NaiveDate::from_ymd_opt(1995, 1, 31).unwrap(), values, Frequency::Monthly).unwrap()
}

/// Daily series with a slow trend and a yearly cycle.
pub fn daily_temperatures(n: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|i| {
            let t = i as f64;
            60.0 + 0.001 * t + 15.0 * (2.0 * std::f64::consts::PI * t / 365.25).sin() + rng.random_range(-3.0..3.0)
        })
        .collect();
    TimeSeries::from_start(NaiveDate::from_ymd_opt(1995, 1, 1).unwrap(), values, Frequency::Daily).unwrap()
}

/// Scaled training windows cut from a noisy sine.
pub fn sine_windows(n: usize, window: usize, seed: u64) -> Vec<Window> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n)
        .map(|i| 0.5 + 0.4 * (i as f64 / 4.0).sin() + rng.random_range(-0.02..0.02))
        .collect();
    window_values(&values, window).unwrap()
}
