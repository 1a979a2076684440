//! Stationarity and structure analysis: sample ACF, Durbin–Levinson PACF, the
//! augmented Dickey–Fuller test and classical additive decomposition.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{Cholesky, Matrix};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelogramResult {
    pub lags: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// Half-width of the white-noise band, 1.96/√n.
    pub band: f64,
}

impl CorrelogramResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lag,coefficient,lower,upper\n");
        for (l, c) in self.lags.iter().zip(&self.coefficients) {
            s.push_str(&format!("{l},{c},{},{}\n", -self.band, self.band));
        }
        s
    }
}

/// Sample autocorrelations with denominator n.
pub fn acf_values(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if max_lag >= n {
        return Err(Error::InvalidArgument(format!("max lag {max_lag} must be below length {n}")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = dev.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if !(c0 > 1e-12 * mean.abs().max(1.0).powi(2)) {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                let ck: f64 = dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                ck / c0
            }
        })
        .collect())
}

pub fn acf(series: &TimeSeries, max_lag: usize) -> Result<CorrelogramResult> {
    let coefficients = acf_values(series.values(), max_lag)?;
    Ok(CorrelogramResult {
        lags: (0..=max_lag).collect(),
        coefficients,
        band: 1.96 / (series.len() as f64).sqrt(),
    })
}

/// Partial autocorrelations from autocorrelations `r[0..=K]` by Durbin–Levinson.
pub fn durbin_levinson(r: &[f64]) -> Vec<f64> {
    let max_lag = r.len().saturating_sub(1);
    let mut out = vec![1.0];
    let mut phi: Vec<f64> = Vec::new();
    for k in 1..=max_lag {
        let num = r[k] - (1..k).map(|j| phi[j - 1] * r[k - j]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j - 1] * r[j]).sum::<f64>();
        let kk = if den.abs() < 1e-15 { 0.0 } else { num / den };
        let mut next: Vec<f64> = (1..k).map(|j| phi[j - 1] - kk * phi[k - j - 1]).collect();
        next.push(kk);
        phi = next;
        out.push(kk);
    }
    out
}

pub fn pacf(series: &TimeSeries, max_lag: usize) -> Result<CorrelogramResult> {
    let r = acf_values(series.values(), max_lag)?;
    Ok(CorrelogramResult {
        lags: (0..=max_lag).collect(),
        coefficients: durbin_levinson(&r),
        band: 1.96 / (series.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stationary,
    NonStationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub one_percent: f64,
    pub five_percent: f64,
    pub ten_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfReport {
    pub statistic: f64,
    pub p_value: f64,
    pub lags_used: usize,
    pub n_obs: usize,
    pub critical_values: CriticalValues,
    pub verdict: Verdict,
}

// Response-surface coefficients (constant, no trend) for the 1/5/10% critical
// values: cv(T) = b0 + b1/T + b2/T² + b3/T³.
const CV_SURFACE: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];

// Upper-tail quantiles of the constant-only Dickey–Fuller t distribution at
// probabilities 0.90, 0.95, 0.975, 0.99, tabulated by sample size.
const UPPER_TAIL_N: [f64; 6] = [25.0, 50.0, 100.0, 250.0, 500.0, f64::INFINITY];
const UPPER_TAIL: [[f64; 4]; 6] = [
    [-0.37, 0.00, 0.34, 0.72],
    [-0.40, -0.03, 0.29, 0.66],
    [-0.42, -0.05, 0.26, 0.63],
    [-0.42, -0.06, 0.24, 0.62],
    [-0.43, -0.07, 0.24, 0.61],
    [-0.44, -0.07, 0.23, 0.60],
];

fn critical_values(n_obs: usize) -> CriticalValues {
    let t = n_obs as f64;
    let cv = |b: &[f64; 4]| b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t);
    CriticalValues {
        one_percent: cv(&CV_SURFACE[0]),
        five_percent: cv(&CV_SURFACE[1]),
        ten_percent: cv(&CV_SURFACE[2]),
    }
}

fn upper_tail(n_obs: usize) -> [f64; 4] {
    // Linear in 1/n between tabulated rows.
    let inv = 1.0 / n_obs as f64;
    let inv_of = |n: f64| if n.is_infinite() { 0.0 } else { 1.0 / n };
    if inv >= inv_of(UPPER_TAIL_N[0]) {
        return UPPER_TAIL[0];
    }
    for i in 0..UPPER_TAIL_N.len() - 1 {
        let (a, b) = (inv_of(UPPER_TAIL_N[i]), inv_of(UPPER_TAIL_N[i + 1]));
        if inv <= a && inv >= b {
            let w = (a - inv) / (a - b);
            let mut out = [0.0; 4];
            for (j, o) in out.iter_mut().enumerate() {
                *o = UPPER_TAIL[i][j] + w * (UPPER_TAIL[i + 1][j] - UPPER_TAIL[i][j]);
            }
            return out;
        }
    }
    UPPER_TAIL[UPPER_TAIL.len() - 1]
}

/// Monotone piecewise-linear map from statistic to p-value, clamped to [0.001, 0.999].
fn adf_p_value(statistic: f64, n_obs: usize) -> f64 {
    let cv = critical_values(n_obs);
    let up = upper_tail(n_obs);
    let knots = [
        (cv.one_percent - 1.0, 0.001),
        (cv.one_percent, 0.01),
        (cv.five_percent, 0.05),
        (cv.ten_percent, 0.10),
        (up[0], 0.90),
        (up[1], 0.95),
        (up[2], 0.975),
        (up[3], 0.99),
        (up[3] + 1.0, 0.999),
    ];
    if statistic <= knots[0].0 {
        return 0.001;
    }
    for w in knots.windows(2) {
        let ((x0, p0), (x1, p1)) = (w[0], w[1]);
        if statistic <= x1 {
            return p0 + (statistic - x0) / (x1 - x0) * (p1 - p0);
        }
    }
    0.999
}

struct OlsFit {
    coef: Vec<f64>,
    se: Vec<f64>,
    rss: f64,
    n: usize,
}

fn ols(rows: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let x = Matrix::from_rows(rows)?;
    let chol = Cholesky::new(&x.gram()).map_err(|_| Error::Singular("ADF regression matrix".into()))?;
    let coef = chol.solve(&x.t_mul_vec(y));
    let fitted = x.mul_vec(&coef);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let dof = rows.len().saturating_sub(x.cols()).max(1);
    let s2 = rss / dof as f64;
    let se = chol.inverse_diagonal().iter().map(|v| (v * s2).sqrt()).collect();
    Ok(OlsFit {
        coef,
        se,
        rss,
        n: rows.len(),
    })
}

/// Regression rows for Δy_t = α + γ y_{t−1} + Σ β_i Δy_{t−i}, using t from `start`.
fn adf_design(y: &[f64], dy: &[f64], lags: usize, start: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    // dy[t-1] = y[t] - y[t-1]
    let mut rows = Vec::new();
    let mut target = Vec::new();
    for t in start..y.len() {
        let mut row = Vec::with_capacity(lags + 2);
        row.push(1.0);
        row.push(y[t - 1]);
        for i in 1..=lags {
            row.push(dy[t - 1 - i]);
        }
        rows.push(row);
        target.push(dy[t - 1]);
    }
    (rows, target)
}

pub fn default_adf_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey–Fuller test with a constant and AIC lag selection over
/// `0..=max_lag`.
pub fn adf_test(series: &TimeSeries, max_lag: Option<usize>) -> Result<AdfReport> {
    let y = series.values();
    let n = y.len();
    if n < 20 {
        return Err(Error::TooShort {
            required: 19,
            actual: n,
        });
    }
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    // Keep enough observations for the largest regression.
    let cap = (n - 1) / 2 - 2;
    let max_lag = max_lag.unwrap_or_else(|| default_adf_max_lag(n)).min(cap);

    let mut best: Option<(f64, usize)> = None;
    for k in 0..=max_lag {
        let (rows, target) = adf_design(y, &dy, k, max_lag + 1);
        let fit = ols(&rows, &target)?;
        let aic = fit.n as f64 * (fit.rss / fit.n as f64).ln() + 2.0 * (k + 2) as f64;
        if best.map_or(true, |(b, _)| aic < b) {
            best = Some((aic, k));
        }
    }
    let lags = best.map(|b| b.1).unwrap_or(0);
    let (rows, target) = adf_design(y, &dy, lags, lags + 1);
    let fit = ols(&rows, &target)?;
    let statistic = fit.coef[1] / fit.se[1];
    if !statistic.is_finite() {
        return Err(Error::Singular("ADF statistic is not finite".into()));
    }
    let p_value = adf_p_value(statistic, fit.n);
    Ok(AdfReport {
        statistic,
        p_value,
        lags_used: lags,
        n_obs: fit.n,
        critical_values: critical_values(fit.n),
        verdict: if p_value < 0.05 {
            Verdict::Stationary
        } else {
            Verdict::NonStationary
        },
    })
}

/// Observed = trend + seasonal + residual. Trend and residual are `None` where
/// the centered moving average is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub dates: Vec<NaiveDate>,
    pub period: usize,
    pub observed: Vec<f64>,
    pub trend: Vec<Option<f64>>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<Option<f64>>,
}

pub fn decompose(series: &TimeSeries, period: usize) -> Result<Decomposition> {
    let x = series.values();
    let n = x.len();
    if period < 2 {
        return Err(Error::InvalidArgument("period must be at least 2".into()));
    }
    if n < 2 * period {
        return Err(Error::TooShort {
            required: 2 * period - 1,
            actual: n,
        });
    }
    let weights: Vec<f64> = if period % 2 == 0 {
        let mut w = vec![1.0 / period as f64; period + 1];
        w[0] = 0.5 / period as f64;
        w[period] = 0.5 / period as f64;
        w
    } else {
        vec![1.0 / period as f64; period]
    };
    let half = weights.len() / 2;
    let mut trend = vec![None; n];
    for t in half..n - half {
        trend[t] = Some(weights.iter().enumerate().map(|(j, w)| w * x[t + j - half]).sum());
    }

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for t in 0..n {
        if let Some(tr) = trend[t] {
            sums[t % period] += x[t] - tr;
            counts[t % period] += 1;
        }
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect();
    let centre = means.iter().sum::<f64>() / period as f64;
    let pattern: Vec<f64> = means.iter().map(|m| m - centre).collect();
    let seasonal: Vec<f64> = (0..n).map(|t| pattern[t % period]).collect();
    let residual = (0..n).map(|t| trend[t].map(|tr| x[t] - tr - seasonal[t])).collect();
    Ok(Decomposition {
        dates: series.dates().to_vec(),
        period,
        observed: x.to_vec(),
        trend,
        seasonal,
        residual,
    })
}

impl Decomposition {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("date,observed,trend,seasonal,residual\n");
        for i in 0..self.dates.len() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                self.dates[i].format("%Y-%m-%d"),
                self.observed[i],
                opt(self.trend[i]),
                self.seasonal[i],
                opt(self.residual[i])
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Frequency;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::from_start(NaiveDate::from_ymd_opt(2000, 1, 31).unwrap(), values, Frequency::Monthly).unwrap()
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar(coefs: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let e = noise(seed, n + 200);
        let mut y = vec![0.0; n + 200];
        for t in 0..y.len() {
            y[t] = e[t] + coefs.iter().enumerate().filter(|(i, _)| t > *i).map(|(i, c)| c * y[t - i - 1]).sum::<f64>();
        }
        y.split_off(200)
    }

    #[test]
    fn acf_rejects_constant() {
        let mut v = vec![5.0; 50];
        assert!(matches!(acf(&series(v.clone()), 5), Err(Error::ZeroVariance)));
        v[10] = 6.0;
        assert!(acf(&series(v), 5).is_ok());
    }

    #[test]
    fn acf_white_noise_within_band() {
        let r = acf(&series(noise(3, 2000)), 20).unwrap();
        assert_eq!(r.coefficients[0], 1.0);
        let bound = 3.0 / 2000f64.sqrt();
        assert!(r.coefficients[1..].iter().all(|c| c.abs() < bound), "{:?}", r.coefficients);
        assert!((r.band - 1.96 / 2000f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn acf_ar1_decays_geometrically() {
        let r = acf(&series(ar(&[0.5], 5000, 9)), 2).unwrap();
        let c1 = r.coefficients[1];
        assert!((0.45..=0.55).contains(&c1), "{c1}");
        assert!((r.coefficients[2] - c1 * c1).abs() < 0.05);
    }

    #[test]
    fn pacf_ar1_cuts_off() {
        let s = series(ar(&[0.5], 5000, 21));
        let p = pacf(&s, 10).unwrap();
        let a = acf(&s, 1).unwrap();
        assert_eq!(p.coefficients[0], 1.0);
        assert_eq!(p.coefficients[1], a.coefficients[1]);
        assert!((p.coefficients[1] - 0.5).abs() < 0.05);
        assert!(p.coefficients[2..].iter().all(|c| c.abs() < 0.05), "{:?}", p.coefficients);
    }

    #[test]
    fn pacf_ar2_cuts_off_after_two() {
        let p = pacf(&series(ar(&[0.5, -0.3], 5000, 4)), 10).unwrap();
        assert!(p.coefficients[2].abs() > 0.2);
        assert!(p.coefficients[3..].iter().all(|c| c.abs() < 0.05), "{:?}", p.coefficients);
    }

    /// Last coefficient of an order-k least-squares AR fit on the demeaned series
    /// zero-padded at both ends (the autocorrelation method), solved by plain
    /// elimination on the regression's own normal equations.
    fn ls_pacf(x: &[f64], k: usize) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let at = |t: isize| if t >= 0 && (t as usize) < n { x[t as usize] - mean } else { 0.0 };
        let mut a = vec![vec![0.0; k]; k];
        let mut b = vec![0.0; k];
        for t in 0..(n + k) as isize {
            let lagged: Vec<f64> = (1..=k as isize).map(|j| at(t - j)).collect();
            for i in 0..k {
                b[i] += lagged[i] * at(t);
                for j in 0..k {
                    a[i][j] += lagged[i] * lagged[j];
                }
            }
        }
        for c in 0..k {
            for row in c + 1..k {
                let f = a[row][c] / a[c][c];
                for col in c..k {
                    a[row][col] -= f * a[c][col];
                }
                b[row] -= f * b[c];
            }
        }
        let mut sol = vec![0.0; k];
        for row in (0..k).rev() {
            let s: f64 = (row + 1..k).map(|j| a[row][j] * sol[j]).sum();
            sol[row] = (b[row] - s) / a[row][row];
        }
        sol[k - 1]
    }

    #[test]
    fn pacf_matches_regression_oracle() {
        for seed in 0..5 {
            let x = ar(&[0.4, 0.2], 400, 100 + seed);
            let p = pacf(&series(x.clone()), 5).unwrap();
            for k in 1..=5 {
                assert!((p.coefficients[k] - ls_pacf(&x, k)).abs() < 1e-6);
            }
        }
    }

    fn walk(seed: u64, n: usize) -> Vec<f64> {
        noise(seed, n)
            .into_iter()
            .scan(0.0, |s, e| {
                *s += e;
                Some(*s)
            })
            .collect()
    }

    #[test]
    fn adf_random_walk_is_non_stationary() {
        let r = adf_test(&series(walk(1, 500)), None).unwrap();
        assert!(r.p_value > 0.05, "{r:?}");
        assert_eq!(r.verdict, Verdict::NonStationary);
    }

    #[test]
    fn adf_size_is_near_nominal() {
        // Under the unit-root null the 5% test should reject about 5% of walks.
        let reps = 600;
        let rejected = (0..reps)
            .filter(|s| adf_test(&series(walk(10_000 + s, 500)), None).unwrap().p_value <= 0.05)
            .count();
        let rate = rejected as f64 / reps as f64;
        assert!((0.02..=0.08).contains(&rate), "rejection rate {rate}");
    }

    #[test]
    fn adf_ar1_is_stationary() {
        let r = adf_test(&series(ar(&[0.5], 500, 2)), None).unwrap();
        assert!(r.p_value < 0.05, "{r:?}");
        assert_eq!(r.verdict, Verdict::Stationary);
        assert!(r.critical_values.one_percent < r.critical_values.five_percent);
        assert!(r.critical_values.five_percent < r.critical_values.ten_percent);
    }

    #[test]
    fn adf_affine_invariant() {
        let x = ar(&[0.8], 300, 17);
        let a = adf_test(&series(x.clone()), None).unwrap();
        let b = adf_test(&series(x.iter().map(|v| 3.5 * v + 40.0).collect()), None).unwrap();
        assert_eq!(a.lags_used, b.lags_used);
        assert!((a.statistic - b.statistic).abs() < 1e-6);
    }

    #[test]
    fn adf_needs_twenty_points() {
        assert!(matches!(adf_test(&series(noise(0, 19)), None), Err(Error::TooShort { .. })));
    }

    #[test]
    fn p_value_is_monotone_and_clamped() {
        let mut prev = 0.0;
        for i in 0..200 {
            let stat = -8.0 + i as f64 * 0.05;
            let p = adf_p_value(stat, 300);
            assert!(p >= prev && (0.001..=0.999).contains(&p));
            prev = p;
        }
        let cv = critical_values(300);
        assert!((adf_p_value(cv.five_percent, 300) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn decompose_constant() {
        let d = decompose(&series(vec![50.0; 48]), 12).unwrap();
        assert!(d.trend.iter().flatten().all(|t| (t - 50.0).abs() < 1e-12));
        assert!(d.seasonal.iter().all(|s| s.abs() < 1e-12));
        assert!(d.residual.iter().flatten().all(|r| r.abs() < 1e-12));
        assert_eq!(d.trend.iter().filter(|t| t.is_none()).count(), 12);
    }

    #[test]
    fn decompose_recovers_injected_pattern() {
        let pattern = [3.0, 5.0, 1.0, -2.0, -6.0, -4.0, 0.5, 2.5, 1.5, -1.0, -0.5, 0.0];
        let mean = pattern.iter().sum::<f64>() / 12.0;
        let x: Vec<f64> = (0..96).map(|t| 10.0 + 0.3 * t as f64 + pattern[t % 12]).collect();
        let d = decompose(&series(x), 12).unwrap();
        for t in 0..96 {
            if d.trend[t].is_some() {
                assert!((d.seasonal[t] - (pattern[t % 12] - mean)).abs() < 1e-6);
            }
        }
        let s: f64 = d.seasonal[5..17].iter().sum();
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn decompose_additive_identity_odd_period() {
        let x = noise(8, 70).iter().enumerate().map(|(t, e)| e + (t % 7) as f64).collect();
        let d = decompose(&series(x), 7).unwrap();
        for t in 0..70 {
            if let (Some(tr), Some(r)) = (d.trend[t], d.residual[t]) {
                assert!((d.observed[t] - tr - d.seasonal[t] - r).abs() < 1e-9);
            }
        }
        assert!(decompose(&series(vec![1.0; 13]), 7).is_err());
    }
}
