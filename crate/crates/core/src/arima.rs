//! ARIMA(p,d,q) and multiplicative SARIMA(p,d,q)(P,D,Q)s models estimated by
//! conditional sum of squares.
//!
//! With `z` the differenced series and `z̃ = z − μ`, the model is
//!
//! ```text
//! φ(B) Φ(Bˢ) z̃_t = θ(B) Θ(Bˢ) e_t
//! φ(B) = 1 − Σ φ_i Bⁱ     θ(B) = 1 + Σ θ_i Bⁱ
//! Φ(B) = 1 − Σ Φ_j Bʲ     Θ(B) = 1 + Σ Θ_j Bʲ
//! ```
//!
//! Residuals are computed recursively with pre-sample `z̃` and `e` set to zero,
//! and the loss sums `e_t²` from `t = max(p, q, sP, sQ)`.

use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::nelder_mead;
use crate::series::{difference, undifference, DifferenceLedger, TimeSeries};

/// Objective value returned for non-stationary or non-invertible parameters.
pub const INFEASIBLE_PENALTY: f64 = 1e10;
/// Required distance of polynomial roots from the unit circle.
pub const ROOT_MARGIN: f64 = 1e-6;
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeasonalOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub period: usize,
}

impl SeasonalOrder {
    pub fn new(p: usize, d: usize, q: usize, period: usize) -> Self {
        SeasonalOrder { p, d, q, period }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    /// Seasonal period; 0 for a non-seasonal model.
    pub period: usize,
    pub include_intercept: bool,
}

impl ArimaSpec {
    /// Non-seasonal spec. The intercept is included only when `d == 0`.
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self> {
        ArimaSpec {
            p,
            d,
            q,
            seasonal_p: 0,
            seasonal_d: 0,
            seasonal_q: 0,
            period: 0,
            include_intercept: d == 0,
        }
        .validated()
    }

    /// Seasonal spec. The intercept is included only when `d + D == 0`.
    pub fn seasonal(p: usize, d: usize, q: usize, seasonal: SeasonalOrder) -> Result<Self> {
        let s = seasonal;
        ArimaSpec {
            p,
            d,
            q,
            seasonal_p: s.p,
            seasonal_d: s.d,
            seasonal_q: s.q,
            period: s.period,
            include_intercept: d + s.d == 0,
        }
        .validated()
    }

    pub fn with_intercept(mut self, include: bool) -> Self {
        self.include_intercept = include;
        self
    }

    /// Checks the order limits and normalizes an all-zero seasonal part to `s = 0`.
    pub fn validated(mut self) -> Result<Self> {
        let orders = [self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q];
        if orders.iter().any(|o| *o > MAX_ORDER) {
            return Err(Error::InvalidArgument(format!("orders must not exceed {MAX_ORDER}: {self}")));
        }
        let seasonal_terms = self.seasonal_p + self.seasonal_d + self.seasonal_q;
        if self.period == 0 && seasonal_terms > 0 {
            return Err(Error::InvalidArgument(format!("seasonal orders need a period: {self}")));
        }
        if self.period == 1 {
            return Err(Error::InvalidArgument("seasonal period must be at least 2".into()));
        }
        if seasonal_terms == 0 {
            self.period = 0;
        }
        Ok(self)
    }

    pub fn is_seasonal(&self) -> bool {
        self.period > 0
    }

    /// Number of estimated coefficients, excluding the innovation variance.
    pub fn n_coefficients(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q + usize::from(self.include_intercept)
    }

    /// First index included in the CSS loss.
    pub fn conditioning(&self) -> usize {
        self.p
            .max(self.q)
            .max(self.period * self.seasonal_p)
            .max(self.period * self.seasonal_q)
    }

    /// Smallest training length accepted by [`fit`].
    pub fn min_train_len(&self) -> usize {
        self.d + self.seasonal_d * self.period + self.conditioning() + 11
    }
}

impl std::fmt::Display for ArimaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)?;
        if self.is_seasonal() {
            write!(
                f,
                "({},{},{},{})",
                self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period
            )?;
        }
        Ok(())
    }
}

impl FromStr for ArimaSpec {
    type Err = Error;

    /// Parses `p,d,q` or `p,d,q,P,D,Q,s`.
    fn from_str(s: &str) -> Result<Self> {
        let nums: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("cannot parse model orders {s:?}")))?;
        match nums.as_slice() {
            [p, d, q] => ArimaSpec::new(*p, *d, *q),
            [p, d, q, sp, sd, sq, period] => {
                ArimaSpec::seasonal(*p, *d, *q, SeasonalOrder::new(*sp, *sd, *sq, *period))
            }
            _ => Err(Error::InvalidArgument(format!(
                "expected p,d,q or p,d,q,P,D,Q,s, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaParams {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    pub intercept: f64,
    pub sigma2: f64,
}

impl ArimaParams {
    pub fn zeros(spec: &ArimaSpec) -> Self {
        ArimaParams {
            ar: vec![0.0; spec.p],
            ma: vec![0.0; spec.q],
            seasonal_ar: vec![0.0; spec.seasonal_p],
            seasonal_ma: vec![0.0; spec.seasonal_q],
            intercept: 0.0,
            sigma2: 1.0,
        }
    }

    fn check_shape(&self, spec: &ArimaSpec) -> Result<()> {
        if self.ar.len() != spec.p
            || self.ma.len() != spec.q
            || self.seasonal_ar.len() != spec.seasonal_p
            || self.seasonal_ma.len() != spec.seasonal_q
        {
            return Err(Error::Shape(format!("parameters do not match spec {spec}")));
        }
        Ok(())
    }

    fn to_vector(&self, spec: &ArimaSpec) -> Vec<f64> {
        let mut v = Vec::with_capacity(spec.n_coefficients());
        if spec.include_intercept {
            v.push(self.intercept);
        }
        v.extend(&self.ar);
        v.extend(&self.ma);
        v.extend(&self.seasonal_ar);
        v.extend(&self.seasonal_ma);
        v
    }

    fn from_vector(spec: &ArimaSpec, v: &[f64]) -> Self {
        let mut it = v.iter().copied();
        let intercept = if spec.include_intercept { it.next().unwrap_or(0.0) } else { 0.0 };
        let mut take = |n: usize| (&mut it).take(n).collect::<Vec<_>>();
        let ar = take(spec.p);
        let ma = take(spec.q);
        let seasonal_ar = take(spec.seasonal_p);
        let seasonal_ma = take(spec.seasonal_q);
        ArimaParams {
            ar,
            ma,
            seasonal_ar,
            seasonal_ma,
            intercept,
            sigma2: 1.0,
        }
    }
}

/// Which stationarity or invertibility condition a parameter set breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    NonStationaryAr,
    NonStationarySeasonalAr,
    NonInvertibleMa,
    NonInvertibleSeasonalMa,
}

/// Polynomial product; `a[k]` is the coefficient of Bᵏ.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `1 + sign·Σ c_i B^{i·stride}` as a full coefficient vector.
fn lag_poly(coefs: &[f64], sign: f64, stride: usize) -> Vec<f64> {
    let mut p = vec![0.0; coefs.len() * stride + 1];
    p[0] = 1.0;
    for (i, c) in coefs.iter().enumerate() {
        p[(i + 1) * stride] = sign * c;
    }
    p
}

/// Complex roots by Durand–Kerner iteration. `coeffs[k]` multiplies xᵏ.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().is_some_and(|v| v.abs() < 1e-14) {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let eval = |z: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a);
    let bound = 1.0 + monic[..deg].iter().map(|v| v.abs()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32) * bound).collect();
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..deg {
            let zi = roots[i];
            let denom = roots
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, (_, zj)| acc * (zi - zj));
            if denom.norm() == 0.0 {
                continue;
            }
            let step = eval(zi) / denom;
            roots[i] = zi - step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 {
            break;
        }
    }
    roots
}

/// True when every root of `1 + sign·Σ c_i xⁱ` lies outside the unit circle by the margin.
fn roots_outside(coefs: &[f64], sign: f64) -> bool {
    if coefs.iter().all(|c| *c == 0.0) {
        return true;
    }
    let poly = lag_poly(coefs, sign, 1);
    poly_roots(&poly).iter().all(|r| r.norm() > 1.0 + ROOT_MARGIN)
}

/// Minimum modulus over all roots of the AR and MA polynomials (∞ when there are none).
pub fn min_root_modulus(params: &ArimaParams) -> f64 {
    [
        lag_poly(&params.ar, -1.0, 1),
        lag_poly(&params.seasonal_ar, -1.0, 1),
        lag_poly(&params.ma, 1.0, 1),
        lag_poly(&params.seasonal_ma, 1.0, 1),
    ]
    .iter()
    .flat_map(|p| poly_roots(p))
    .map(|r| r.norm())
    .fold(f64::INFINITY, f64::min)
}

pub fn check_params(params: &ArimaParams) -> Vec<Violation> {
    let mut v = Vec::new();
    if !roots_outside(&params.ar, -1.0) {
        v.push(Violation::NonStationaryAr);
    }
    if !roots_outside(&params.seasonal_ar, -1.0) {
        v.push(Violation::NonStationarySeasonalAr);
    }
    if !roots_outside(&params.ma, 1.0) {
        v.push(Violation::NonInvertibleMa);
    }
    if !roots_outside(&params.seasonal_ma, 1.0) {
        v.push(Violation::NonInvertibleSeasonalMa);
    }
    v
}

/// Lag coefficients of the expanded ARMA recursion: `z̃_t = Σ a_k z̃_{t−k} + e_t + Σ b_k e_{t−k}`.
struct Expanded {
    ar: Vec<f64>,
    ma: Vec<f64>,
}

fn expand(spec: &ArimaSpec, params: &ArimaParams) -> Expanded {
    let s = spec.period.max(1);
    let ar_poly = poly_mul(&lag_poly(&params.ar, -1.0, 1), &lag_poly(&params.seasonal_ar, -1.0, s));
    let ma_poly = poly_mul(&lag_poly(&params.ma, 1.0, 1), &lag_poly(&params.seasonal_ma, 1.0, s));
    Expanded {
        ar: ar_poly[1..].iter().map(|c| -c).collect(),
        ma: ma_poly[1..].to_vec(),
    }
}

/// One-step residuals over the whole differenced series, pre-sample values zero.
pub fn css_residuals(spec: &ArimaSpec, params: &ArimaParams, z: &[f64]) -> Vec<f64> {
    let ex = expand(spec, params);
    let mu = if spec.include_intercept { params.intercept } else { 0.0 };
    let zt: Vec<f64> = z.iter().map(|v| v - mu).collect();
    let mut e = vec![0.0; z.len()];
    for t in 0..z.len() {
        let mut pred = 0.0;
        for (k, a) in ex.ar.iter().enumerate() {
            if *a != 0.0 && t > k {
                pred += a * zt[t - k - 1];
            }
        }
        for (k, b) in ex.ma.iter().enumerate() {
            if *b != 0.0 && t > k {
                pred += b * e[t - k - 1];
            }
        }
        e[t] = zt[t] - pred;
    }
    e
}

/// Conditional sum of squares. Infeasible parameters score [`INFEASIBLE_PENALTY`].
pub fn css_loss(spec: &ArimaSpec, params: &ArimaParams, z: &[f64]) -> f64 {
    if !check_params(params).is_empty() {
        return INFEASIBLE_PENALTY;
    }
    let e = css_residuals(spec, params, z);
    let loss: f64 = e.iter().skip(spec.conditioning()).map(|v| v * v).sum();
    if loss.is_finite() {
        loss
    } else {
        INFEASIBLE_PENALTY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedArima {
    pub spec: ArimaSpec,
    pub params: ArimaParams,
    pub ledger: DifferenceLedger,
    /// The differenced training series the model was estimated on.
    pub differenced: TimeSeries,
    /// Residuals for every differenced observation; the first
    /// `spec.conditioning()` are burn-in and excluded from the loss.
    pub residuals: Vec<f64>,
    pub n_eff: usize,
    pub training_rmse: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub violations: Vec<Violation>,
}

impl FittedArima {
    /// Residuals that enter the loss.
    pub fn effective_residuals(&self) -> &[f64] {
        &self.residuals[self.spec.conditioning()..]
    }

    /// One-step in-sample predictions of the differenced series.
    pub fn fitted_differenced(&self) -> Vec<f64> {
        self.differenced
            .values()
            .iter()
            .zip(&self.residuals)
            .map(|(z, e)| z - e)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument {
            kind: "arima".into(),
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.kind != "arima" {
            return Err(Error::InvalidArgument(format!("expected an arima model, found {:?}", doc.kind)));
        }
        Ok(doc.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    kind: String,
    model: FittedArima,
}

/// Estimates the model by minimizing [`css_loss`] with Nelder–Mead from a zero
/// start (intercept at the sample mean of the differenced series).
pub fn fit(spec: &ArimaSpec, train: &TimeSeries) -> Result<FittedArima> {
    let spec = spec.validated()?;
    if train.len() < spec.min_train_len() {
        return Err(Error::TooShort {
            required: spec.min_train_len() - 1,
            actual: train.len(),
        });
    }
    let (differenced, ledger) = difference(train, spec.d, spec.seasonal_d, spec.period)?;
    let z = differenced.values();
    let mut start = ArimaParams::zeros(&spec);
    start.intercept = if spec.include_intercept { differenced.mean() } else { 0.0 };

    let objective = |v: &[f64]| css_loss(&spec, &ArimaParams::from_vector(&spec, v), z);
    let mut x = start.to_vector(&spec);
    let mut converged = true;
    let mut iterations = 0;
    if !x.is_empty() {
        let start_loss = objective(&x);
        let tol = 1e-10 * start_loss.max(1.0);
        let max_iter = 2000 + 1000 * x.len();
        let mut best = start_loss;
        // Restart from the optimum until a restart no longer improves it.
        for _ in 0..4 {
            let r = nelder_mead(objective, &x, tol, max_iter)?;
            iterations += r.iterations;
            converged = r.converged;
            let improved = best - r.best_loss;
            if r.best_loss <= best {
                x = r.best;
                best = r.best_loss;
            }
            if improved <= tol * 10.0 {
                break;
            }
        }
    }
    let mut params = ArimaParams::from_vector(&spec, &x);
    let residuals = css_residuals(&spec, &params, z);
    let cond = spec.conditioning();
    let n_eff = z.len() - cond;
    let loss: f64 = residuals[cond..].iter().map(|e| e * e).sum();
    params.sigma2 = loss / n_eff as f64;
    if !(params.sigma2 > 0.0) {
        params.sigma2 = f64::MIN_POSITIVE;
    }
    let aic = n_eff as f64 * params.sigma2.ln() + 2.0 * (spec.n_coefficients() + 1) as f64;
    let violations = check_params(&params);
    Ok(FittedArima {
        spec,
        training_rmse: params.sigma2.sqrt(),
        params,
        ledger,
        differenced,
        residuals,
        n_eff,
        aic,
        converged,
        iterations,
        violations,
    })
}

pub fn fit_sarima(train: &TimeSeries, p: usize, d: usize, q: usize, seasonal: SeasonalOrder) -> Result<FittedArima> {
    fit(&ArimaSpec::seasonal(p, d, q, seasonal)?, train)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub series: TimeSeries,
    pub std_errors: Vec<f64>,
}

impl Forecast {
    /// Point ± z·se.
    pub fn interval(&self, z: f64) -> (Vec<f64>, Vec<f64>) {
        let v = self.series.values();
        (
            v.iter().zip(&self.std_errors).map(|(p, s)| p - z * s).collect(),
            v.iter().zip(&self.std_errors).map(|(p, s)| p + z * s).collect(),
        )
    }
}

/// ψ-weights of the full model, differencing included.
pub fn psi_weights(model: &FittedArima, count: usize) -> Vec<f64> {
    let spec = &model.spec;
    let s = spec.period.max(1);
    let mut ar = poly_mul(&lag_poly(&model.params.ar, -1.0, 1), &lag_poly(&model.params.seasonal_ar, -1.0, s));
    for _ in 0..spec.d {
        ar = poly_mul(&ar, &[1.0, -1.0]);
    }
    for _ in 0..spec.seasonal_d {
        let mut seasonal = vec![0.0; s + 1];
        seasonal[0] = 1.0;
        seasonal[s] = -1.0;
        ar = poly_mul(&ar, &seasonal);
    }
    let ma = poly_mul(&lag_poly(&model.params.ma, 1.0, 1), &lag_poly(&model.params.seasonal_ma, 1.0, s));
    let mut psi = Vec::with_capacity(count);
    for j in 0..count {
        if j == 0 {
            psi.push(1.0);
            continue;
        }
        let mut v = ma.get(j).copied().unwrap_or(0.0);
        for k in 1..=j.min(ar.len() - 1) {
            v -= ar[k] * psi[j - k];
        }
        psi.push(v);
    }
    psi
}

/// Multi-step forecast: future innovations set to zero, then undifferenced.
pub fn forecast(model: &FittedArima, horizon: usize) -> Result<Forecast> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let spec = &model.spec;
    let ex = expand(spec, &model.params);
    let mu = if spec.include_intercept { model.params.intercept } else { 0.0 };
    let z = model.differenced.values();
    let n = z.len();
    let mut zt: Vec<f64> = z.iter().map(|v| v - mu).collect();
    let mut e = model.residuals.clone();
    zt.reserve(horizon);
    e.resize(n + horizon, 0.0);
    for t in n..n + horizon {
        let mut pred = 0.0;
        for (k, a) in ex.ar.iter().enumerate() {
            if t > k {
                pred += a * zt[t - k - 1];
            }
        }
        for (k, b) in ex.ma.iter().enumerate() {
            if t > k {
                pred += b * e[t - k - 1];
            }
        }
        zt.push(pred);
    }
    let freq = model.differenced.frequency();
    let future_dates = freq.following(model.differenced.last_date(), horizon);
    let future_z: Vec<f64> = zt[n..].iter().map(|v| v + mu).collect();
    let future = TimeSeries::new(future_dates, future_z, freq)?;
    let full = undifference(&model.differenced.concat(&future)?, &model.ledger)?;
    let series = full.slice(full.len() - horizon, full.len())?;

    let psi = psi_weights(model, horizon);
    let mut acc = 0.0;
    let std_errors = psi
        .iter()
        .map(|w| {
            acc += w * w;
            (model.params.sigma2 * acc).sqrt()
        })
        .collect();
    Ok(Forecast { series, std_errors })
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> f64 {
    let n = actual.len().min(predicted.len());
    (actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum::<f64>() / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub spec: ArimaSpec,
    /// Test RMSE; infinite when the fit or forecast failed.
    pub rmse: f64,
    pub aic: Option<f64>,
    pub error: Option<String>,
}

/// Fits every (p, d, q) combination (optionally with a fixed seasonal part) on
/// `train`, forecasts `test.len()` steps and ranks by test RMSE. Ties keep
/// lexicographic (p, d, q) order. Fits run on the current rayon pool.
pub fn grid_search(
    train: &TimeSeries,
    test: &TimeSeries,
    p_range: &[usize],
    d_range: &[usize],
    q_range: &[usize],
    seasonal: Option<SeasonalOrder>,
) -> Result<Vec<GridEntry>> {
    if p_range.is_empty() || d_range.is_empty() || q_range.is_empty() {
        return Err(Error::InvalidArgument("grid ranges must be non-empty".into()));
    }
    let mut combos = Vec::new();
    for &p in p_range {
        for &d in d_range {
            for &q in q_range {
                combos.push((p, d, q));
            }
        }
    }
    combos.sort_unstable();
    combos.dedup();
    let mut entries: Vec<GridEntry> = combos
        .par_iter()
        .map(|&(p, d, q)| {
            let spec = match seasonal {
                Some(s) => ArimaSpec::seasonal(p, d, q, s),
                None => ArimaSpec::new(p, d, q),
            };
            let outcome = spec.and_then(|spec| {
                let model = fit(&spec, train)?;
                let fc = forecast(&model, test.len())?;
                Ok((spec, rmse(test.values(), fc.series.values()), model.aic))
            });
            match outcome {
                Ok((spec, score, aic)) if score.is_finite() => GridEntry {
                    spec,
                    rmse: score,
                    aic: Some(aic),
                    error: None,
                },
                Ok((spec, _, _)) => GridEntry {
                    spec,
                    rmse: f64::INFINITY,
                    aic: None,
                    error: Some("non-finite forecast".into()),
                },
                Err(e) => GridEntry {
                    spec: placeholder_spec(p, d, q, seasonal),
                    rmse: f64::INFINITY,
                    aic: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    if entries.iter().all(|e| e.rmse.is_infinite()) {
        return Err(Error::AllFitsFailed);
    }
    entries.sort_by(|a, b| a.rmse.total_cmp(&b.rmse));
    Ok(entries)
}

fn placeholder_spec(p: usize, d: usize, q: usize, seasonal: Option<SeasonalOrder>) -> ArimaSpec {
    let s = seasonal.unwrap_or(SeasonalOrder::new(0, 0, 0, 0));
    ArimaSpec {
        p,
        d,
        q,
        seasonal_p: s.p,
        seasonal_d: s.d,
        seasonal_q: s.q,
        period: s.period,
        include_intercept: d + s.d == 0,
    }
}

/// Draws `n` observations from the model (with its differencing integrated back
/// from zero), discarding `burn_in` leading ARMA draws.
pub fn simulate<R: Rng + ?Sized>(
    spec: &ArimaSpec,
    params: &ArimaParams,
    n: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.check_shape(spec)?;
    let noise = Normal::new(0.0, params.sigma2.sqrt())
        .map_err(|e| Error::InvalidArgument(format!("innovation variance: {e}")))?;
    let ex = expand(spec, params);
    let mu = if spec.include_intercept { params.intercept } else { 0.0 };
    let total = n + burn_in;
    let mut zt = vec![0.0; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        e[t] = noise.sample(rng);
        let mut v = e[t];
        for (k, a) in ex.ar.iter().enumerate() {
            if t > k {
                v += a * zt[t - k - 1];
            }
        }
        for (k, b) in ex.ma.iter().enumerate() {
            if t > k {
                v += b * e[t - k - 1];
            }
        }
        zt[t] = v;
    }
    let mut x: Vec<f64> = zt[burn_in..].iter().map(|v| v + mu).collect();
    for _ in 0..spec.d {
        let mut acc = 0.0;
        for v in x.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    for _ in 0..spec.seasonal_d {
        for t in spec.period..x.len() {
            x[t] += x[t - spec.period];
        }
    }
    Ok(x)
}
