//! Seasonal ARIMA models with a 24-hour period.
//!
//! The model for the differenced series `w = (1-B)^d (1-B^24)^D y` is the
//! multiplicative form
//!
//! ```text
//! φ(B) Φ(B^24) (w_t - μ) = θ(B) Θ(B^24) e_t
//! φ(B) = 1 - φ1 B - ... - φp B^p          θ(B) = 1 + θ1 B + ... + θq B^q
//! ```
//!
//! with autoregressive terms on observations and moving-average terms on
//! one-step errors. The mean `μ` is estimated only when `d = D = 0`.
//! Coefficients are estimated by conditional sum of squares: pre-sample errors
//! are zero and the first few residuals are excluded from the objective.

mod grid;
pub(crate) mod lm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use grid::{grid_search, GridEntry, GridReport, OrderGrid, RMSE_TIE_TOLERANCE};
pub use lm::LmConfig;

/// Seasonal period, hours.
pub const PERIOD: usize = 24;

/// `(p, d, q)(P, D, Q)` with period 24.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SarimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
}

impl SarimaOrder {
    pub const fn new(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p: sp,
            seasonal_d: sd,
            seasonal_q: sq,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d > 1 || self.seasonal_d > 1 {
            return Err(Error::Config(format!(
                "differencing orders must be 0 or 1, got d={} D={}",
                self.d, self.seasonal_d
            )));
        }
        Ok(())
    }

    /// `p + q + P + Q + 1`, the count conventionally reported for the model.
    pub fn parameter_count(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q + 1
    }

    /// A mean is estimated only for undifferenced models.
    pub fn has_mean(&self) -> bool {
        self.d == 0 && self.seasonal_d == 0
    }

    /// Coefficients actually estimated.
    pub fn free_parameters(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q + usize::from(self.has_mean())
    }

    /// Values consumed by differencing.
    pub fn difference_span(&self) -> usize {
        self.d + PERIOD * self.seasonal_d
    }

    /// Deepest autoregressive lag of the expanded polynomial.
    pub fn ar_depth(&self) -> usize {
        self.p + PERIOD * self.seasonal_p
    }

    /// Index (in the differenced series) of the first residual in the objective.
    pub fn objective_start(&self) -> usize {
        let burn_in = self.p.max(PERIOD * self.seasonal_p) + self.q + PERIOD * self.seasonal_q;
        burn_in.max(self.ar_depth())
    }
}

impl std::fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{}){}",
            self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, PERIOD
        )
    }
}

/// A fitted seasonal ARIMA model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaModel {
    pub order: SarimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sar: Vec<f64>,
    pub sma: Vec<f64>,
    pub intercept: f64,
    /// Root mean square one-step error over the objective window.
    pub training_rmse: f64,
    pub training_mae: f64,
    /// Residuals in the objective window.
    pub training_n: usize,
    /// One-step forecasts on the training data were far worse than the mean.
    pub diverged: bool,
}

impl SarimaModel {
    /// A model with every coefficient zero.
    pub fn zero(order: SarimaOrder) -> Self {
        Self {
            order,
            ar: vec![0.0; order.p],
            ma: vec![0.0; order.q],
            sar: vec![0.0; order.seasonal_p],
            sma: vec![0.0; order.seasonal_q],
            intercept: 0.0,
            training_rmse: f64::NAN,
            training_mae: f64::NAN,
            training_n: 0,
            diverged: false,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.order.parameter_count()
    }

    fn from_params(order: SarimaOrder, params: &[f64]) -> Self {
        let mut it = params.iter().copied();
        let mut take = |n: usize| (&mut it).take(n).collect::<Vec<_>>();
        let ar = take(order.p);
        let ma = take(order.q);
        let sar = take(order.seasonal_p);
        let sma = take(order.seasonal_q);
        let intercept = if order.has_mean() {
            take(1)[0]
        } else {
            0.0
        };
        Self {
            ar,
            ma,
            sar,
            sma,
            intercept,
            ..Self::zero(order)
        }
    }

    fn check_shape(&self) -> Result<()> {
        let o = &self.order;
        if self.ar.len() != o.p
            || self.ma.len() != o.q
            || self.sar.len() != o.seasonal_p
            || self.sma.len() != o.seasonal_q
        {
            return Err(Error::Config(format!(
                "coefficient counts do not match order {o}"
            )));
        }
        Ok(())
    }

    fn filter(&self) -> Filter {
        Filter::new(self)
    }

    /// One-step-ahead prediction of the value following `history`, on the
    /// original scale.
    pub fn forecast_one(&self, history: &[f64]) -> Result<f64> {
        self.check_shape()?;
        let need = self.order.difference_span() + self.order.ar_depth();
        if history.len() < need {
            return Err(Error::UnavailableLag {
                index: history.len(),
                lag: need - history.len(),
            });
        }
        let w = difference(history, &self.order);
        let filter = self.filter();
        let (e, _) = filter.run(&w);
        let w_hat = filter.predict_at(&w, &e, w.len());
        Ok(integrate_next(history, w_hat, &self.order))
    }

    /// One-step forecasts for every index of `values`, each using only the
    /// values before it. `None` where history is too short.
    pub fn one_step_forecasts(&self, values: &[f64]) -> Result<Vec<Option<f64>>> {
        self.check_shape()?;
        let span = self.order.difference_span();
        let filter = self.filter();
        let mut out = vec![None; values.len()];
        if values.len() <= span {
            return Ok(out);
        }
        let w = difference(values, &self.order);
        let (_, preds) = filter.run(&w);
        for (i, p) in preds.into_iter().enumerate() {
            if let Some(w_hat) = p {
                let t = i + span;
                out[t] = Some(integrate_next(&values[..t], w_hat, &self.order));
            }
        }
        Ok(out)
    }

    /// In-sample one-step residuals of the differenced series over the
    /// objective window.
    pub fn training_residuals(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_shape()?;
        let w = difference(values, &self.order);
        let (e, _) = self.filter().run(&w);
        let start = self.order.objective_start().min(e.len());
        Ok(e[start..].to_vec())
    }
}

/// Expanded lag polynomials of a model.
struct Filter {
    mean: f64,
    ar: Vec<(usize, f64)>,
    ma: Vec<(usize, f64)>,
    start: usize,
}

fn expand(short: &[f64], seasonal: &[f64], sign: f64) -> Vec<(usize, f64)> {
    // (1 + sign Σ a_i B^i)(1 + sign Σ A_k B^{24k}) - 1, as a list of (lag, coef)
    // with the result expressed so that x_t = Σ coef · term_{t-lag}.
    let mut poly: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, a) in short.iter().enumerate() {
        *poly.entry(i + 1).or_default() += sign * a;
    }
    for (k, s) in seasonal.iter().enumerate() {
        *poly.entry(PERIOD * (k + 1)).or_default() += sign * s;
        for (i, a) in short.iter().enumerate() {
            *poly.entry(i + 1 + PERIOD * (k + 1)).or_default() += sign * sign * a * s;
        }
    }
    poly.into_iter().map(|(lag, c)| (lag, sign * c)).collect()
}

impl Filter {
    fn new(m: &SarimaModel) -> Self {
        Self {
            mean: m.intercept,
            // φ(B)Φ(B^s) = 1 - Σ c_j B^j  →  x_t = Σ c_j x_{t-j} + ...
            ar: expand(&m.ar, &m.sar, -1.0),
            // θ(B)Θ(B^s) = 1 + Σ b_j B^j  →  ... + Σ b_j e_{t-j}
            ma: expand(&m.ma, &m.sma, 1.0),
            start: m.order.ar_depth(),
        }
    }

    /// Conditional mean of `w[t]` given `w[..t]` and errors `e[..t]`.
    fn predict_at(&self, w: &[f64], e: &[f64], t: usize) -> f64 {
        let mut x_hat = 0.0;
        for &(lag, c) in &self.ar {
            x_hat += c * (w[t - lag] - self.mean);
        }
        for &(lag, b) in &self.ma {
            if t >= lag + self.start {
                x_hat += b * e[t - lag];
            }
        }
        self.mean + x_hat
    }

    /// Residuals (zero before the first computable index) and one-step predictions.
    fn run(&self, w: &[f64]) -> (Vec<f64>, Vec<Option<f64>>) {
        let n = w.len();
        let mut e = vec![0.0; n];
        let mut preds = vec![None; n];
        for t in self.start..n {
            let p = self.predict_at(w, &e, t);
            e[t] = w[t] - p;
            preds[t] = Some(p);
        }
        (e, preds)
    }
}

/// Coefficients `δ_j` of `(1-B)^d (1-B^24)^D = Σ δ_j B^j`.
fn difference_polynomial(order: &SarimaOrder) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut mul = |lag: usize| {
        let mut next = vec![0.0; poly.len() + lag];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + lag] -= c;
        }
        poly = next;
    };
    for _ in 0..order.seasonal_d {
        mul(PERIOD);
    }
    for _ in 0..order.d {
        mul(1);
    }
    poly
}

fn difference(values: &[f64], order: &SarimaOrder) -> Vec<f64> {
    let mut out = values.to_vec();
    for _ in 0..order.seasonal_d {
        out = out.windows(PERIOD + 1).map(|w| w[PERIOD] - w[0]).collect();
    }
    for _ in 0..order.d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

/// Undoes differencing for the value right after `history`, given the
/// differenced-scale prediction.
fn integrate_next(history: &[f64], w_hat: f64, order: &SarimaOrder) -> f64 {
    let delta = difference_polynomial(order);
    let t = history.len();
    let mut y = w_hat;
    for (j, dj) in delta.iter().enumerate().skip(1) {
        if *dj != 0.0 {
            y -= dj * history[t - j];
        }
    }
    y
}

/// Applies `(1-B)^d (1-B^period)^D`. The output is `d + period·D` values shorter.
pub fn seasonal_difference(values: &[f64], d: usize, seasonal_d: usize, period: usize) -> Result<Vec<f64>> {
    if period != PERIOD {
        return Err(Error::Config(format!("seasonal period must be {PERIOD}")));
    }
    let order = SarimaOrder::new(0, d, 0, 0, seasonal_d, 0);
    order.validate()?;
    let span = order.difference_span();
    if values.len() <= span {
        return Err(Error::SeriesTooShort {
            needed: span + 1,
            actual: values.len(),
        });
    }
    Ok(difference(values, &order))
}

/// Inverse of [`seasonal_difference`]: rebuilds the original series from the
/// differenced values and the first `d + 24·D` original values.
pub fn integrate(diffed: &[f64], initial: &[f64], d: usize, seasonal_d: usize) -> Result<Vec<f64>> {
    let order = SarimaOrder::new(0, d, 0, 0, seasonal_d, 0);
    order.validate()?;
    let span = order.difference_span();
    if initial.len() != span {
        return Err(Error::Config(format!(
            "need {span} initial values, got {}",
            initial.len()
        )));
    }
    let mut y = initial.to_vec();
    for &w in diffed {
        let next = integrate_next(&y, w, &order);
        y.push(next);
    }
    Ok(y)
}

/// Estimation settings.
#[derive(Debug, Clone, Default)]
pub struct FitConfig {
    pub lm: LmConfig,
}

/// A fit together with optimizer diagnostics.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: SarimaModel,
    /// Conditional sum of squares after every accepted optimizer step.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

fn parameter_names(order: &SarimaOrder) -> Vec<String> {
    let mut names = Vec::new();
    names.extend((1..=order.p).map(|i| format!("ar{i}")));
    names.extend((1..=order.q).map(|i| format!("ma{i}")));
    names.extend((1..=order.seasonal_p).map(|i| format!("sar{i}")));
    names.extend((1..=order.seasonal_q).map(|i| format!("sma{i}")));
    if order.has_mean() {
        names.push("intercept".into());
    }
    names
}

/// Fits by conditional sum of squares with default settings.
pub fn fit_css(values: &[f64], order: SarimaOrder) -> Result<SarimaModel> {
    fit_css_with(values, order, &FitConfig::default()).map(|o| o.model)
}

/// Fits by conditional sum of squares, minimized with Levenberg-Marquardt
/// from all-zero coefficients and the sample mean.
pub fn fit_css_with(values: &[f64], order: SarimaOrder, config: &FitConfig) -> Result<FitOutcome> {
    order.validate()?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::MissingValue(i));
    }
    let span = order.difference_span();
    let effective = values.len().saturating_sub(span);
    let needed = 10 * order.parameter_count();
    let start = order.objective_start();
    if effective < needed || effective <= start {
        return Err(Error::SeriesTooShort {
            needed: span + needed.max(start + 1),
            actual: values.len(),
        });
    }
    let w = difference(values, &order);
    let n_obj = w.len() - start;

    let mut x0 = vec![0.0; order.free_parameters()];
    if order.has_mean() {
        *x0.last_mut().expect("mean parameter") = w.iter().sum::<f64>() / w.len() as f64;
    }

    let residuals = |params: &[f64], out: &mut Vec<f64>| {
        let model = SarimaModel::from_params(order, params);
        let (e, _) = model.filter().run(&w);
        out.clear();
        out.extend_from_slice(&e[start..]);
    };
    let outcome = lm::minimize(residuals, &x0, &config.lm).map_err(|e| match e {
        lm::LmError::BadStart => Error::Config("non-finite objective at start".into()),
        lm::LmError::Singular(idx) => {
            let names = parameter_names(&order);
            Error::IllConditioned {
                columns: idx.into_iter().map(|i| names[i].clone()).collect(),
            }
        }
    })?;

    let mut model = SarimaModel::from_params(order, &outcome.params);
    let (e, _) = model.filter().run(&w);
    let window = &e[start..];
    model.training_rmse = (outcome.cost / n_obj as f64).sqrt();
    model.training_mae = window.iter().map(|v| v.abs()).sum::<f64>() / n_obj as f64;
    model.training_n = n_obj;
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
    model.diverged = !model.training_rmse.is_finite() || model.training_rmse > 10.0 * sd.max(1e-12);

    if !outcome.converged {
        return Err(Error::NotConverged {
            iterations: outcome.iterations,
            best: Box::new(model),
        });
    }
    Ok(FitOutcome {
        model,
        objective_history: outcome.history,
        iterations: outcome.iterations,
    })
}
