//! One-hidden-layer perceptron: sigmoid hidden units, linear output, trained
//! by per-row backpropagation with momentum and validation early stopping.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, MAX_IRRADIANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Share of rows held out for early stopping; 0 trains on everything.
    pub validation_fraction: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_units: 11,
            learning_rate: 0.2,
            momentum: 0.3,
            validation_fraction: 0.1,
            max_epochs: 500,
            patience: 20,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::Config("hidden_units must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }

    /// Weights and biases of a network with `inputs` input features.
    pub fn parameter_count(&self, inputs: usize) -> usize {
        self.hidden_units * (inputs + 2) + 1
    }
}

/// Logistic function, evaluated without overflow for large |t|.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Per-feature min-max scaling to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaling {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, width: usize) -> Self {
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for row in rows {
            for (j, v) in row.iter().enumerate() {
                min[j] = min[j].min(*v);
                max[j] = max[j].max(*v);
            }
        }
        for j in 0..width {
            if !min[j].is_finite() {
                min[j] = 0.0;
                max[j] = 0.0;
            }
        }
        Self { min, max }
    }

    /// Identity scaling for inputs already in [0, 1].
    pub fn identity(width: usize) -> Self {
        Self {
            min: vec![0.0; width],
            max: vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// Scales a row, clamping out-of-range values into [0, 1]. Constant
    /// training features map to 0.
    pub fn apply(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(row.iter().enumerate().map(|(j, v)| {
            let span = self.max[j] - self.min[j];
            if span > 0.0 {
                ((v - self.min[j]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            }
        }));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean squared error on the scaled target over the training rows.
    pub train_mse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub scaling: FeatureScaling,
    pub target_scale: f64,
    /// Hidden weights, `hidden_units` rows of input width.
    pub hidden_weights: Vec<Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub history: Vec<EpochLoss>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
}

/// Gradient of the half squared error, in parameter order.
#[derive(Debug, Clone, PartialEq)]
struct Gradient {
    hidden_weights: Vec<Vec<f64>>,
    hidden_bias: Vec<f64>,
    output_weights: Vec<f64>,
    output_bias: f64,
}

impl Gradient {
    fn zeros(hidden: usize, inputs: usize) -> Self {
        Self {
            hidden_weights: vec![vec![0.0; inputs]; hidden],
            hidden_bias: vec![0.0; hidden],
            output_weights: vec![0.0; hidden],
            output_bias: 0.0,
        }
    }
}

impl MlpModel {
    /// Network with weights drawn uniformly from [-0.5, 0.5].
    pub fn random(config: &MlpConfig, scaling: FeatureScaling, rng: &mut impl Rng) -> Self {
        let h = config.hidden_units;
        let w = scaling.width();
        let mut draw = || rng.random_range(-0.5..=0.5);
        let hidden_weights = (0..h).map(|_| (0..w).map(|_| draw()).collect()).collect();
        let hidden_bias = (0..h).map(|_| draw()).collect();
        let output_weights = (0..h).map(|_| draw()).collect();
        let output_bias = draw();
        Self {
            config: config.clone(),
            scaling,
            target_scale: MAX_IRRADIANCE,
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias,
            history: Vec::new(),
            best_epoch: 0,
        }
    }

    pub fn input_width(&self) -> usize {
        self.scaling.width()
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_bias.len()
    }

    /// Flattened parameters: hidden weights row by row, hidden biases,
    /// output weights, output bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.hidden_weights.iter().flatten().copied().collect();
        p.extend(&self.hidden_bias);
        p.extend(&self.output_weights);
        p.push(self.output_bias);
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        let w = self.input_width();
        let h = self.hidden_units();
        let expected = h * (w + 2) + 1;
        if p.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: p.len(),
            });
        }
        let mut it = p.iter().copied();
        for row in &mut self.hidden_weights {
            for v in row.iter_mut() {
                *v = it.next().unwrap_or_default();
            }
        }
        for v in self.hidden_bias.iter_mut().chain(&mut self.output_weights) {
            *v = it.next().unwrap_or_default();
        }
        self.output_bias = it.next().unwrap_or_default();
        Ok(())
    }

    fn hidden_into(&self, x: &[f64], hidden: &mut Vec<f64>) {
        hidden.clear();
        hidden.extend(
            self.hidden_weights
                .iter()
                .zip(&self.hidden_bias)
                .map(|(w, b)| sigmoid(w.iter().zip(x).fold(*b, |acc, (w, x)| acc + w * x))),
        );
    }

    fn output(&self, hidden: &[f64]) -> f64 {
        self.output_weights
            .iter()
            .zip(hidden)
            .fold(self.output_bias, |acc, (w, h)| acc + w * h)
    }

    /// Raw network output for an already-scaled input row.
    pub fn forward_scaled(&self, x: &[f64]) -> f64 {
        let mut hidden = Vec::with_capacity(self.hidden_units());
        self.hidden_into(x, &mut hidden);
        self.output(&hidden)
    }

    /// Prediction in W/m² for an unscaled feature row, clamped to [0, 1050].
    pub fn forward(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.input_width() {
            return Err(Error::Shape {
                expected: self.input_width(),
                actual: row.len(),
            });
        }
        let mut x = Vec::with_capacity(row.len());
        self.scaling.apply(row, &mut x);
        Ok((self.forward_scaled(&x) * self.target_scale).clamp(0.0, MAX_IRRADIANCE))
    }

    /// Half squared error on scaled input `x` and scaled target `y`, and its
    /// gradient written into `grad`.
    fn backprop(&self, x: &[f64], y: f64, hidden: &mut Vec<f64>, grad: &mut Gradient) -> f64 {
        self.hidden_into(x, hidden);
        let out = self.output(hidden);
        let delta = out - y;
        grad.output_bias = delta;
        for (j, &h) in hidden.iter().enumerate() {
            grad.output_weights[j] = delta * h;
            let dh = delta * self.output_weights[j] * h * (1.0 - h);
            grad.hidden_bias[j] = dh;
            for (g, xi) in grad.hidden_weights[j].iter_mut().zip(x) {
                *g = dh * xi;
            }
        }
        0.5 * delta * delta
    }

    /// Analytic gradient of the half squared error for one scaled row, in
    /// [`parameters`](Self::parameters) order.
    pub fn gradient(&self, x: &[f64], y: f64) -> Vec<f64> {
        let mut grad = Gradient::zeros(self.hidden_units(), self.input_width());
        self.backprop(x, y, &mut Vec::new(), &mut grad);
        let mut g: Vec<f64> = grad.hidden_weights.into_iter().flatten().collect();
        g.extend(grad.hidden_bias);
        g.extend(grad.output_weights);
        g.push(grad.output_bias);
        g
    }

    fn mse(&self, rows: &[Vec<f64>], targets: &[f64], idx: &[usize]) -> f64 {
        let mut hidden = Vec::with_capacity(self.hidden_units());
        let sum: f64 = idx
            .iter()
            .map(|&i| {
                self.hidden_into(&rows[i], &mut hidden);
                (self.output(&hidden) - targets[i]).powi(2)
            })
            .sum();
        sum / idx.len() as f64
    }
}

/// Largest relative gap between the analytic gradient and central finite
/// differences (step 1e-5) over every parameter, for one scaled row.
///
/// Components are compared as `|a - n| / max(|a|, |n|, 1e-6)` so that
/// gradients vanishing at a perfect fit do not divide by zero.
pub fn gradient_check(model: &MlpModel, x: &[f64], y: f64) -> f64 {
    gradient_check_with(model, x, y, MlpModel::gradient)
}

/// As [`gradient_check`] with a caller-supplied analytic gradient.
pub fn gradient_check_with(
    model: &MlpModel,
    x: &[f64],
    y: f64,
    analytic: impl Fn(&MlpModel, &[f64], f64) -> Vec<f64>,
) -> f64 {
    const H: f64 = 1e-5;
    let grad = analytic(model, x, y);
    let base = model.parameters();
    let mut probe = model.clone();
    let loss = |m: &MlpModel| 0.5 * (m.forward_scaled(x) - y).powi(2);
    let mut worst = 0.0f64;
    for (k, g) in grad.iter().enumerate() {
        let mut p = base.clone();
        p[k] = base[k] + H;
        probe.set_parameters(&p).expect("same shape");
        let up = loss(&probe);
        p[k] = base[k] - H;
        probe.set_parameters(&p).expect("same shape");
        let down = loss(&probe);
        let numeric = (up - down) / (2.0 * H);
        let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Trains a network on design rows and targets in W/m².
pub fn train(config: &MlpConfig, design: &DMatrix<f64>, targets: &[f64]) -> Result<MlpModel> {
    config.validate()?;
    let (n, width) = design.shape();
    if targets.len() != n {
        return Err(Error::Shape {
            expected: n,
            actual: targets.len(),
        });
    }
    if n == 0 || width == 0 {
        return Err(Error::EmptyDesign("no rows to train the network on".into()));
    }
    if design.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::Config("non-finite value in network training data".into()));
    }
    let params = config.parameter_count(width);
    if n < 10 * params {
        log::warn!("training a {params}-parameter network on only {n} rows");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = (config.validation_fraction * n as f64).round() as usize;
    if config.validation_fraction > 0.0 && (n_val == 0 || n_val >= n) {
        return Err(Error::Config(format!(
            "validation fraction {} leaves an empty split of {n} rows",
            config.validation_fraction
        )));
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    let raw: Vec<Vec<f64>> = (0..n)
        .map(|i| design.row(i).iter().copied().collect())
        .collect();
    let scaling = FeatureScaling::fit(train_idx.iter().map(|&i| raw[i].as_slice()), width);
    let rows: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| {
            let mut x = Vec::with_capacity(width);
            scaling.apply(r, &mut x);
            x
        })
        .collect();
    let scaled_targets: Vec<f64> = targets.iter().map(|y| y / MAX_IRRADIANCE).collect();

    let mut model = MlpModel::random(config, scaling, &mut rng);
    let h = config.hidden_units;
    let mut grad = Gradient::zeros(h, width);
    let mut step = Gradient::zeros(h, width);
    let mut hidden = Vec::with_capacity(h);
    let (lr, mu) = (config.learning_rate, config.momentum);

    let mut best: Option<(f64, MlpModel)> = None;
    let mut stale = 0;
    for epoch in 1..=config.max_epochs {
        train_idx.shuffle(&mut rng);
        for &i in &train_idx {
            model.backprop(&rows[i], scaled_targets[i], &mut hidden, &mut grad);
            for j in 0..h {
                for (k, (s, g)) in step.hidden_weights[j]
                    .iter_mut()
                    .zip(&grad.hidden_weights[j])
                    .enumerate()
                {
                    *s = -lr * g + mu * *s;
                    model.hidden_weights[j][k] += *s;
                }
                step.hidden_bias[j] = -lr * grad.hidden_bias[j] + mu * step.hidden_bias[j];
                model.hidden_bias[j] += step.hidden_bias[j];
                step.output_weights[j] =
                    -lr * grad.output_weights[j] + mu * step.output_weights[j];
                model.output_weights[j] += step.output_weights[j];
            }
            step.output_bias = -lr * grad.output_bias + mu * step.output_bias;
            model.output_bias += step.output_bias;
        }

        let train_mse = model.mse(&rows, &scaled_targets, &train_idx);
        let validation_mse = (!val_idx.is_empty()).then(|| model.mse(&rows, &scaled_targets, &val_idx));
        if !train_mse.is_finite() || validation_mse.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        model.history.push(EpochLoss {
            epoch,
            train_mse,
            validation_mse,
        });

        let Some(v) = validation_mse else {
            model.best_epoch = epoch;
            continue;
        };
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            model.best_epoch = epoch;
            best = Some((v, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    if let Some((_, mut kept)) = best {
        kept.history = std::mem::take(&mut model.history);
        return Ok(kept);
    }
    Ok(model)
}
