//! One-hidden-layer perceptron trained with iRprop⁻, the backpropagation
//! baseline that GRNN training time is compared against.
//!
//! Targets are angles in degrees; training works on `degrees / 90` so the
//! error target is expressed on a `[-1, 1]` scale.

use crate::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RpropError {
    #[error("layer sizes must be positive (inputs {inputs}, hidden {hidden})")]
    EmptyLayer { inputs: usize, hidden: usize },
    #[error("invalid Rprop configuration: {0}")]
    BadConfig(String),
    #[error("{inputs} input rows but {targets} targets")]
    CountMismatch { inputs: usize, targets: usize },
    #[error("inputs have {got} columns, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training set is empty")]
    EmptyData,
    #[error("training diverged at epoch {epoch}: non-finite {what}")]
    Diverged { epoch: usize, what: &'static str },
}

/// `k → h (tanh) → 1 (linear)` network. Parameters are stored flat in the
/// order: hidden weights (`h × k`, row-major), hidden biases, output
/// weights, output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    inputs: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl MlpModel {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn w1(&self) -> &[f64] {
        &self.params[..self.hidden * self.inputs]
    }

    fn b1(&self) -> &[f64] {
        let o = self.hidden * self.inputs;
        &self.params[o..o + self.hidden]
    }

    fn w2(&self) -> &[f64] {
        let o = self.hidden * self.inputs + self.hidden;
        &self.params[o..o + self.hidden]
    }

    fn b2(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    fn forward(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let (w1, b1, w2) = (self.w1(), self.b1(), self.w2());
        let mut out = self.b2();
        for j in 0..self.hidden {
            let row = &w1[j * self.inputs..(j + 1) * self.inputs];
            let z: f64 = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            hidden[j] = z.tanh();
            out += w2[j] * hidden[j];
        }
        out
    }

    /// Raw network output (normalized units).
    pub fn output(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        self.forward(x, &mut h)
    }

    /// Output rescaled to degrees.
    pub fn predict_degrees(&self, x: &[f64]) -> f64 {
        90.0 * self.output(x)
    }
}

/// Uniform `[-1/√fan_in, 1/√fan_in]` initialization from a seeded ChaCha8 stream.
pub fn mlp_init(inputs: usize, hidden: usize, seed: u64) -> Result<MlpModel, RpropError> {
    if inputs == 0 || hidden == 0 {
        return Err(RpropError::EmptyLayer { inputs, hidden });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = hidden * inputs + 2 * hidden + 1;
    let mut params = Vec::with_capacity(n);
    let r1 = 1.0 / (inputs as f64).sqrt();
    let r2 = 1.0 / (hidden as f64).sqrt();
    for _ in 0..hidden * inputs + hidden {
        params.push(rng.random_range(-r1..=r1));
    }
    for _ in 0..hidden + 1 {
        params.push(rng.random_range(-r2..=r2));
    }
    Ok(MlpModel {
        inputs,
        hidden,
        params,
    })
}

fn check_data(model: &MlpModel, inputs: &Matrix, targets: &[f64]) -> Result<(), RpropError> {
    if inputs.rows() != targets.len() {
        return Err(RpropError::CountMismatch {
            inputs: inputs.rows(),
            targets: targets.len(),
        });
    }
    if targets.is_empty() {
        return Err(RpropError::EmptyData);
    }
    if inputs.cols() != model.inputs {
        return Err(RpropError::DimensionMismatch {
            expected: model.inputs,
            got: inputs.cols(),
        });
    }
    Ok(())
}

/// Mean squared error over the batch, in the units of `targets`.
pub fn mse(model: &MlpModel, inputs: &Matrix, targets: &[f64]) -> Result<f64, RpropError> {
    check_data(model, inputs, targets)?;
    let mut h = vec![0.0; model.hidden];
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let e = model.forward(inputs.row(i), &mut h) - t;
            e * e
        })
        .sum();
    Ok(total / targets.len() as f64)
}

/// Exact gradient of the batch MSE with respect to every parameter, in the
/// model's flat parameter order. Returns `(mse, gradient)`.
pub fn mlp_gradient(
    model: &MlpModel,
    inputs: &Matrix,
    targets: &[f64],
) -> Result<(f64, Vec<f64>), RpropError> {
    check_data(model, inputs, targets)?;
    let (k, h) = (model.inputs, model.hidden);
    let m = targets.len() as f64;
    let mut grad = vec![0.0; model.param_count()];
    let mut act = vec![0.0; h];
    let mut loss = 0.0;
    let w2 = model.w2().to_vec();
    let (o_b1, o_w2, o_b2) = (h * k, h * k + h, 2 * h + h * k);
    for (i, t) in targets.iter().enumerate() {
        let x = inputs.row(i);
        let err = model.forward(x, &mut act) - t;
        loss += err * err;
        let delta = 2.0 * err / m;
        grad[o_b2] += delta;
        for j in 0..h {
            grad[o_w2 + j] += delta * act[j];
            let dz = delta * w2[j] * (1.0 - act[j] * act[j]);
            grad[o_b1 + j] += dz;
            let row = &mut grad[j * k..(j + 1) * k];
            for (g, xv) in row.iter_mut().zip(x) {
                *g += dz * xv;
            }
        }
    }
    Ok((loss / m, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpropConfig {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub max_epochs: usize,
    /// Stop once the normalized MSE is at or below this value.
    pub target_mse: f64,
}

impl Default for RpropConfig {
    fn default() -> Self {
        Self {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta0: 0.1,
            delta_min: 1e-6,
            delta_max: 50.0,
            max_epochs: 2000,
            target_mse: 0.01,
        }
    }
}

impl RpropConfig {
    pub fn validate(&self) -> Result<(), RpropError> {
        if !(0.0 < self.eta_minus && self.eta_minus < 1.0 && 1.0 < self.eta_plus) {
            return Err(RpropError::BadConfig(
                "need 0 < eta_minus < 1 < eta_plus".into(),
            ));
        }
        if !(0.0 < self.delta_min && self.delta_min <= self.delta0 && self.delta0 <= self.delta_max)
        {
            return Err(RpropError::BadConfig(
                "need 0 < delta_min <= delta0 <= delta_max".into(),
            ));
        }
        if self.target_mse.is_nan() || self.target_mse < 0.0 {
            return Err(RpropError::BadConfig("target_mse must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// `history[e]` is the normalized MSE after `e` update epochs.
    pub history: Vec<f64>,
    pub epochs: usize,
    pub reached_target: bool,
}

/// Full-batch iRprop⁻ on degree targets (normalized by 90 internally).
pub fn rprop_train(
    model: MlpModel,
    inputs: &Matrix,
    targets_deg: &[f64],
    cfg: &RpropConfig,
) -> Result<TrainOutcome, RpropError> {
    rprop_train_observed(model, inputs, targets_deg, cfg, |_, _| {})
}

/// As [`rprop_train`], calling `observe(epoch, step_sizes)` after every update.
pub fn rprop_train_observed(
    mut model: MlpModel,
    inputs: &Matrix,
    targets_deg: &[f64],
    cfg: &RpropConfig,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<TrainOutcome, RpropError> {
    cfg.validate()?;
    let targets: Vec<f64> = targets_deg.iter().map(|t| t / 90.0).collect();
    let n = model.param_count();
    let mut steps = vec![cfg.delta0; n];
    let mut prev = vec![0.0; n];
    let mut history = Vec::new();
    let mut epochs = 0;
    let mut reached_target = false;
    loop {
        let (loss, grad) = mlp_gradient(&model, inputs, &targets)?;
        if !loss.is_finite() {
            return Err(RpropError::Diverged {
                epoch: epochs,
                what: "loss",
            });
        }
        history.push(loss);
        if loss <= cfg.target_mse {
            reached_target = true;
            break;
        }
        if epochs >= cfg.max_epochs {
            break;
        }
        for i in 0..n {
            let g = grad[i];
            let s = prev[i] * g;
            if s > 0.0 {
                steps[i] = (steps[i] * cfg.eta_plus).min(cfg.delta_max);
                model.params[i] -= g.signum() * steps[i];
                prev[i] = g;
            } else if s < 0.0 {
                // sign flip: shrink and skip this component for one epoch
                steps[i] = (steps[i] * cfg.eta_minus).max(cfg.delta_min);
                prev[i] = 0.0;
            } else {
                if g != 0.0 {
                    model.params[i] -= g.signum() * steps[i];
                }
                prev[i] = g;
            }
        }
        epochs += 1;
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(RpropError::Diverged {
                epoch: epochs,
                what: "weight",
            });
        }
        observe(epochs, &steps);
    }
    Ok(TrainOutcome {
        model,
        history,
        epochs,
        reached_target,
    })
}

/// `epoch,mse` CSV of a training history.
pub fn history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,mse\n");
    for (e, v) in history.iter().enumerate() {
        s.push_str(&format!("{e},{v}\n"));
    }
    s
}
