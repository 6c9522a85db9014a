//! Gradients of the reconstruction loss and the Adam training loop.
//!
//! The loss is `L(θ) = MSE(rescale(p(θ)[..N]), target)`. Its gradient is
//! assembled by hand: `dL/dr` of the MSE, pulled back through the rescale
//! map to a weight vector over basis probabilities, then contracted with
//! `dp/dθ` from either the parameter-shift rule or an adjoint sweep.

use std::f64::consts::{FRAC_PI_2, SQRT_2, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::CircuitTemplate;
use crate::error::{Error, Result};
use crate::metrics::psnr_from_mse;
use crate::postproc::{mse_grad, mse_loss, rescale_jacobian_vjp, rescale_probs, ChannelStats};
use crate::statevec::{check_param_len, evolve_into, init_zero_state, ProbabilityVector, StateVector};

/// How `dp/dθ` is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMethod {
    /// Shifted circuit evaluations, two per rotation slot and four per
    /// controlled-rotation slot.
    #[default]
    Shift,
    /// One forward run and one reverse sweep over the statevector. Exact
    /// and equal to the shift rule up to rounding, but only available in
    /// simulation.
    Adjoint,
}

impl std::str::FromStr for GradientMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift" => Ok(GradientMethod::Shift),
            "adjoint" => Ok(GradientMethod::Adjoint),
            other => Err(Error::Config(format!(
                "unknown gradient method '{other}' (expected shift or adjoint)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Init {
    /// Angles drawn uniformly from `[0, 2π)`.
    UniformTwoPi,
    /// Angles drawn from `N(0, scale²)`.
    SmallNormal { scale: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub init: Init,
    pub log_every: usize,
    /// Stop as soon as the reconstruction reaches this PSNR.
    pub target_psnr_db: Option<f64>,
    pub gradient: GradientMethod,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            learning_rate: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 42,
            init: Init::UniformTwoPi,
            log_every: 10,
            target_psnr_db: None,
            gradient: GradientMethod::Shift,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, beta) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!("adam {name} must lie in [0, 1), got {beta}")));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::Config("adam epsilon must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        if let Init::SmallNormal { scale } = self.init {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!("init scale must be positive, got {scale}")));
            }
        }
        Ok(())
    }
}

/// Seeded initial parameter vector.
pub fn init_params(count: usize, init: Init, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match init {
        Init::UniformTwoPi => (0..count).map(|_| rng.gen_range(0.0..TAU)).collect(),
        Init::SmallNormal { scale } => {
            let normal = Normal::new(0.0, scale).expect("scale validated");
            (0..count).map(|_| normal.sample(&mut rng)).collect()
        }
    }
}

/// A gradient together with the number of circuit executions it cost.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEval {
    pub grad: Vec<f64>,
    pub circuit_runs: usize,
}

fn check_weights(template: &CircuitTemplate, params: &[f64], row_weights: &[f64]) -> Result<()> {
    check_param_len(template, params)?;
    let dim = 1usize << template.num_qubits();
    if row_weights.len() != dim {
        return Err(Error::Contract(format!(
            "row weights have length {}, expected {dim}",
            row_weights.len()
        )));
    }
    Ok(())
}

/// Slot-indexed flag: does the slot belong to a controlled rotation?
fn controlled_slots(template: &CircuitTemplate) -> Vec<bool> {
    let mut flags = vec![false; template.param_count()];
    for gate in template.gates() {
        if let Some(k) = gate.param_slot {
            flags[k] = gate.kind.is_controlled();
        }
    }
    flags
}

fn weighted_probability(state: &StateVector, weights: &[f64]) -> f64 {
    state
        .amplitudes()
        .iter()
        .zip(weights)
        .map(|(a, w)| w * a.norm_sqr())
        .sum()
}

/// `dL/dθ_k = Σ_i w_i ∂p_i/∂θ_k` by the parameter-shift rule.
///
/// Single-qubit rotations use shifts `±π/2` with coefficient `1/2`.
/// Controlled rotations have eigenvalue gaps `{1/2, 1}` and use the
/// four-term rule with shifts `±π/2, ±3π/2` and coefficients
/// `(√2 ± 1)/(4√2)`.
pub fn prob_jacobian_parameter_shift(
    template: &CircuitTemplate,
    params: &[f64],
    row_weights: &[f64],
) -> Result<GradientEval> {
    check_weights(template, params, row_weights)?;
    let controlled = controlled_slots(template);
    let m = template.num_qubits();
    let c_plus = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
    let c_minus = (SQRT_2 - 1.0) / (4.0 * SQRT_2);

    let grad: Vec<f64> = (0..params.len())
        .into_par_iter()
        .map_init(
            || (init_zero_state(m).expect("template register size is valid"), params.to_vec()),
            |(state, shifted), k| {
                let mut eval = |delta: f64| {
                    shifted[k] = params[k] + delta;
                    evolve_into(template, shifted, state);
                    shifted[k] = params[k];
                    weighted_probability(state, row_weights)
                };
                if controlled[k] {
                    let near = eval(FRAC_PI_2) - eval(-FRAC_PI_2);
                    let far = eval(3.0 * FRAC_PI_2) - eval(-3.0 * FRAC_PI_2);
                    c_plus * near - c_minus * far
                } else {
                    0.5 * (eval(FRAC_PI_2) - eval(-FRAC_PI_2))
                }
            },
        )
        .collect();

    let n_controlled = controlled.iter().filter(|&&c| c).count();
    Ok(GradientEval {
        grad,
        circuit_runs: 2 * (params.len() - n_controlled) + 4 * n_controlled,
    })
}

fn inner(bra: &StateVector, ket: &StateVector) -> Complex64 {
    bra.amplitudes()
        .iter()
        .zip(ket.amplitudes())
        .map(|(b, k)| b.conj() * k)
        .sum()
}

/// `dL/dθ_k = Σ_i w_i ∂p_i/∂θ_k` by reverse-mode differentiation of the
/// statevector: `∂/∂θ_k = Im <λ_k| G_k |φ_k>` with `λ` the weighted state
/// propagated backwards.
pub fn adjoint_gradient(
    template: &CircuitTemplate,
    params: &[f64],
    row_weights: &[f64],
) -> Result<GradientEval> {
    check_weights(template, params, row_weights)?;
    let mut phi = init_zero_state(template.num_qubits())?;
    evolve_into(template, params, &mut phi);
    let weighted: Vec<Complex64> = phi
        .amplitudes()
        .iter()
        .zip(row_weights)
        .map(|(a, w)| a * w)
        .collect();
    let mut lambda = StateVector::from_amplitudes(weighted)?;
    let mut scratch = phi.clone();
    let mut grad = vec![0.0; params.len()];

    for gate in template.gates().iter().rev() {
        let theta = gate.param_slot.map_or(0.0, |k| params[k]);
        if let Some(k) = gate.param_slot {
            scratch.clone_from(&phi);
            scratch.apply_generator(gate);
            grad[k] = inner(&lambda, &scratch).im;
        }
        phi.apply_inverse_unchecked(gate, theta);
        lambda.apply_inverse_unchecked(gate, theta);
    }
    Ok(GradientEval {
        grad,
        circuit_runs: 1,
    })
}

/// Central-difference gradient of `loss_fn ∘ run_circuit`.
pub fn finite_difference_gradient<F>(
    template: &CircuitTemplate,
    params: &[f64],
    loss_fn: F,
    h: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&ProbabilityVector) -> f64,
{
    check_param_len(template, params)?;
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {h}")));
    }
    let mut state = init_zero_state(template.num_qubits())?;
    let mut shifted = params.to_vec();
    let mut eval = |shifted: &[f64]| {
        evolve_into(template, shifted, &mut state);
        loss_fn(&state.probabilities())
    };
    let mut grad = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        shifted[k] = params[k] + h;
        let plus = eval(&shifted);
        shifted[k] = params[k] - h;
        let minus = eval(&shifted);
        shifted[k] = params[k];
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || state.v.len() != state.m.len() {
        return Err(Error::Contract(format!(
            "adam over {} parameters with {} gradients and {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training {
            step: state.t as usize,
            message: format!("gradient component {k} is {}", grads[k]),
        });
    }
    state.t += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let bias1 = 1.0 - b1.powi(state.t as i32);
    let bias2 = 1.0 - b2.powi(state.t as i32);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
    Ok(())
}

/// Loss value and reconstruction at one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    pub loss: f64,
    pub recon: Vec<f64>,
    pub grad: Option<GradientEval>,
}

/// The reconstruction objective for one channel.
#[derive(Clone, Debug)]
pub struct Objective<'a> {
    template: &'a CircuitTemplate,
    target: &'a [f64],
    stats: ChannelStats,
}

impl<'a> Objective<'a> {
    pub fn new(template: &'a CircuitTemplate, target: &'a [f64], stats: ChannelStats) -> Result<Self> {
        let dim = 1usize << template.num_qubits();
        if target.is_empty() || target.len() > dim {
            return Err(Error::Contract(format!(
                "{} target pixels do not fit a {}-qubit register",
                target.len(),
                template.num_qubits()
            )));
        }
        Ok(Objective {
            template,
            target,
            stats,
        })
    }

    pub fn pixels(&self) -> usize {
        self.target.len()
    }

    /// Loss as a function of the full probability vector.
    pub fn loss_from_probs(&self, probs: &[f64]) -> Result<f64> {
        let recon = rescale_probs(probs, self.pixels(), self.stats)?;
        mse_loss(&recon, self.target)
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<LossEval> {
        let probs = crate::statevec::run_circuit(self.template, params)?;
        let recon = rescale_probs(probs.as_slice(), self.pixels(), self.stats)?;
        let loss = mse_loss(&recon, self.target)?;
        Ok(LossEval {
            loss,
            recon,
            grad: None,
        })
    }

    /// `dL/dp` over the full register; zero beyond the pixel count.
    pub fn probability_weights(&self, probs: &[f64], recon: &[f64]) -> Result<Vec<f64>> {
        let upstream = mse_grad(recon, self.target)?;
        let mut weights = rescale_jacobian_vjp(&probs[..self.pixels()], self.stats, &upstream)?;
        weights.resize(probs.len(), 0.0);
        Ok(weights)
    }

    pub fn evaluate_with_grad(&self, params: &[f64], method: GradientMethod) -> Result<LossEval> {
        let probs = crate::statevec::run_circuit(self.template, params)?;
        let recon = rescale_probs(probs.as_slice(), self.pixels(), self.stats)?;
        let loss = mse_loss(&recon, self.target)?;
        let weights = self.probability_weights(probs.as_slice(), &recon)?;
        let grad = match method {
            GradientMethod::Shift => prob_jacobian_parameter_shift(self.template, params, &weights)?,
            GradientMethod::Adjoint => adjoint_gradient(self.template, params, &weights)?,
        };
        Ok(LossEval {
            loss,
            recon,
            grad: Some(grad),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub loss: f64,
    /// `None` when the loss is exactly zero.
    pub psnr_db: Option<f64>,
}

impl TrainRecord {
    fn new(step: usize, loss: f64) -> Self {
        let psnr = psnr_from_mse(loss);
        TrainRecord {
            step,
            loss,
            psnr_db: psnr.is_finite().then_some(psnr),
        }
    }

    pub fn psnr(&self) -> f64 {
        self.psnr_db.unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
    pub final_params: Vec<f64>,
    pub final_loss: f64,
    /// Optimizer updates actually applied.
    pub steps_run: usize,
    pub stopped_early: bool,
    /// Circuit executions spent on gradients and loss evaluations.
    pub circuit_runs: usize,
}

impl TrainTrace {
    pub fn first_loss(&self) -> f64 {
        self.records.first().map_or(self.final_loss, |r| r.loss)
    }

    pub fn final_psnr(&self) -> f64 {
        psnr_from_mse(self.final_loss)
    }

    /// `step,loss,psnr` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,psnr\n");
        for r in &self.records {
            let psnr = r.psnr_db.map_or_else(|| "inf".to_string(), |p| format!("{p}"));
            let _ = writeln!(out, "{},{},{}", r.step, r.loss, psnr);
        }
        out
    }
}

/// Trains one channel: circuit → rescale → MSE → VJP → gradient → Adam,
/// for `config.steps` updates or until the PSNR target is met.
pub fn train_channel(
    template: &CircuitTemplate,
    target: &[f64],
    stats: ChannelStats,
    config: &TrainConfig,
) -> Result<TrainTrace> {
    config.validate()?;
    let objective = Objective::new(template, target, stats)?;
    let params = init_params(template.param_count(), config.init, config.seed);
    train_from(&objective, params, config)
}

/// Runs the training loop from explicit starting parameters.
pub fn train_from(objective: &Objective<'_>, mut params: Vec<f64>, config: &TrainConfig) -> Result<TrainTrace> {
    config.validate()?;
    check_param_len(objective.template, &params)?;
    let mut adam = AdamState::new(params.len());
    let mut records = Vec::new();
    let mut circuit_runs = 0;

    for step in 0..config.steps {
        let eval = objective.evaluate_with_grad(&params, config.gradient)?;
        let grad = eval.grad.expect("gradient requested");
        circuit_runs += 1 + grad.circuit_runs;
        if !eval.loss.is_finite() {
            return Err(Error::Training {
                step,
                message: format!("loss is {}", eval.loss),
            });
        }
        let record = TrainRecord::new(step, eval.loss);
        let reached = config
            .target_psnr_db
            .is_some_and(|target| record.psnr() >= target);
        if step % config.log_every == 0 || reached {
            records.push(record);
        }
        if reached {
            return Ok(TrainTrace {
                records,
                final_params: params,
                final_loss: eval.loss,
                steps_run: step,
                stopped_early: true,
                circuit_runs,
            });
        }
        adam_step(&mut params, &grad.grad, &mut adam, config).map_err(|e| match e {
            Error::Training { message, .. } => Error::Training { step, message },
            other => other,
        })?;
    }

    let final_loss = objective.evaluate(&params)?.loss;
    circuit_runs += 1;
    if !final_loss.is_finite() {
        return Err(Error::Training {
            step: config.steps,
            message: format!("final loss is {final_loss}"),
        });
    }
    records.push(TrainRecord::new(config.steps, final_loss));
    Ok(TrainTrace {
        records,
        final_params: params,
        final_loss,
        steps_run: config.steps,
        stopped_early: false,
        circuit_runs,
    })
}
