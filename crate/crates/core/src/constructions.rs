//! Weight settings under which a single recurrent unit reproduces a time-lag
//! system, and the matching warp transforms.
//!
//! * A linear simple RNN with `W_h = a`, `W_x = 1 - a`, `b = 0` and `h_0 = z_0`
//!   is the time-lag recursion exactly; warping sets `W_h = a^gamma`.
//! * A tanh simple RNN tracks the system within `epsilon` once inputs and the
//!   initial state are rescaled into the near-linear band `[-delta, delta]`.
//! * A one-unit LSTM with linear candidate and cell-output activations holds
//!   the system in its cell state (`b_f = logit(a)`, `b_i = logit(1 - a)`),
//!   and its hidden state is off by at most `(1 - sigmoid(b_o)) * M`.
//!   Warping only moves `b_f` and `b_i`.

use serde::{Deserialize, Serialize};

use crate::dynsys::{warp_retention, TimeLagSystem};
use crate::error::{Error, Result};
use crate::rnn::{
    logit, sigmoid, ActivationKind, Gate, LstmParams, Matrix, Network, RecurrentLayer, RecurrentState,
    SimpleRnnParams,
};

/// Margin added to the output-gate threshold when no `b_o` is given.
pub const DEFAULT_OUTPUT_BIAS_MARGIN: f64 = 1.0;

/// Factor applied to the largest admissible `delta` to keep the bound strict.
pub const DELTA_SAFETY_FACTOR: f64 = 0.99;

fn check_retention(a: f64) -> Result<()> {
    TimeLagSystem::new(a, 0.0).map(|_| ())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("warp factor {gamma} must be positive")))
    }
}

fn scalar(v: f64) -> Matrix {
    Matrix::column(&[v])
}

/// One-unit linear simple RNN reproducing `z_t = a z_{t-1} + (1 - a) x_t`.
/// Returns the parameters and the initial hidden state `[z0]`.
pub fn build_exact_simplernn(a: f64, z0: f64) -> Result<(SimpleRnnParams, Vec<f64>)> {
    check_retention(a)?;
    let params = SimpleRnnParams::new(scalar(1.0 - a), scalar(a), vec![0.0], ActivationKind::Linear)?;
    Ok((params, vec![z0]))
}

pub fn warp_simplernn(params: &SimpleRnnParams, gamma: f64) -> Result<SimpleRnnParams> {
    check_gamma(gamma)?;
    if params.units() != 1 || params.features() != 1 {
        return Err(Error::shape("simple RNN warp applies to a one-unit, one-feature cell"));
    }
    let w_h = params.w_h.get(0, 0);
    let w_x = params.w_x.get(0, 0);
    if !(w_h > 0.0 && w_h < 1.0) {
        return Err(Error::domain(format!("recurrent weight {w_h} must lie in (0, 1)")));
    }
    let mut out = params.clone();
    out.w_h.set(0, 0, w_h.powf(gamma));
    out.w_x.set(0, 0, 1.0 - (1.0 - w_x).powf(gamma));
    Ok(out)
}

/// Rescaling that maps sequences bounded by `bound` into `[-delta, delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TanhScaling {
    pub delta: f64,
    pub bound: f64,
    pub scale_factor: f64,
}

impl TanhScaling {
    pub fn new(delta: f64, bound: f64) -> Result<Self> {
        if !(delta > 0.0 && bound > 0.0 && delta.is_finite() && bound.is_finite()) {
            return Err(Error::domain("delta and bound must be positive"));
        }
        Ok(Self { delta, bound, scale_factor: delta / bound })
    }

    /// Original units to the near-linear band.
    pub fn scale(&self, v: f64) -> f64 {
        v * self.scale_factor
    }

    /// Band back to original units, `B / delta * h`.
    pub fn unscale(&self, h: f64) -> f64 {
        h * self.bound / self.delta
    }

    /// Worst-case reconstruction error over `horizon` steps,
    /// `B delta^2 / 3 * (1 - a^N) / (1 - a)`.
    pub fn error_bound(&self, a: f64, horizon: usize) -> f64 {
        self.bound * self.delta * self.delta / 3.0 * (1.0 - a.powi(horizon as i32)) / (1.0 - a)
    }
}

/// Largest admissible scaling radius, shrunk by [`DELTA_SAFETY_FACTOR`]:
/// `0.99 * sqrt(epsilon * 3 / B * (1 - a) / (1 - a^N))`.
pub fn tanh_scaling_delta(epsilon: f64, bound: f64, a: f64, horizon: usize) -> Result<f64> {
    check_retention(a)?;
    if !(epsilon > 0.0 && bound > 0.0) || horizon == 0 {
        return Err(Error::domain("epsilon, bound and horizon must be positive"));
    }
    let limit = epsilon * 3.0 / bound * (1.0 - a) / (1.0 - a.powi(horizon as i32));
    Ok(DELTA_SAFETY_FACTOR * limit.sqrt())
}

/// One-unit tanh simple RNN that tracks the time-lag system within `epsilon`
/// over `horizon` steps for inputs and states bounded by `bound`.
///
/// Inputs must be passed through [`TanhScaling::scale`] before the step and
/// hidden states through [`TanhScaling::unscale`] after it; the initial hidden
/// state is `scale(z0)`.
pub fn build_tanh_simplernn(
    a: f64,
    z0: f64,
    epsilon: f64,
    bound: f64,
    horizon: usize,
) -> Result<(SimpleRnnParams, TanhScaling)> {
    if z0.abs() > bound {
        return Err(Error::domain(format!("|z0| = {} exceeds bound {bound}", z0.abs())));
    }
    let delta = tanh_scaling_delta(epsilon, bound, a, horizon)?;
    let (mut params, _) = build_exact_simplernn(a, z0)?;
    params.activation = ActivationKind::Tanh;
    Ok((params, TanhScaling::new(delta, bound)?))
}

/// Runs a rescaled simple RNN over `xs` and returns `z_hat_1..=z_hat_N` in
/// original units.
pub fn run_scaled_simplernn(params: &SimpleRnnParams, scaling: &TanhScaling, z0: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let net = Network::new(RecurrentLayer::Simple(params.clone()), vec![])?;
    let inputs = Matrix::column(&xs.iter().map(|x| scaling.scale(*x)).collect::<Vec<_>>());
    let init = RecurrentState::zeros_simple(1);
    let init = RecurrentState { h: vec![scaling.scale(z0)], ..init };
    Ok(net.predict(&inputs, Some(&init))?.into_iter().map(|h| scaling.unscale(h)).collect())
}

/// Error target, state bound and output-gate bias of the linear LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmErrorBudget {
    pub epsilon: f64,
    pub bound: f64,
    pub b_o: f64,
}

impl LstmErrorBudget {
    /// Budget with `b_o` set [`DEFAULT_OUTPUT_BIAS_MARGIN`] above the threshold.
    pub fn new(epsilon: f64, bound: f64) -> Result<Self> {
        let b_o = output_bias_threshold(epsilon, bound)? + DEFAULT_OUTPUT_BIAS_MARGIN;
        Ok(Self { epsilon, bound, b_o })
    }

    pub fn with_output_bias(epsilon: f64, bound: f64, b_o: f64) -> Result<Self> {
        let threshold = output_bias_threshold(epsilon, bound)?;
        if !(b_o > threshold) {
            return Err(Error::domain(format!(
                "output bias {b_o} must exceed logit(1 - epsilon / M) = {threshold}"
            )));
        }
        Ok(Self { epsilon, bound, b_o })
    }

    pub fn error_bound(&self) -> f64 {
        (1.0 - sigmoid(self.b_o)) * self.bound
    }
}

/// `logit(1 - epsilon / M)`, the smallest admissible output-gate bias.
pub fn output_bias_threshold(epsilon: f64, bound: f64) -> Result<f64> {
    if !(epsilon > 0.0 && bound > 0.0) {
        return Err(Error::domain("epsilon and bound must be positive"));
    }
    if epsilon >= bound {
        return Err(Error::domain(format!("epsilon {epsilon} must be smaller than bound {bound}")));
    }
    logit(1.0 - epsilon / bound)
}

/// One-unit linear-activation LSTM approximating the time-lag system, with the
/// default output bias. See [`build_linear_lstm_with_budget`].
pub fn build_linear_lstm(a: f64, z0: f64, epsilon: f64, bound: f64) -> Result<(LstmParams, RecurrentState)> {
    build_linear_lstm_with_budget(a, z0, &LstmErrorBudget::new(epsilon, bound)?)
}

pub fn build_linear_lstm_with_budget(
    a: f64,
    z0: f64,
    budget: &LstmErrorBudget,
) -> Result<(LstmParams, RecurrentState)> {
    check_retention(a)?;
    output_bias_threshold(budget.epsilon, budget.bound)?;
    if z0.abs() > budget.bound {
        return Err(Error::domain(format!("|z0| = {} exceeds bound {}", z0.abs(), budget.bound)));
    }
    let mut p = LstmParams::zeros(1, 1, ActivationKind::Linear, ActivationKind::Linear);
    p.bias_mut(Gate::Forget)[0] = logit(a)?;
    p.bias_mut(Gate::Input)[0] = logit(1.0 - a)?;
    p.w_x[Gate::Candidate as usize].set(0, 0, 1.0);
    p.bias_mut(Gate::Output)[0] = budget.b_o;
    Ok((p, RecurrentState::lstm(vec![0.0], vec![z0])))
}

/// Warped biases `b_f = logit(sigmoid(b_f)^gamma)` and
/// `b_i = logit(1 - (1 - sigmoid(b_i))^gamma)`; everything else is kept.
pub fn warp_lstm_theoretical(params: &LstmParams, gamma: f64) -> Result<LstmParams> {
    check_gamma(gamma)?;
    let mut out = params.clone();
    for b in out.bias_mut(Gate::Forget).iter_mut() {
        *b = logit(warp_retention(sigmoid(*b), gamma)?)?;
    }
    for b in out.bias_mut(Gate::Input).iter_mut() {
        let keep = 1.0 - sigmoid(*b);
        *b = logit(1.0 - warp_retention(keep, gamma)?)?;
    }
    Ok(out)
}

/// The `(alpha_f, alpha_i)` additive shifts that [`warp_lstm_theoretical`]
/// applies to a linear LSTM built for retention `a`.
pub fn theoretical_bias_shift(a: f64, gamma: f64) -> Result<(f64, f64)> {
    let warped = warp_retention(a, gamma)?;
    Ok((logit(warped)? - logit(a)?, logit(1.0 - warped)? - logit(1.0 - a)?))
}

/// `(1 - sigmoid(b_o)) * M`.
pub fn lstm_error_bound(b_o: f64, bound: f64) -> Result<f64> {
    if !(bound > 0.0) {
        return Err(Error::domain(format!("bound {bound} must be positive")));
    }
    Ok((1.0 - sigmoid(b_o)) * bound)
}
