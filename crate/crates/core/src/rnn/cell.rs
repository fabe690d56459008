use serde::{Deserialize, Serialize};

use super::activation::{sigmoid, ActivationKind};
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// LSTM gates in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];

    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Candidate => "g",
            Gate::Output => "o",
        }
    }
}

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} contains non-finite values")))
    }
}

fn check_dims(what: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.rows() == rows && m.cols() == cols {
        Ok(())
    } else {
        Err(Error::shape(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.rows(),
            m.cols()
        )))
    }
}

/// Elman cell: `h_t = act(W_x x_t + W_h h_{t-1} + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleRnnParams {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
    pub activation: ActivationKind,
}

impl SimpleRnnParams {
    pub fn new(w_x: Matrix, w_h: Matrix, b: Vec<f64>, activation: ActivationKind) -> Result<Self> {
        let p = Self { w_x, w_h, b, activation };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(features: usize, units: usize, activation: ActivationKind) -> Self {
        Self {
            w_x: Matrix::zeros(units, features),
            w_h: Matrix::zeros(units, units),
            b: vec![0.0; units],
            activation,
        }
    }

    pub fn units(&self) -> usize {
        self.b.len()
    }

    pub fn features(&self) -> usize {
        self.w_x.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let u = self.units();
        check_dims("W_x", &self.w_x, u, self.features())?;
        check_dims("W_h", &self.w_h, u, u)?;
        check_finite("W_x", self.w_x.as_slice())?;
        check_finite("W_h", self.w_h.as_slice())?;
        check_finite("b", &self.b)
    }

    pub fn param_count(&self) -> usize {
        self.w_x.len() + self.w_h.len() + self.b.len()
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w_x.as_slice(), self.w_h.as_slice(), &self.b]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w_x.as_mut_slice(), self.w_h.as_mut_slice(), &mut self.b]
    }

    /// Writes the new hidden state into `h_out`.
    #[inline]
    pub(crate) fn step_into(&self, h_prev: &[f64], x: &[f64], h_out: &mut [f64]) {
        h_out.copy_from_slice(&self.b);
        self.w_x.mul_vec_add(x, h_out);
        self.w_h.mul_vec_add(h_prev, h_out);
        for v in h_out.iter_mut() {
            *v = self.activation.apply(*v);
        }
    }
}

/// LSTM cell parameters, one input matrix, recurrent matrix and bias per gate.
///
/// The forget, input and output gates are always sigmoid. The candidate and
/// cell-output nonlinearities are configurable so the linear-activation
/// variant can be expressed.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_x: [Matrix; 4],
    pub w_h: [Matrix; 4],
    pub b: [Vec<f64>; 4],
    pub candidate_activation: ActivationKind,
    pub cell_output_activation: ActivationKind,
}

impl LstmParams {
    pub fn zeros(features: usize, units: usize, candidate: ActivationKind, cell_output: ActivationKind) -> Self {
        Self {
            w_x: std::array::from_fn(|_| Matrix::zeros(units, features)),
            w_h: std::array::from_fn(|_| Matrix::zeros(units, units)),
            b: std::array::from_fn(|_| vec![0.0; units]),
            candidate_activation: candidate,
            cell_output_activation: cell_output,
        }
    }

    pub fn units(&self) -> usize {
        self.b[0].len()
    }

    pub fn features(&self) -> usize {
        self.w_x[0].cols()
    }

    pub fn bias(&self, gate: Gate) -> &[f64] {
        &self.b[gate as usize]
    }

    pub fn bias_mut(&mut self, gate: Gate) -> &mut Vec<f64> {
        &mut self.b[gate as usize]
    }

    pub fn validate(&self) -> Result<()> {
        let (u, f) = (self.units(), self.features());
        for g in Gate::ALL {
            let i = g as usize;
            check_dims(&format!("W_x{}", g.suffix()), &self.w_x[i], u, f)?;
            check_dims(&format!("W_h{}", g.suffix()), &self.w_h[i], u, u)?;
            if self.b[i].len() != u {
                return Err(Error::shape(format!("b_{} has length {}, expected {u}", g.suffix(), self.b[i].len())));
            }
            check_finite("LSTM weights", self.w_x[i].as_slice())?;
            check_finite("LSTM weights", self.w_h[i].as_slice())?;
            check_finite("LSTM biases", &self.b[i])?;
        }
        for act in [self.candidate_activation, self.cell_output_activation] {
            if !matches!(act, ActivationKind::Tanh | ActivationKind::Linear) {
                return Err(Error::domain(format!("LSTM candidate/cell activation must be tanh or linear, got {act}")));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        4 * (self.w_x[0].len() + self.w_h[0].len() + self.b[0].len())
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(12);
        for i in 0..4 {
            out.push(self.w_x[i].as_slice());
            out.push(self.w_h[i].as_slice());
            out.push(&self.b[i][..]);
        }
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(12);
        for ((wx, wh), b) in self.w_x.iter_mut().zip(self.w_h.iter_mut()).zip(self.b.iter_mut()) {
            out.push(wx.as_mut_slice());
            out.push(wh.as_mut_slice());
            out.push(&mut b[..]);
        }
        out
    }

    /// One step. `gates` receives the post-activation gate values laid out
    /// as `[f | i | g | o]`, each `units` long.
    #[inline]
    pub(crate) fn step_into(
        &self,
        h_prev: &[f64],
        c_prev: &[f64],
        x: &[f64],
        gates: &mut [f64],
        c_out: &mut [f64],
        h_out: &mut [f64],
    ) {
        let u = self.units();
        for g in Gate::ALL {
            let i = g as usize;
            let z = &mut gates[i * u..(i + 1) * u];
            z.copy_from_slice(&self.b[i]);
            self.w_x[i].mul_vec_add(x, z);
            self.w_h[i].mul_vec_add(h_prev, z);
            match g {
                Gate::Candidate => z.iter_mut().for_each(|v| *v = self.candidate_activation.apply(*v)),
                _ => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            }
        }
        let (fg, rest) = gates.split_at(u);
        let (ig, rest) = rest.split_at(u);
        let (gg, og) = rest.split_at(u);
        for k in 0..u {
            let c = fg[k] * c_prev[k] + ig[k] * gg[k];
            c_out[k] = c;
            h_out[k] = og[k] * self.cell_output_activation.apply(c);
        }
    }
}

/// Hidden state and, for LSTM layers, cell state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentState {
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

impl RecurrentState {
    pub fn zeros_simple(units: usize) -> Self {
        Self { h: vec![0.0; units], c: None }
    }

    pub fn zeros_lstm(units: usize) -> Self {
        Self { h: vec![0.0; units], c: Some(vec![0.0; units]) }
    }

    pub fn lstm(h: Vec<f64>, c: Vec<f64>) -> Self {
        Self { h, c: Some(c) }
    }
}

pub fn simple_rnn_step(params: &SimpleRnnParams, h_prev: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if h_prev.len() != params.units() || x.len() != params.features() {
        return Err(Error::shape(format!(
            "simple RNN step expects h of {} and x of {}, got {} and {}",
            params.units(),
            params.features(),
            h_prev.len(),
            x.len()
        )));
    }
    let mut h = vec![0.0; params.units()];
    params.step_into(h_prev, x, &mut h);
    Ok(h)
}

fn check_lstm_inputs<'a>(params: &LstmParams, state: &'a RecurrentState, x: &[f64]) -> Result<&'a [f64]> {
    let u = params.units();
    let c_prev = state
        .c
        .as_deref()
        .ok_or_else(|| Error::shape("LSTM step needs a cell state"))?;
    if state.h.len() != u || c_prev.len() != u || x.len() != params.features() {
        return Err(Error::shape(format!(
            "LSTM step expects h, c of {u} and x of {}, got {}, {} and {}",
            params.features(),
            state.h.len(),
            c_prev.len(),
            x.len()
        )));
    }
    Ok(c_prev)
}

pub fn lstm_step(params: &LstmParams, state: &RecurrentState, x: &[f64]) -> Result<RecurrentState> {
    let c_prev = check_lstm_inputs(params, state, x)?;
    let u = params.units();
    let mut gates = vec![0.0; 4 * u];
    let mut c = vec![0.0; u];
    let mut h = vec![0.0; u];
    params.step_into(&state.h, c_prev, x, &mut gates, &mut c, &mut h);
    Ok(RecurrentState::lstm(h, c))
}

/// Gate activations `[f, i, g, o]` for one step, for inspection.
pub fn lstm_gates(params: &LstmParams, state: &RecurrentState, x: &[f64]) -> Result<[Vec<f64>; 4]> {
    let c_prev = check_lstm_inputs(params, state, x)?;
    let u = params.units();
    let mut gates = vec![0.0; 4 * u];
    let (mut c, mut h) = (vec![0.0; u], vec![0.0; u]);
    params.step_into(&state.h, c_prev, x, &mut gates, &mut c, &mut h);
    Ok(std::array::from_fn(|i| gates[i * u..(i + 1) * u].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn simple_step_examples() {
        let p = SimpleRnnParams::new(scalar(0.1), scalar(0.9), vec![0.0], ActivationKind::Linear).unwrap();
        let h = simple_rnn_step(&p, &[10.0], &[20.0]).unwrap();
        assert!((h[0] - 11.0).abs() < 1e-12);

        let z = SimpleRnnParams::zeros(3, 2, ActivationKind::Tanh);
        assert_eq!(simple_rnn_step(&z, &[0.4, -2.0], &[1.0, 5.0, -7.0]).unwrap(), vec![0.0, 0.0]);

        let t = SimpleRnnParams::new(scalar(0.01), scalar(0.0), vec![0.0], ActivationKind::Tanh).unwrap();
        let h = simple_rnn_step(&t, &[0.0], &[1.0]).unwrap();
        // tanh(u) = u - u^3/3 + 2u^5/15
        let u: f64 = 0.01;
        assert!((h[0] - (u - u.powi(3) / 3.0 + 2.0 * u.powi(5) / 15.0)).abs() < 1e-15);
        assert!((h[0] - 0.0099997).abs() < 1e-7);

        assert!(matches!(simple_rnn_step(&p, &[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
    }

    fn linear_timelag_lstm(a: f64, b_o: f64) -> LstmParams {
        let mut p = LstmParams::zeros(1, 1, ActivationKind::Linear, ActivationKind::Linear);
        p.b[Gate::Forget as usize][0] = (a / (1.0 - a)).ln();
        p.b[Gate::Input as usize][0] = ((1.0 - a) / a).ln();
        p.w_x[Gate::Candidate as usize].set(0, 0, 1.0);
        p.b[Gate::Output as usize][0] = b_o;
        p
    }

    #[test]
    fn lstm_step_examples() {
        let p = linear_timelag_lstm(0.9, 10.0);
        let s = lstm_step(&p, &RecurrentState::lstm(vec![0.0], vec![10.0]), &[20.0]).unwrap();
        let c = s.c.unwrap()[0];
        assert!((c - 11.0).abs() < 1e-12, "{c}");
        assert!((s.h[0] - sigmoid(10.0) * 11.0).abs() < 1e-12);

        let mut closed = LstmParams::zeros(2, 3, ActivationKind::Tanh, ActivationKind::Tanh);
        closed.b[0] = vec![-50.0; 3];
        closed.b[1] = vec![-50.0; 3];
        closed.w_x[2] = Matrix::from_vec(3, 2, vec![1.0; 6]).unwrap();
        let s = lstm_step(&closed, &RecurrentState::lstm(vec![0.3; 3], vec![40.0; 3]), &[9.0, -4.0]).unwrap();
        assert!(s.c.unwrap().iter().all(|c| c.abs() < 1e-19));

        let zero = LstmParams::zeros(2, 2, ActivationKind::Tanh, ActivationKind::Tanh);
        let c0 = 3.0;
        let s = lstm_step(&zero, &RecurrentState::lstm(vec![1.0, -1.0], vec![c0, -c0]), &[5.0, 6.0]).unwrap();
        let c = s.c.unwrap();
        assert!((c[0] - 0.5 * c0).abs() < 1e-15);
        assert!((s.h[0] - 0.5 * (0.5 * c0).tanh()).abs() < 1e-15);
        assert!((c[1] + 0.5 * c0).abs() < 1e-15);

        assert!(lstm_step(&zero, &RecurrentState::zeros_simple(2), &[1.0, 1.0]).is_err());
        assert!(lstm_step(&zero, &RecurrentState::zeros_lstm(2), &[1.0]).is_err());
    }

    #[test]
    fn validate_rejects_bad_shapes_and_activations() {
        let mut p = LstmParams::zeros(2, 3, ActivationKind::Tanh, ActivationKind::Tanh);
        assert!(p.validate().is_ok());
        p.candidate_activation = ActivationKind::Relu;
        assert!(p.validate().is_err());
        let mut p = LstmParams::zeros(2, 3, ActivationKind::Tanh, ActivationKind::Tanh);
        p.b[3] = vec![0.0; 2];
        assert!(matches!(p.validate(), Err(Error::Shape(_))));
        assert!(SimpleRnnParams::new(Matrix::zeros(2, 1), Matrix::zeros(2, 2), vec![0.0], ActivationKind::Tanh).is_err());
    }

    proptest! {
        #[test]
        fn gate_ranges(
            w in prop::collection::vec(-3.0f64..3.0, 4 * (3 * 2 + 3 * 3 + 3)),
            x in prop::collection::vec(-10.0f64..10.0, 2),
            h in prop::collection::vec(-1.0f64..1.0, 3),
            c in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let mut p = LstmParams::zeros(2, 3, ActivationKind::Tanh, ActivationKind::Tanh);
            let mut it = w.into_iter();
            for t in p.tensors_mut() {
                for v in t.iter_mut() {
                    *v = it.next().unwrap();
                }
            }
            let [f, i, g, o] = lstm_gates(&p, &RecurrentState::lstm(h, c), &x).unwrap();
            for v in f.iter().chain(&i).chain(&o) {
                prop_assert!((0.0..=1.0).contains(v));
            }
            for v in &g {
                prop_assert!((-1.0..=1.0).contains(v));
            }
        }
    }
}
