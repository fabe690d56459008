use std::ops::Range;

use super::activation::ActivationKind;
use super::cell::{LstmParams, RecurrentState, SimpleRnnParams};
use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RecurrentLayer {
    Simple(SimpleRnnParams),
    Lstm(LstmParams),
}

impl RecurrentLayer {
    pub fn units(&self) -> usize {
        match self {
            RecurrentLayer::Simple(p) => p.units(),
            RecurrentLayer::Lstm(p) => p.units(),
        }
    }

    pub fn features(&self) -> usize {
        match self {
            RecurrentLayer::Simple(p) => p.features(),
            RecurrentLayer::Lstm(p) => p.features(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            RecurrentLayer::Simple(p) => p.param_count(),
            RecurrentLayer::Lstm(p) => p.param_count(),
        }
    }

    pub fn zero_state(&self) -> RecurrentState {
        match self {
            RecurrentLayer::Simple(p) => RecurrentState::zeros_simple(p.units()),
            RecurrentLayer::Lstm(p) => RecurrentState::zeros_lstm(p.units()),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            RecurrentLayer::Simple(_) => "simple_rnn",
            RecurrentLayer::Lstm(_) => "lstm",
        }
    }

    pub fn as_lstm(&self) -> Option<&LstmParams> {
        match self {
            RecurrentLayer::Lstm(p) => Some(p),
            RecurrentLayer::Simple(_) => None,
        }
    }

    pub fn as_lstm_mut(&mut self) -> Option<&mut LstmParams> {
        match self {
            RecurrentLayer::Lstm(p) => Some(p),
            RecurrentLayer::Simple(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RecurrentLayer::Simple(p) => p.validate(),
            RecurrentLayer::Lstm(p) => p.validate(),
        }
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        match self {
            RecurrentLayer::Simple(p) => p.tensors(),
            RecurrentLayer::Lstm(p) => p.tensors(),
        }
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            RecurrentLayer::Simple(p) => p.tensors_mut(),
            RecurrentLayer::Lstm(p) => p.tensors_mut(),
        }
    }
}

/// Fully connected layer, `act(W x + b)` with `W` of shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: ActivationKind,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: ActivationKind) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(Error::shape(format!(
                "dense weights have {} rows but bias has {} entries",
                weights.rows(),
                bias.len()
            )));
        }
        if !weights.as_slice().iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::domain("dense parameters contain non-finite values"));
        }
        Ok(Self { weights, bias, activation })
    }

    pub fn zeros(inputs: usize, units: usize, activation: ActivationKind) -> Self {
        Self { weights: Matrix::zeros(units, inputs), bias: vec![0.0; units], activation }
    }

    /// Width-preserving linear layer that passes its input through.
    pub fn identity(width: usize) -> Self {
        let mut weights = Matrix::zeros(width, width);
        for k in 0..width {
            weights.set(k, k, 1.0);
        }
        Self { weights, bias: vec![0.0; width], activation: ActivationKind::Linear }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn units(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    pub(crate) fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        self.weights.mul_vec_add(input, out);
        for v in out.iter_mut() {
            *v = self.activation.apply(*v);
        }
    }
}

/// One recurrent layer followed by a stack of dense layers.
///
/// Layer 0 is the recurrent layer, layers `1..` are the dense layers in
/// order. Each layer carries a trainable flag used when fine-tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    recurrent: RecurrentLayer,
    dense: Vec<DenseLayer>,
    trainable: Vec<bool>,
}

impl Network {
    pub fn new(recurrent: RecurrentLayer, dense: Vec<DenseLayer>) -> Result<Self> {
        recurrent.validate()?;
        let mut width = recurrent.units();
        for (k, layer) in dense.iter().enumerate() {
            if layer.inputs() != width {
                return Err(Error::shape(format!(
                    "dense layer {k} expects {} inputs but receives {width}",
                    layer.inputs()
                )));
            }
            if layer.bias.len() != layer.units() {
                return Err(Error::shape(format!("dense layer {k} bias length mismatch")));
            }
            width = layer.units();
        }
        let trainable = vec![true; dense.len() + 1];
        Ok(Self { recurrent, dense, trainable })
    }

    pub fn recurrent(&self) -> &RecurrentLayer {
        &self.recurrent
    }

    pub fn recurrent_mut(&mut self) -> &mut RecurrentLayer {
        &mut self.recurrent
    }

    pub fn dense(&self) -> &[DenseLayer] {
        &self.dense
    }

    /// Mutable access to dense parameters. Shapes must not be changed.
    pub fn dense_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.dense
    }

    pub fn features(&self) -> usize {
        self.recurrent.features()
    }

    pub fn output_width(&self) -> usize {
        self.dense.last().map_or(self.recurrent.units(), DenseLayer::units)
    }

    pub fn layer_count(&self) -> usize {
        self.dense.len() + 1
    }

    pub fn trainable(&self) -> &[bool] {
        &self.trainable
    }

    pub fn set_trainable(&mut self, layer: usize, trainable: bool) -> Result<()> {
        let n = self.trainable.len();
        let flag = self
            .trainable
            .get_mut(layer)
            .ok_or_else(|| Error::shape(format!("layer {layer} does not exist ({n} layers)")))?;
        *flag = trainable;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.recurrent.param_count() + self.dense.iter().map(DenseLayer::param_count).sum::<usize>()
    }

    /// Parameter ranges of each layer inside [`Network::params_flat`].
    pub fn layer_param_ranges(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.layer_count());
        let mut start = 0;
        for n in std::iter::once(self.recurrent.param_count()).chain(self.dense.iter().map(DenseLayer::param_count)) {
            out.push(start..start + n);
            start += n;
        }
        out
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.recurrent.tensors();
        for d in &self.dense {
            out.push(d.weights.as_slice());
            out.push(&d.bias);
        }
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.recurrent.tensors_mut();
        for d in self.dense.iter_mut() {
            out.push(d.weights.as_mut_slice());
            out.push(&mut d.bias);
        }
        out
    }

    /// All parameters in canonical order: recurrent tensors (per gate
    /// `W_x, W_h, b` in `f, i, g, o` order for LSTMs), then each dense
    /// layer's weights and bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for t in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// A network of identical shape and activations with every parameter 0.
    pub fn zeroed(&self) -> Network {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn zero_state(&self) -> RecurrentState {
        self.recurrent.zero_state()
    }

    pub(crate) fn check_state(&self, state: &RecurrentState) -> Result<()> {
        let u = self.recurrent.units();
        let ok = state.h.len() == u
            && match (&self.recurrent, &state.c) {
                (RecurrentLayer::Lstm(_), Some(c)) => c.len() == u,
                (RecurrentLayer::Lstm(_), None) => false,
                (RecurrentLayer::Simple(_), _) => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::shape(format!("initial state does not match {u} {} units", self.recurrent.kind_name())))
        }
    }

    /// Sequence-to-sequence forward pass, one output row per input row.
    ///
    /// The recurrent state starts from `init` (zeros when `None`) and threads
    /// through every step; only the hidden state feeds the dense stack.
    pub fn forward(&self, inputs: &Matrix, init: Option<&RecurrentState>) -> Result<Matrix> {
        let steps = inputs.rows();
        let out_w = self.output_width();
        if steps == 0 {
            return Ok(Matrix::zeros(0, out_w));
        }
        if inputs.cols() != self.features() {
            return Err(Error::shape(format!(
                "network expects {} features, input has {}",
                self.features(),
                inputs.cols()
            )));
        }
        let state = match init {
            Some(s) => {
                self.check_state(s)?;
                s.clone()
            }
            None => self.zero_state(),
        };

        let u = self.recurrent.units();
        let mut h = state.h;
        let mut c = state.c.unwrap_or_else(|| vec![0.0; u]);
        let mut h_next = vec![0.0; u];
        let mut c_next = vec![0.0; u];
        let mut gates = vec![0.0; 4 * u];
        let widest = self.dense.iter().map(DenseLayer::units).max().unwrap_or(0).max(u);
        let mut buf_a = vec![0.0; widest];
        let mut buf_b = vec![0.0; widest];
        let mut out = Matrix::zeros(steps, out_w);

        for t in 0..steps {
            let x = inputs.row(t);
            match &self.recurrent {
                RecurrentLayer::Simple(p) => p.step_into(&h, x, &mut h_next),
                RecurrentLayer::Lstm(p) => p.step_into(&h, &c, x, &mut gates, &mut c_next, &mut h_next),
            }
            std::mem::swap(&mut h, &mut h_next);
            std::mem::swap(&mut c, &mut c_next);

            if self.dense.is_empty() {
                out.row_mut(t).copy_from_slice(&h);
                continue;
            }
            buf_a[..u].copy_from_slice(&h);
            let mut width = u;
            for layer in &self.dense {
                let n = layer.units();
                layer.forward_into(&buf_a[..width], &mut buf_b[..n]);
                std::mem::swap(&mut buf_a, &mut buf_b);
                width = n;
            }
            out.row_mut(t).copy_from_slice(&buf_a[..width]);
        }
        Ok(out)
    }

    /// First output column of [`Network::forward`], for scalar regression heads.
    pub fn predict(&self, inputs: &Matrix, init: Option<&RecurrentState>) -> Result<Vec<f64>> {
        let out = self.forward(inputs, init)?;
        Ok((0..out.rows()).map(|t| out.get(t, 0)).collect())
    }
}

pub fn network_forward(net: &Network, xs: &Matrix, init: Option<&RecurrentState>) -> Result<Matrix> {
    net.forward(xs, init)
}

pub fn param_count(net: &Network) -> usize {
    net.param_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::cell::{lstm_step, Gate};

    fn lstm_net(features: usize, units: usize, dense: &[(usize, ActivationKind)]) -> Network {
        let rec = RecurrentLayer::Lstm(LstmParams::zeros(features, units, ActivationKind::Tanh, ActivationKind::Tanh));
        let mut layers = Vec::new();
        let mut w = units;
        for &(n, act) in dense {
            layers.push(DenseLayer::zeros(w, n, act));
            w = n;
        }
        Network::new(rec, layers).unwrap()
    }

    #[test]
    fn parameter_accounting() {
        let reference = lstm_net(
            10,
            64,
            &[(32, ActivationKind::Relu), (16, ActivationKind::Relu), (1, ActivationKind::Linear)],
        );
        assert_eq!(param_count(&reference), 21_825);

        let simple = Network::new(RecurrentLayer::Simple(SimpleRnnParams::zeros(1, 1, ActivationKind::Linear)), vec![]).unwrap();
        assert_eq!(param_count(&simple), 3);
        assert_eq!(param_count(&lstm_net(1, 1, &[])), 12);

        let ranges = reference.layer_param_ranges();
        assert_eq!(ranges.len(), 4);
        assert_eq!(ranges[0], 0..19_200);
        assert_eq!(ranges[3].end, 21_825);
    }

    #[test]
    fn chained_dimensions_are_checked() {
        let rec = RecurrentLayer::Lstm(LstmParams::zeros(2, 4, ActivationKind::Tanh, ActivationKind::Tanh));
        let bad = Network::new(rec, vec![DenseLayer::zeros(3, 1, ActivationKind::Linear)]);
        assert!(matches!(bad, Err(Error::Shape(_))));
    }

    #[test]
    fn forward_shapes_and_empty_input() {
        let net = lstm_net(
            10,
            64,
            &[(32, ActivationKind::Relu), (16, ActivationKind::Relu), (1, ActivationKind::Linear)],
        );
        let xs = Matrix::from_vec(48, 10, (0..480).map(|k| (k as f64 * 0.37).sin()).collect()).unwrap();
        let out = net.forward(&xs, None).unwrap();
        assert_eq!((out.rows(), out.cols()), (48, 1));
        assert_eq!(net.forward(&Matrix::zeros(0, 10), None).unwrap().rows(), 0);
        assert!(matches!(net.forward(&Matrix::zeros(3, 9), None), Err(Error::Shape(_))));
        let bad_state = RecurrentState::zeros_simple(64);
        assert!(net.forward(&xs, Some(&bad_state)).is_err());
    }

    #[test]
    fn single_step_matches_cell_and_dense() {
        let mut lstm = LstmParams::zeros(2, 3, ActivationKind::Tanh, ActivationKind::Tanh);
        let mut v = 0.1;
        for t in lstm.tensors_mut() {
            for x in t.iter_mut() {
                *x = (v as f64).sin();
                v += 0.7;
            }
        }
        let dense = DenseLayer::new(
            Matrix::from_rows(&[vec![0.5, -1.0, 2.0]]).unwrap(),
            vec![0.25],
            ActivationKind::Linear,
        )
        .unwrap();
        let net = Network::new(RecurrentLayer::Lstm(lstm.clone()), vec![dense]).unwrap();
        let x = [0.3, -1.2];
        let out = net.predict(&Matrix::from_rows(&[x.to_vec()]).unwrap(), None).unwrap();
        let s = lstm_step(&lstm, &RecurrentState::zeros_lstm(3), &x).unwrap();
        let manual = 0.25 + 0.5 * s.h[0] - s.h[1] + 2.0 * s.h[2];
        assert_eq!(out[0], manual);
        assert_eq!(lstm.bias(Gate::Forget).len(), 3);
    }

    #[test]
    fn flat_params_round_trip() {
        let mut net = lstm_net(3, 2, &[(4, ActivationKind::Relu), (1, ActivationKind::Linear)]);
        let values: Vec<f64> = (0..net.param_count()).map(|k| k as f64 * 0.01).collect();
        net.set_params_flat(&values).unwrap();
        assert_eq!(net.params_flat(), values);
        assert!(net.set_params_flat(&values[1..]).is_err());
        assert!(net.zeroed().params_flat().iter().all(|v| *v == 0.0));
    }
}
