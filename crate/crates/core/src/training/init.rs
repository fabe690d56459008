use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnn::{ActivationKind, DenseLayer, Gate, LstmParams, Matrix, Network, RecurrentLayer, SimpleRnnParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrentKind {
    SimpleRnn,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub units: usize,
    pub activation: ActivationKind,
}

/// Layer sizes and activations of a recurrent network.
///
/// `activation` is the simple-RNN activation, or the LSTM candidate and
/// cell-output activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub features: usize,
    pub recurrent: RecurrentKind,
    pub units: usize,
    #[serde(default = "default_activation")]
    pub activation: ActivationKind,
    #[serde(default)]
    pub dense: Vec<DenseSpec>,
}

fn default_activation() -> ActivationKind {
    ActivationKind::Tanh
}

impl Architecture {
    /// 10 inputs, LSTM(64), dense 32 and 16 with ReLU, linear scalar head.
    pub fn fmc_reference() -> Self {
        Self {
            features: 10,
            recurrent: RecurrentKind::Lstm,
            units: 64,
            activation: ActivationKind::Tanh,
            dense: vec![
                DenseSpec { units: 32, activation: ActivationKind::Relu },
                DenseSpec { units: 16, activation: ActivationKind::Relu },
                DenseSpec { units: 1, activation: ActivationKind::Linear },
            ],
        }
    }

    /// LSTM followed by a single linear output unit.
    pub fn lstm_regressor(features: usize, units: usize) -> Self {
        Self {
            features,
            recurrent: RecurrentKind::Lstm,
            units,
            activation: ActivationKind::Tanh,
            dense: vec![DenseSpec { units: 1, activation: ActivationKind::Linear }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.units == 0 || self.dense.iter().any(|d| d.units == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Network with every parameter zero.
    pub fn zeros(&self) -> Result<Network> {
        self.validate()?;
        let rec = match self.recurrent {
            RecurrentKind::SimpleRnn => RecurrentLayer::Simple(SimpleRnnParams::zeros(self.features, self.units, self.activation)),
            RecurrentKind::Lstm => {
                RecurrentLayer::Lstm(LstmParams::zeros(self.features, self.units, self.activation, self.activation))
            }
        };
        let mut width = self.units;
        let mut dense = Vec::with_capacity(self.dense.len());
        for d in &self.dense {
            dense.push(DenseLayer::zeros(width, d.units, d.activation));
            width = d.units;
        }
        Network::new(rec, dense)
    }
}

fn glorot(rng: &mut ChaCha8Rng, m: &mut Matrix, fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in m.as_mut_slice() {
        *v = rng.random_range(-limit..limit);
    }
}

/// Seeded Glorot-uniform initialisation with zero biases and LSTM forget
/// biases set to 1.
pub fn init_network(arch: &Architecture, seed: u64) -> Result<Network> {
    let mut net = arch.zeros()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (f, u) = (arch.features, arch.units);
    match net.recurrent_mut() {
        RecurrentLayer::Simple(p) => {
            glorot(&mut rng, &mut p.w_x, f, u);
            glorot(&mut rng, &mut p.w_h, u, u);
        }
        RecurrentLayer::Lstm(p) => {
            for g in 0..4 {
                glorot(&mut rng, &mut p.w_x[g], f, 4 * u);
                glorot(&mut rng, &mut p.w_h[g], u, 4 * u);
            }
            p.bias_mut(Gate::Forget).fill(1.0);
        }
    }
    for d in net.dense_mut() {
        let (fan_in, fan_out) = (d.inputs(), d.units());
        glorot(&mut rng, &mut d.weights, fan_in, fan_out);
    }
    Ok(net)
}
