use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnn::{ActivationKind, DenseLayer, Gate, LstmParams, Matrix, Network, RecurrentLayer, SimpleRnnParams};

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    SimpleRnn { features: usize, units: usize, activation: ActivationKind },
    Lstm { features: usize, units: usize, candidate_activation: ActivationKind, cell_output_activation: ActivationKind },
    Dense { inputs: usize, units: usize, activation: ActivationKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorData {
    Matrix(Vec<Vec<f64>>),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub values: TensorData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub trainable: bool,
    pub tensors: Vec<NamedTensor>,
}

/// On-disk network description: architecture, trainable flags and named
/// tensors. Matrices are stored row by row; LSTM tensors are named
/// `W_x{g}`, `W_h{g}`, `b_{g}` for gates `g` in `f, i, g, o` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub format_version: u32,
    pub architecture: Vec<LayerSpec>,
    pub layers: Vec<LayerWeights>,
}

fn mat(name: String, m: &Matrix) -> NamedTensor {
    NamedTensor { name, values: TensorData::Matrix(m.to_rows()) }
}

fn vector(name: String, v: &[f64]) -> NamedTensor {
    NamedTensor { name, values: TensorData::Vector(v.to_vec()) }
}

impl WeightsFile {
    pub fn from_network(net: &Network) -> Self {
        let mut architecture = Vec::with_capacity(net.layer_count());
        let mut layers = Vec::with_capacity(net.layer_count());
        let flags = net.trainable();
        match net.recurrent() {
            RecurrentLayer::Simple(p) => {
                architecture.push(LayerSpec::SimpleRnn { features: p.features(), units: p.units(), activation: p.activation });
                layers.push(LayerWeights {
                    trainable: flags[0],
                    tensors: vec![mat("W_x".into(), &p.w_x), mat("W_h".into(), &p.w_h), vector("b".into(), &p.b)],
                });
            }
            RecurrentLayer::Lstm(p) => {
                architecture.push(LayerSpec::Lstm {
                    features: p.features(),
                    units: p.units(),
                    candidate_activation: p.candidate_activation,
                    cell_output_activation: p.cell_output_activation,
                });
                let mut tensors = Vec::with_capacity(12);
                for g in Gate::ALL {
                    let k = g as usize;
                    tensors.push(mat(format!("W_x{}", g.suffix()), &p.w_x[k]));
                    tensors.push(mat(format!("W_h{}", g.suffix()), &p.w_h[k]));
                    tensors.push(vector(format!("b_{}", g.suffix()), &p.b[k]));
                }
                layers.push(LayerWeights { trainable: flags[0], tensors });
            }
        }
        for (l, d) in net.dense().iter().enumerate() {
            architecture.push(LayerSpec::Dense { inputs: d.inputs(), units: d.units(), activation: d.activation });
            layers.push(LayerWeights {
                trainable: flags[l + 1],
                tensors: vec![mat("W".into(), &d.weights), vector("b".into(), &d.bias)],
            });
        }
        Self { format_version: WEIGHTS_FORMAT_VERSION, architecture, layers }
    }

    pub fn to_network(&self) -> Result<Network> {
        if self.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(Error::Load(format!(
                "format version {} is not supported (expected {WEIGHTS_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.architecture.len() != self.layers.len() || self.architecture.is_empty() {
            return Err(Error::Load("architecture and layer lists differ in length".into()));
        }
        let recurrent = match &self.architecture[0] {
            LayerSpec::SimpleRnn { features, units, activation } => {
                let mut t = Tensors::new(&self.layers[0]);
                RecurrentLayer::Simple(SimpleRnnParams::new(
                    t.matrix("W_x", *units, *features)?,
                    t.matrix("W_h", *units, *units)?,
                    t.vector("b", *units)?,
                    *activation,
                )?)
            }
            LayerSpec::Lstm { features, units, candidate_activation, cell_output_activation } => {
                let mut t = Tensors::new(&self.layers[0]);
                let mut p = LstmParams::zeros(*features, *units, *candidate_activation, *cell_output_activation);
                for g in Gate::ALL {
                    let k = g as usize;
                    p.w_x[k] = t.matrix(&format!("W_x{}", g.suffix()), *units, *features)?;
                    p.w_h[k] = t.matrix(&format!("W_h{}", g.suffix()), *units, *units)?;
                    p.b[k] = t.vector(&format!("b_{}", g.suffix()), *units)?;
                }
                p.validate()?;
                RecurrentLayer::Lstm(p)
            }
            LayerSpec::Dense { .. } => return Err(Error::Load("first layer must be recurrent".into())),
        };
        let mut dense = Vec::with_capacity(self.architecture.len() - 1);
        for (spec, lw) in self.architecture[1..].iter().zip(&self.layers[1..]) {
            match spec {
                LayerSpec::Dense { inputs, units, activation } => {
                    let mut t = Tensors::new(lw);
                    dense.push(DenseLayer::new(t.matrix("W", *units, *inputs)?, t.vector("b", *units)?, *activation)?);
                }
                _ => return Err(Error::Load("only the first layer may be recurrent".into())),
            }
        }
        let mut net = Network::new(recurrent, dense)?;
        for (l, lw) in self.layers.iter().enumerate() {
            net.set_trainable(l, lw.trainable)?;
        }
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

struct Tensors<'a> {
    layer: &'a LayerWeights,
}

impl<'a> Tensors<'a> {
    fn new(layer: &'a LayerWeights) -> Self {
        Self { layer }
    }

    fn find(&self, name: &str) -> Result<&'a TensorData> {
        self.layer
            .tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.values)
            .ok_or_else(|| Error::Load(format!("missing tensor {name}")))
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let data = match self.find(name)? {
            TensorData::Matrix(m) => m,
            TensorData::Vector(_) => return Err(Error::shape(format!("tensor {name} should be a matrix"))),
        };
        if data.len() != rows || data.iter().any(|r| r.len() != cols) {
            return Err(Error::shape(format!("tensor {name} should be {rows}x{cols}")));
        }
        Matrix::from_rows(data)
    }

    fn vector(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        match self.find(name)? {
            TensorData::Vector(v) if v.len() == len => Ok(v.clone()),
            _ => Err(Error::shape(format!("tensor {name} should be a vector of length {len}"))),
        }
    }
}

pub fn save_weights(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, WeightsFile::from_network(net).to_json()?)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path)?;
    let file: WeightsFile = serde_json::from_str(&text).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
    file.to_network()
}
