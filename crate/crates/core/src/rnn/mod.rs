//! Forward kernels for simple RNN and LSTM cells, dense layers and the
//! one-recurrent-layer network used throughout the crate.

mod activation;
mod cell;
mod matrix;
mod network;

pub use activation::{activation, logit, sigmoid, ActivationKind};
pub use cell::{lstm_gates, lstm_step, simple_rnn_step, Gate, LstmParams, RecurrentState, SimpleRnnParams};
pub use matrix::Matrix;
pub use network::{network_forward, param_count, DenseLayer, Network, RecurrentLayer};
