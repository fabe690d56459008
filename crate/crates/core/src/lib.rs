//! Time-lag dynamical systems, recurrent kernels and gate-bias time-warping.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynsys`]: exact time-lag systems, Newton cooling and warping of the
//!   retention coefficient.
//! * [`rnn`]: simple RNN and LSTM cells, dense layers and the network type.
//! * [`constructions`]: weight settings under which recurrent cells reproduce
//!   (or approximate within a bound) a time-lag system and its warps.
//! * [`timewarp`]: additive forget/input bias shifts and the grid-search
//!   transfer procedures built on them.
//! * [`training`]: windowing, masked loss, BPTT gradients and early-stopped
//!   training with layer freezing.
//! * [`diagnostics`]: ACF/PACF, AR(1) reference, regression metrics and
//!   prediction interpolation.
//! * [`fmc`]: fuel-moisture equilibria, fuel-class coefficients and the
//!   ODE forecast model.
//! * [`io`] and [`cli`]: file formats and the command implementations behind
//!   the `timewarp` binary.

pub mod cli;
pub mod benchmark;
pub mod constructions;
pub mod diagnostics;
pub mod dynsys;
pub mod error;
pub mod fmc;
pub mod io;
pub mod rnn;
pub mod timewarp;
pub mod training;

pub use error::{Error, Result};
