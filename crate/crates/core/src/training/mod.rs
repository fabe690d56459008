//! Windowing, masked loss, BPTT and early-stopped training.

mod bptt;
mod init;
mod series;
mod trainer;

pub use bptt::{bptt_gradients, Gradients};
pub use init::{init_network, Architecture, DenseSpec, RecurrentKind};
pub use series::{make_windows, masked_mse, window_count, Sample, SparseSeries};
pub use trainer::{
    batch_gradients, series_loss, train, train_samples, EpochRecord, FreezeSpec, Optimizer, TrainingConfig,
    TrainingHistory,
};
