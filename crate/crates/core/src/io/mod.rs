//! File formats: weights JSON, series and weather CSV, TOML experiment
//! configuration and run manifests.

mod config;
mod manifest;
mod table;
mod weights;

pub use config::{DataConfig, DiagnoseConfig, ExperimentConfig, FmcConfig, GridConfig, NewtonConfig};
pub use manifest::{write_json, Manifest, MANIFEST_FILE};
pub use table::{read_columns, read_sparse_series, read_weather, write_columns, write_sparse_series, write_weather};
pub use weights::{load_weights, save_weights, LayerSpec, LayerWeights, NamedTensor, TensorData, WeightsFile, WEIGHTS_FORMAT_VERSION};
