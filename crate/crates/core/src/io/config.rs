use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmc::FmcOdeHyper;
use crate::timewarp::WarpGrid;
use crate::training::{Architecture, TrainingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub t0: f64,
    pub ambient: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub k_count: usize,
    pub steps: usize,
    pub epsilon: f64,
    pub bound: f64,
    /// rate the LSTM is built for before warping
    pub source_k: f64,
    /// Output-gate bias; raised to `logit(1 - epsilon / bound) + 1` when it
    /// does not exceed that threshold. `None` always uses the raised value.
    pub output_bias: Option<f64>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            t0: 50.0,
            ambient: 20.0,
            k_min: 0.05,
            k_max: 0.5,
            k_count: 10,
            steps: 50,
            epsilon: 0.003,
            bound: 50.0,
            source_k: 0.5,
            output_bias: Some(10.0),
        }
    }
}

impl NewtonConfig {
    pub fn k_values(&self) -> Vec<f64> {
        if self.k_count == 1 {
            return vec![self.k_min];
        }
        (0..self.k_count)
            .map(|j| self.k_min + (self.k_max - self.k_min) * j as f64 / (self.k_count - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_count == 0 || self.steps == 0 {
            return Err(Error::Config("k_count and steps must be positive".into()));
        }
        if !(self.k_min > 0.0 && self.k_max >= self.k_min && self.source_k > 0.0) {
            return Err(Error::Config("cooling rates must be positive with k_min <= k_max".into()));
        }
        if !(self.epsilon > 0.0 && self.bound > self.epsilon) {
            return Err(Error::Config("need 0 < epsilon < bound".into()));
        }
        let m = self.t0.abs().max(self.ambient.abs());
        if m > self.bound {
            return Err(Error::Config(format!("temperatures exceed the state bound {}", self.bound)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub replications: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { min: -5.0, max: 5.0, points: 25, replications: 1 }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Result<WarpGrid> {
        WarpGrid::uniform(self.min, self.max, self.points)
    }
}

/// Column layout of series CSV files and the split of one file into train,
/// validation and test rows (validation and test may be empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub time_column: String,
    pub features: Vec<String>,
    pub target: String,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            time_column: "t".into(),
            features: vec!["x".into()],
            target: "y".into(),
            train_fraction: 0.5,
            val_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub acf_lags: usize,
    pub pacf_lags: usize,
    pub column: String,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self { acf_lags: 50, pacf_lags: 30, column: "value".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FmcConfig {
    pub t_lag: f64,
    pub m0: f64,
    pub hours: usize,
    pub hyper: FmcOdeHyper,
}

impl Default for FmcConfig {
    fn default() -> Self {
        Self { t_lag: 10.0, m0: 15.0, hours: 24 * 30, hyper: FmcOdeHyper::default() }
    }
}

/// All command blocks; each section is optional in the TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub newton: NewtonConfig,
    pub grid: GridConfig,
    pub data: DataConfig,
    pub train: TrainingConfig,
    pub architecture: Architecture,
    pub diagnose: DiagnoseConfig,
    pub fmc: FmcConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            grid: GridConfig::default(),
            data: DataConfig::default(),
            train: TrainingConfig::default(),
            architecture: Architecture::fmc_reference(),
            diagnose: DiagnoseConfig::default(),
            fmc: FmcConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
