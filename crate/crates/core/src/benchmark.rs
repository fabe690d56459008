//! Synthetic multi-timescale transfer benchmark.
//!
//! Ground truth for every fuel class is its time-lag response to the hourly
//! mean equilibrium moisture of synthetic weather. A small LSTM is trained on
//! the source class with dense hourly targets, then transferred to each other
//! class by bias-shift grid search on sparse targets (two observations a
//! day) and scored on a later, held-out period.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmc::{equilibria, synthetic_weather, timelag_fmc, FuelClass};
use crate::rnn::Matrix;
use crate::timewarp::{apply_bias_shift, expected_shift_signs, forecast_metrics, grid_search_timewarp, WarpGrid, WarpShift};
use crate::training::{init_network, train, Architecture, SparseSeries, TrainingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub source_t_lag: f64,
    pub target_t_lags: Vec<f64>,
    pub units: usize,
    pub source_train_hours: usize,
    pub source_val_hours: usize,
    /// unobserved hours run before the search period of every target class
    pub spinup_hours: usize,
    pub search_hours: usize,
    pub test_hours: usize,
    /// hours of day with an observed target in the transfer period
    pub observed_hours: Vec<usize>,
    pub grid_points: usize,
    pub grid_radius: f64,
    pub train: TrainingConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            source_t_lag: 10.0,
            target_t_lags: vec![1.0, 100.0, 1000.0],
            units: 4,
            source_train_hours: 24 * 30,
            source_val_hours: 24 * 10,
            spinup_hours: 24 * 30,
            search_hours: 24 * 20,
            test_hours: 24 * 20,
            observed_hours: vec![13, 22],
            grid_points: 25,
            grid_radius: 5.0,
            train: TrainingConfig {
                window: 96,
                stride: 24,
                batch_size: 4,
                epochs: 100,
                patience: 10,
                learning_rate: 0.01,
                ..TrainingConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassOutcome {
    pub t_lag: f64,
    pub gamma: f64,
    pub shift: WarpShift,
    pub unwarped_test_rmse: f64,
    pub warped_test_rmse: f64,
    pub forget_sign_matches: bool,
    pub input_sign_matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub seed: u64,
    pub source_val_rmse: f64,
    pub classes: Vec<ClassOutcome>,
}

/// Per-class aggregate over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub t_lag: f64,
    pub replications: usize,
    pub mean_unwarped_rmse: f64,
    pub mean_warped_rmse: f64,
    pub forget_sign_matches: usize,
    pub input_sign_matches: usize,
}

/// Standardisation shared by features and targets. An affine map with unit
/// weight sum commutes with every time-lag recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine {
    mean: f64,
    sd: f64,
}

impl Affine {
    fn fit(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { mean, sd: sd.max(1e-12) }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| (x - self.mean) / self.sd).collect()
    }
}

/// Hourly mean of drying and wetting equilibria.
pub fn mean_equilibrium(hours: usize, seed: u64) -> Result<Vec<f64>> {
    synthetic_weather(hours, seed)
        .iter()
        .map(|w| equilibria(w.temp_c, w.rh).map(|(d, e)| 0.5 * (d + e)))
        .collect()
}

/// Time-lag response started from the period's mean equilibrium, the
/// state a long spin-up settles around.
fn truth(eq: &[f64], fc: FuelClass) -> Result<Vec<f64>> {
    let m0 = eq.iter().sum::<f64>() / eq.len() as f64;
    Ok(timelag_fmc(m0, eq, fc)?.steps().to_vec())
}

fn series(eq: &[f64], target: &[f64], observed: impl Fn(usize) -> bool) -> Result<SparseSeries> {
    let t = (0..eq.len() as i64).collect();
    let target = target.iter().enumerate().map(|(k, v)| observed(k).then_some(*v)).collect();
    SparseSeries::new(t, Matrix::column(eq), target)
}

fn sign_matches(value: f64, expected: f64) -> bool {
    value != 0.0 && value.signum() == expected
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.units == 0 || self.grid_points == 0 || self.observed_hours.is_empty() {
            return Err(Error::Config("units, grid_points and observed_hours must be non-empty".into()));
        }
        if self.search_hours == 0 || self.test_hours == 0 || self.source_train_hours == 0 || self.source_val_hours == 0 {
            return Err(Error::Config("every period needs at least one hour".into()));
        }
        if self.target_t_lags.contains(&self.source_t_lag) {
            return Err(Error::Config("target classes must differ from the source class".into()));
        }
        self.train.validate()
    }

    /// One replication: source weights, weather and grid search all follow
    /// from `seed`.
    pub fn run_replication(&self, seed: u64) -> Result<ReplicationOutcome> {
        self.validate()?;
        let source = FuelClass::new(self.source_t_lag)?;
        let src_eq = mean_equilibrium(self.source_train_hours + self.source_val_hours, seed.wrapping_mul(2))?;
        let norm = Affine::fit(&src_eq[..self.source_train_hours]);
        let src_x = norm.apply(&src_eq);
        let src_y = truth(&src_x, source)?;
        let src = series(&src_x, &src_y, |_| true)?;
        let src_train = src.slice(0, self.source_train_hours)?;
        let src_val = src.slice(self.source_train_hours, self.source_val_hours)?;

        let arch = Architecture::lstm_regressor(1, self.units);
        let mut cfg = self.train.clone();
        cfg.seed = seed;
        let (net, history) = train(&init_network(&arch, seed)?, &src_train, &src_val, &cfg)?;

        let observed_from = self.spinup_hours;
        let test_from = observed_from + self.search_hours;
        let tgt_eq = mean_equilibrium(test_from + self.test_hours, seed.wrapping_mul(2) + 1)?;
        let tgt_x = norm.apply(&tgt_eq);
        let grid = WarpGrid::uniform(-self.grid_radius, self.grid_radius, self.grid_points)?;
        let mut classes = Vec::with_capacity(self.target_t_lags.len());
        for &t_lag in &self.target_t_lags {
            let fc = FuelClass::new(t_lag)?;
            let gamma = self.source_t_lag / t_lag;
            let y = truth(&tgt_x, fc)?;
            let full = series(&tgt_x, &y, |k| k >= observed_from && self.observed_hours.contains(&(k % 24)))?;
            let search = full.slice(0, test_from)?;
            let r = grid_search_timewarp(&net, &search, &grid)?;
            let warped = apply_bias_shift(&net, r.best_shift)?;
            let (ef, ei) = expected_shift_signs(gamma)?;
            classes.push(ClassOutcome {
                t_lag,
                gamma,
                shift: r.best_shift,
                unwarped_test_rmse: forecast_metrics(&net, &full, test_from, None)?.rmse,
                warped_test_rmse: forecast_metrics(&warped, &full, test_from, None)?.rmse,
                forget_sign_matches: sign_matches(r.best_shift.alpha_f, ef),
                input_sign_matches: sign_matches(r.best_shift.alpha_i, ei),
            });
        }
        Ok(ReplicationOutcome { seed, source_val_rmse: history.best_val_loss.sqrt(), classes })
    }
}

/// Aggregates replications class by class, in the order of the first one.
pub fn summarize(reps: &[ReplicationOutcome]) -> Vec<ClassSummary> {
    let Some(first) = reps.first() else { return Vec::new() };
    first
        .classes
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let rows: Vec<&ClassOutcome> = reps.iter().filter_map(|r| r.classes.get(j)).collect();
            let n = rows.len() as f64;
            ClassSummary {
                t_lag: c.t_lag,
                replications: rows.len(),
                mean_unwarped_rmse: rows.iter().map(|c| c.unwarped_test_rmse).sum::<f64>() / n,
                mean_warped_rmse: rows.iter().map(|c| c.warped_test_rmse).sum::<f64>() / n,
                forget_sign_matches: rows.iter().filter(|c| c.forget_sign_matches).count(),
                input_sign_matches: rows.iter().filter(|c| c.input_sign_matches).count(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardisation_commutes_with_time_lag() {
        let eq = mean_equilibrium(200, 3).unwrap();
        let norm = Affine::fit(&eq);
        let a = truth(&norm.apply(&eq), FuelClass::FM10).unwrap();
        let b = norm.apply(&truth(&eq, FuelClass::FM10).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn small_replication_runs() {
        let cfg = BenchmarkConfig {
            source_train_hours: 96,
            source_val_hours: 48,
            spinup_hours: 24,
            search_hours: 96,
            test_hours: 48,
            grid_points: 3,
            train: TrainingConfig { window: 96, stride: 96, batch_size: 1, epochs: 3, ..TrainingConfig::default() },
            ..BenchmarkConfig::default()
        };
        let r = cfg.run_replication(1).unwrap();
        assert_eq!(r.classes.len(), 3);
        assert_eq!(r, cfg.run_replication(1).unwrap());
        let s = summarize(&[r.clone(), r]);
        assert_eq!(s[0].replications, 2);
        assert!(BenchmarkConfig { target_t_lags: vec![10.0], ..cfg }.validate().is_err());
    }
}
