//! Autocorrelation diagnostics, AR(1) reference series, regression metrics
//! and linear interpolation of hourly predictions.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correlations at lags `0..=max_lag` with the white-noise 95% band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub ci_bound: f64,
}

impl AcfResult {
    /// Lags `>= 1` whose value lies outside `±ci_bound`.
    pub fn significant_lags(&self) -> Vec<usize> {
        self.lags.iter().zip(&self.values).filter(|(k, v)| **k > 0 && v.abs() > self.ci_bound).map(|(k, _)| *k).collect()
    }

    /// CSV with columns `lag,value,ci_bound`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lag", "value", "ci_bound"])?;
        for (k, v) in self.lags.iter().zip(&self.values) {
            w.write_record([k.to_string(), v.to_string(), self.ci_bound.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample autocovariance at lag `k`, normalised by `N` for every lag.
pub fn autocovariance(series: &[f64], k: usize) -> Result<f64> {
    let n = series.len();
    if k >= n {
        return Err(Error::Lag { lag: k, len: n });
    }
    let mu = mean(series);
    let s: f64 = series[..n - k].iter().zip(&series[k..]).map(|(a, b)| (a - mu) * (b - mu)).sum();
    Ok(s / n as f64)
}

fn check_series(series: &[f64], max_lag: usize) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::empty("at least two values are needed"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("series contains non-finite values"));
    }
    if max_lag >= series.len() {
        return Err(Error::Lag { lag: max_lag, len: series.len() });
    }
    Ok(())
}

pub fn white_noise_bound(n: usize) -> f64 {
    1.96 / (n as f64).sqrt()
}

pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    check_series(series, max_lag)?;
    let c0 = autocovariance(series, 0)?;
    if c0 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut values = Vec::with_capacity(max_lag + 1);
    values.push(1.0);
    for k in 1..=max_lag {
        values.push(autocovariance(series, k)? / c0);
    }
    Ok(AcfResult { lags: (0..=max_lag).collect(), values, ci_bound: white_noise_bound(series.len()) })
}

/// Partial autocorrelations from autocorrelations `rho[0..=K]` (with
/// `rho[0] == 1`) by the Durbin-Levinson recursion. Entry 0 is 1.
pub fn pacf_from_acf(rho: &[f64]) -> Result<Vec<f64>> {
    if rho.is_empty() {
        return Err(Error::empty("no autocorrelations given"));
    }
    let k_max = rho.len() - 1;
    let mut out = vec![1.0; k_max + 1];
    let mut phi = vec![0.0; k_max + 1];
    let mut prev = vec![0.0; k_max + 1];
    for k in 1..=k_max {
        let mut num = rho[k];
        let mut den = 1.0;
        for j in 1..k {
            num -= prev[j] * rho[k - j];
            den -= prev[j] * rho[j];
        }
        let pkk = if den.abs() < f64::EPSILON { 0.0 } else { num / den };
        phi[k] = pkk;
        for j in 1..k {
            phi[j] = prev[j] - pkk * prev[k - j];
        }
        out[k] = pkk;
        prev[..=k].copy_from_slice(&phi[..=k]);
    }
    Ok(out)
}

pub fn pacf(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    check_series(series, max_lag)?;
    if 2 * max_lag >= series.len() {
        return Err(Error::Lag { lag: max_lag, len: series.len() / 2 });
    }
    let r = acf(series, max_lag)?;
    Ok(AcfResult { values: pacf_from_acf(&r.values)?, ..r })
}

/// `z_t = beta z_{t-1} + eps_t` from `z_0 = 0` with standard normal
/// innovations; returns `z_1..z_n`.
pub fn ar1_simulate(beta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(beta.abs() < 1.0) {
        return Err(Error::Unstable(beta));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = 0.0;
    Ok((0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            z = beta * z + e;
            z
        })
        .collect())
}

/// Regression accuracy. `bias = mean(observed - predicted)`, so positive
/// bias means underprediction. `r2` is `None` for constant observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub bias: f64,
    pub r2: Option<f64>,
    pub n: usize,
}

pub fn metrics(observed: &[f64], predicted: &[f64]) -> Result<Metrics> {
    if observed.len() != predicted.len() {
        return Err(Error::shape(format!("{} observations vs {} predictions", observed.len(), predicted.len())));
    }
    let n = observed.len();
    if n == 0 {
        return Err(Error::empty("no observations"));
    }
    let nf = n as f64;
    let mse = observed.iter().zip(predicted).map(|(o, p)| (o - p) * (o - p)).sum::<f64>() / nf;
    let bias = observed.iter().zip(predicted).map(|(o, p)| o - p).sum::<f64>() / nf;
    let mu = mean(observed);
    let var = observed.iter().map(|o| (o - mu) * (o - mu)).sum::<f64>() / nf;
    let r2 = (var > 0.0).then(|| 1.0 - mse / var);
    Ok(Metrics { rmse: mse.sqrt(), bias, r2, n })
}

/// Metrics over the positions where `mask` is set.
pub fn masked_metrics(observed: &[f64], predicted: &[f64], mask: &[bool]) -> Result<Metrics> {
    if mask.len() != observed.len() {
        return Err(Error::shape("mask length differs from observations"));
    }
    let (o, p): (Vec<f64>, Vec<f64>) = observed
        .iter()
        .zip(predicted)
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|((o, p), _)| (*o, *p))
        .unzip();
    metrics(&o, &p)
}

/// Linear interpolation of predictions on an increasing time grid at the
/// query times. Queries outside the grid are rejected.
pub fn interpolate_predictions(pred_times: &[f64], preds: &[f64], query_times: &[f64]) -> Result<Vec<f64>> {
    if pred_times.len() != preds.len() {
        return Err(Error::shape("prediction times and values differ in length"));
    }
    if pred_times.is_empty() {
        return Err(Error::empty("no predictions to interpolate"));
    }
    if pred_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("prediction times must be strictly increasing"));
    }
    let (first, last) = (pred_times[0], pred_times[pred_times.len() - 1]);
    query_times
        .iter()
        .map(|&q| {
            if !(q >= first && q <= last) {
                return Err(Error::Extrapolation { query: q, first, last });
            }
            let k = pred_times.partition_point(|t| *t <= q);
            if k == 0 || pred_times[k - 1] == q {
                return Ok(preds[k.saturating_sub(1)]);
            }
            let (t0, t1) = (pred_times[k - 1], pred_times[k]);
            let w = (q - t0) / (t1 - t0);
            Ok(preds[k - 1] + w * (preds[k] - preds[k - 1]))
        })
        .collect()
}
