use crate::error::{Error, Result};
use crate::rnn::Matrix;

/// Hourly inputs with sparse, masked targets.
///
/// `t` holds integer epoch-hours and advances by exactly one per row. A row
/// with `mask[k] == false` has no observation; its `target` entry is NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSeries {
    pub t: Vec<i64>,
    pub features: Matrix,
    pub target: Vec<f64>,
    pub mask: Vec<bool>,
    pub feature_names: Vec<String>,
}

impl SparseSeries {
    /// Builds a series from optional targets. Features must be finite and
    /// `t` must step by one hour.
    pub fn new(t: Vec<i64>, features: Matrix, target: Vec<Option<f64>>) -> Result<Self> {
        let n = t.len();
        if features.rows() != n || target.len() != n {
            return Err(Error::shape(format!(
                "series has {n} times, {} feature rows and {} targets",
                features.rows(),
                target.len()
            )));
        }
        if let Some(k) = t.windows(2).position(|w| w[1] != w[0] + 1) {
            return Err(Error::domain(format!(
                "time index must advance by one hour; row {} has t={} after t={}",
                k + 1,
                t[k + 1],
                t[k]
            )));
        }
        if let Some(k) = (0..n).find(|&k| features.row(k).iter().any(|v| !v.is_finite())) {
            return Err(Error::domain(format!("feature row {k} is not finite")));
        }
        let mut mask = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for v in target {
            match v {
                Some(v) if v.is_finite() => {
                    mask.push(true);
                    values.push(v);
                }
                _ => {
                    mask.push(false);
                    values.push(f64::NAN);
                }
            }
        }
        let feature_names = (0..features.cols()).map(|k| format!("x{k}")).collect();
        Ok(Self { t, features, target: values, mask, feature_names })
    }

    /// Series starting at hour `t0`; NaN targets are treated as missing.
    pub fn from_dense(t0: i64, features: Matrix, target: &[f64]) -> Result<Self> {
        let t = (0..features.rows() as i64).map(|k| t0 + k).collect();
        let target = target.iter().map(|v| v.is_finite().then_some(*v)).collect();
        Self::new(t, features, target)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.features.cols() {
            return Err(Error::shape("feature name count does not match feature columns"));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Rows `start..start + len` as a new series.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::Index { index: start + len, len: self.len() });
        }
        Ok(Self {
            t: self.t[start..start + len].to_vec(),
            features: self.features.slice_rows(start, len),
            target: self.target[start..start + len].to_vec(),
            mask: self.mask[start..start + len].to_vec(),
            feature_names: self.feature_names.clone(),
        })
    }

    /// The whole series as a single sample.
    pub fn as_sample(&self) -> Sample {
        Sample { inputs: self.features.clone(), targets: self.target.clone(), mask: self.mask.clone() }
    }

    /// Observed `(row, target)` pairs.
    pub fn observations(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mask.iter().enumerate().filter(|(_, m)| **m).map(|(k, _)| (k, self.target[k]))
    }
}

/// One training window.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Matrix,
    pub targets: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Number of rolling windows before observation filtering,
/// `floor((n - window) / stride) + 1`.
pub fn window_count(n: usize, window: usize, stride: usize) -> usize {
    if window == 0 || stride == 0 || n < window {
        0
    } else {
        (n - window) / stride + 1
    }
}

/// Rolling windows at offsets `0, stride, 2 * stride, ...`.
///
/// Windows without any observed target are dropped unless `keep_unobserved`.
pub fn make_windows(series: &SparseSeries, window: usize, stride: usize, keep_unobserved: bool) -> Result<Vec<Sample>> {
    if window == 0 || stride == 0 {
        return Err(Error::domain("window and stride must be at least 1"));
    }
    if series.len() < window {
        return Err(Error::empty(format!(
            "series of {} rows is shorter than the {window}-step window",
            series.len()
        )));
    }
    let count = window_count(series.len(), window, stride);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * stride;
        let mask = series.mask[start..start + window].to_vec();
        if !keep_unobserved && !mask.iter().any(|m| *m) {
            continue;
        }
        out.push(Sample {
            inputs: series.features.slice_rows(start, window),
            targets: series.target[start..start + window].to_vec(),
            mask,
        });
    }
    Ok(out)
}

/// Mean squared error over observed positions only.
pub fn masked_mse(pred: &[f64], targets: &[f64], mask: &[bool]) -> Result<f64> {
    if pred.len() != targets.len() || pred.len() != mask.len() {
        return Err(Error::shape(format!(
            "{} predictions, {} targets, {} mask entries",
            pred.len(),
            targets.len(),
            mask.len()
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((p, y), m) in pred.iter().zip(targets).zip(mask) {
        if *m {
            sum += (p - y) * (p - y);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::empty("no observed targets to compute a loss"));
    }
    Ok(sum / n as f64)
}
