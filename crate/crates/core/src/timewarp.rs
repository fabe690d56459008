//! Additive forget/input gate bias shifts and the grid-search transfer
//! procedures built on them.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{masked_metrics, Metrics};
use crate::error::{Error, Result};
use crate::rnn::{Gate, Network, RecurrentState};
use crate::training::{series_loss, train, SparseSeries, TrainingConfig, TrainingHistory};

/// One scalar shift per gate, applied to every unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpShift {
    pub alpha_f: f64,
    pub alpha_i: f64,
}

impl WarpShift {
    pub const ZERO: WarpShift = WarpShift { alpha_f: 0.0, alpha_i: 0.0 };

    pub fn new(alpha_f: f64, alpha_i: f64) -> Result<Self> {
        if !(alpha_f.is_finite() && alpha_i.is_finite()) {
            return Err(Error::domain("bias shifts must be finite"));
        }
        Ok(Self { alpha_f, alpha_i })
    }

    pub fn negated(self) -> Self {
        Self { alpha_f: -self.alpha_f, alpha_i: -self.alpha_i }
    }

    fn magnitude(&self) -> f64 {
        self.alpha_f.abs() + self.alpha_i.abs()
    }
}

/// Candidate values for each shift axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpGrid {
    pub f_values: Vec<f64>,
    pub i_values: Vec<f64>,
}

impl Default for WarpGrid {
    fn default() -> Self {
        Self::uniform(-5.0, 5.0, 25).expect("default grid is valid")
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

impl WarpGrid {
    pub fn new(f_values: Vec<f64>, i_values: Vec<f64>) -> Result<Self> {
        if f_values.is_empty() || i_values.is_empty() {
            return Err(Error::Config("warp grid axes must be non-empty".into()));
        }
        if f_values.iter().chain(&i_values).any(|v| !v.is_finite()) {
            return Err(Error::Config("warp grid values must be finite".into()));
        }
        Ok(Self { f_values, i_values })
    }

    /// `n` evenly spaced values on `[lo, hi]` for both axes.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo <= hi) {
            return Err(Error::Config(format!("cannot build a grid of {n} points on [{lo}, {hi}]")));
        }
        let v = linspace(lo, hi, n);
        Self::new(v.clone(), v)
    }

    /// The single cell `(0, 0)`.
    pub fn zero() -> Self {
        Self { f_values: vec![0.0], i_values: vec![0.0] }
    }

    pub fn len(&self) -> usize {
        self.f_values.len() * self.i_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in row-major order over `(alpha_f, alpha_i)`.
    pub fn cells(&self) -> Vec<WarpShift> {
        self.f_values
            .iter()
            .flat_map(|&f| self.i_values.iter().map(move |&i| WarpShift { alpha_f: f, alpha_i: i }))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha_f: f64,
    pub alpha_i: f64,
    pub rmse: f64,
}

impl GridCell {
    pub fn shift(&self) -> WarpShift {
        WarpShift { alpha_f: self.alpha_f, alpha_i: self.alpha_i }
    }
}

/// Total order used for selection: lower RMSE (NaN last), then smaller
/// `|alpha_f| + |alpha_i|`, then smaller `alpha_f`, then smaller `alpha_i`.
pub fn compare_cells(a: &GridCell, b: &GridCell) -> Ordering {
    let key = |c: &GridCell| if c.rmse.is_nan() { f64::INFINITY } else { c.rmse };
    key(a)
        .total_cmp(&key(b))
        .then(a.shift().magnitude().total_cmp(&b.shift().magnitude()))
        .then(a.alpha_f.total_cmp(&b.alpha_f))
        .then(a.alpha_i.total_cmp(&b.alpha_i))
}

fn best_cell(table: &[GridCell]) -> GridCell {
    *table.iter().min_by(|a, b| compare_cells(a, b)).expect("grid is non-empty")
}

fn write_table<W: Write>(table: &[GridCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha_f", "alpha_i", "rmse"])?;
    for c in table {
        w.write_record([c.alpha_f.to_string(), c.alpha_i.to_string(), c.rmse.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of the grid search without fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_shift: WarpShift,
    pub best_train_rmse: f64,
    pub table: Vec<GridCell>,
    #[serde(default)]
    pub test_metrics: Option<Metrics>,
}

impl GridSearchResult {
    /// CSV with columns `alpha_f,alpha_i,rmse`.
    pub fn write_table_csv<W: Write>(&self, out: W) -> Result<()> {
        write_table(&self.table, out)
    }
}

/// Outcome of the grid search with per-cell fine-tuning. The table holds
/// validation RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneResult {
    pub best_shift: WarpShift,
    pub best_val_rmse: f64,
    pub table: Vec<GridCell>,
    pub history: TrainingHistory,
    #[serde(default)]
    pub test_metrics: Option<Metrics>,
}

impl FinetuneResult {
    pub fn write_table_csv<W: Write>(&self, out: W) -> Result<()> {
        write_table(&self.table, out)
    }
}

/// Adds `alpha_f` to every forget-gate bias and `alpha_i` to every
/// input-gate bias; all other parameters are untouched.
pub fn apply_bias_shift(net: &Network, shift: WarpShift) -> Result<Network> {
    let mut out = net.clone();
    let lstm = out
        .recurrent_mut()
        .as_lstm_mut()
        .ok_or_else(|| Error::UnsupportedLayer("bias shifts need an LSTM recurrent layer".into()))?;
    lstm.bias_mut(Gate::Forget).iter_mut().for_each(|b| *b += shift.alpha_f);
    lstm.bias_mut(Gate::Input).iter_mut().for_each(|b| *b += shift.alpha_i);
    Ok(out)
}

/// RMSE at observed positions of the network run over the full series.
pub fn observed_rmse(net: &Network, series: &SparseSeries, init: Option<&RecurrentState>) -> Result<f64> {
    let pred = net.predict(&series.features, init)?;
    Ok(crate::training::masked_mse(&pred, &series.target, &series.mask)?.sqrt())
}

/// Metrics on observed rows `from..` of a run over the whole series, so the
/// hidden state is spun up on the rows before `from`.
pub fn forecast_metrics(net: &Network, series: &SparseSeries, from: usize, init: Option<&RecurrentState>) -> Result<Metrics> {
    let pred = net.predict(&series.features, init)?;
    let mask: Vec<bool> = series.mask.iter().enumerate().map(|(k, m)| *m && k >= from).collect();
    masked_metrics(&series.target, &pred, &mask)
}

/// Grid search without fine-tuning: every cell shifts the biases, runs the
/// network over `train` from the zero state and scores observed RMSE.
pub fn grid_search_timewarp(net: &Network, train: &SparseSeries, grid: &WarpGrid) -> Result<GridSearchResult> {
    grid_search_timewarp_from(net, train, grid, None)
}

/// [`grid_search_timewarp`] with an explicit initial recurrent state.
pub fn grid_search_timewarp_from(
    net: &Network,
    train: &SparseSeries,
    grid: &WarpGrid,
    init: Option<&RecurrentState>,
) -> Result<GridSearchResult> {
    if train.observed_count() == 0 {
        return Err(Error::empty("training series has no observed targets"));
    }
    if net.recurrent().as_lstm().is_none() {
        return Err(Error::UnsupportedLayer("bias shifts need an LSTM recurrent layer".into()));
    }
    let table = grid
        .cells()
        .into_par_iter()
        .map(|shift| {
            let rmse = observed_rmse(&apply_bias_shift(net, shift)?, train, init)?;
            Ok(GridCell { alpha_f: shift.alpha_f, alpha_i: shift.alpha_i, rmse })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = best_cell(&table);
    Ok(GridSearchResult { best_shift: best.shift(), best_train_rmse: best.rmse, table, test_metrics: None })
}

/// Grid search with fine-tuning: every cell is shifted, then trained on
/// `train` with early stopping on `val`; the cell with the lowest validation
/// RMSE wins and its fine-tuned network is returned.
pub fn timewarp_finetune(
    net: &Network,
    train_series: &SparseSeries,
    val: &SparseSeries,
    grid: &WarpGrid,
    cfg: &TrainingConfig,
) -> Result<(Network, FinetuneResult)> {
    if val.observed_count() == 0 {
        return Err(Error::empty("fine-tuning needs a validation series with observations"));
    }
    if train_series.observed_count() == 0 {
        return Err(Error::empty("training series has no observed targets"));
    }
    let runs = grid
        .cells()
        .into_par_iter()
        .map(|shift| {
            let shifted = apply_bias_shift(net, shift)?;
            let (tuned, history) = train(&shifted, train_series, val, cfg)?;
            let rmse = series_loss(&tuned, val)?.sqrt();
            Ok((GridCell { alpha_f: shift.alpha_f, alpha_i: shift.alpha_i, rmse }, tuned, history))
        })
        .collect::<Result<Vec<_>>>()?;
    let table: Vec<GridCell> = runs.iter().map(|r| r.0).collect();
    let best = best_cell(&table);
    let (_, tuned, history) = runs
        .into_iter()
        .find(|r| compare_cells(&r.0, &best) == Ordering::Equal)
        .expect("best cell comes from the table");
    let result = FinetuneResult { best_shift: best.shift(), best_val_rmse: best.rmse, table, history, test_metrics: None };
    Ok((tuned, result))
}

/// Signs `(alpha_f, alpha_i)` that realise a warp `a -> a^gamma`: a faster
/// system (`gamma > 1`) lowers the forget bias and raises the input bias.
pub fn expected_shift_signs(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::domain(format!("warp factor {gamma} must be positive")));
    }
    match gamma.partial_cmp(&1.0) {
        Some(Ordering::Greater) => Ok((-1.0, 1.0)),
        Some(Ordering::Less) => Ok((1.0, -1.0)),
        _ => Err(Error::UndefinedSign),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_linear_lstm, theoretical_bias_shift};
    use crate::dynsys::{simulate_timelag, warp_retention, TimeLagSystem};
    use crate::rnn::{ActivationKind, DenseLayer, LstmParams, Matrix, RecurrentLayer, SimpleRnnParams};
    use crate::training::{init_network, Architecture, FreezeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn oracle(n: usize, gamma: f64, seed: u64) -> (Network, SparseSeries, (f64, f64)) {
        let a = (-0.1f64).exp();
        let (lstm, _) = build_linear_lstm(a, 0.0, 0.003, 50.0).unwrap();
        let net = Network::new(RecurrentLayer::Lstm(lstm), vec![DenseLayer::identity(1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let target = TimeLagSystem::new(warp_retention(a, gamma).unwrap(), 0.0).unwrap();
        let zs = simulate_timelag(&target, &xs).unwrap();
        let series = SparseSeries::from_dense(0, Matrix::column(&xs), zs.steps()).unwrap();
        (net, series, theoretical_bias_shift(a, gamma).unwrap())
    }

    #[test]
    fn shift_touches_only_forget_and_input_biases() {
        let net = init_network(&Architecture::fmc_reference(), 0).unwrap();
        assert_eq!(apply_bias_shift(&net, WarpShift::ZERO).unwrap(), net);
        let shifted = apply_bias_shift(&net, WarpShift::new(-1.31, 1.82).unwrap()).unwrap();
        let changed = net.params_flat().iter().zip(shifted.params_flat()).filter(|(a, b)| **a != *b).count();
        assert_eq!(changed, 128);
        let back = apply_bias_shift(&shifted, WarpShift::new(1.31, -1.82).unwrap()).unwrap();
        for (a, b) in net.params_flat().iter().zip(back.params_flat()) {
            assert!((a - b).abs() <= 1e-15);
        }
        let simple = Network::new(RecurrentLayer::Simple(SimpleRnnParams::zeros(1, 1, ActivationKind::Tanh)), vec![]).unwrap();
        assert!(matches!(apply_bias_shift(&simple, WarpShift::ZERO), Err(Error::UnsupportedLayer(_))));
    }

    #[test]
    fn grid_shapes_and_degenerate_grid() {
        assert_eq!(WarpGrid::default().len(), 625);
        assert_eq!(WarpGrid::default().f_values[0], -5.0);
        assert_eq!(WarpGrid::default().f_values[24], 5.0);
        let (net, series, _) = oracle(200, 10.0, 1);
        let r = grid_search_timewarp(&net, &series, &WarpGrid::zero()).unwrap();
        assert_eq!(r.best_shift, WarpShift::ZERO);
        assert_eq!(r.best_train_rmse, observed_rmse(&net, &series, None).unwrap());
        assert_eq!(r.table.len(), 1);
    }

    #[test]
    fn oracle_recovers_theoretical_shift() {
        let (net, series, (af, ai)) = oracle(500, 10.0, 2);
        assert!((af + 2.79349).abs() < 1e-5 && (ai - 2.79349).abs() < 1e-5);
        let mut fv: Vec<f64> = (-5..=5).map(|k| k as f64 * 0.5).collect();
        fv.push(af);
        let mut iv: Vec<f64> = (-5..=5).map(|k| k as f64 * 0.5).collect();
        iv.push(ai);
        let grid = WarpGrid::new(fv, iv).unwrap();
        let r = grid_search_timewarp(&net, &series, &grid).unwrap();
        assert!((r.best_shift.alpha_f - af).abs() <= 0.5 && (r.best_shift.alpha_i - ai).abs() <= 0.5);
        let unwarped = observed_rmse(&net, &series, None).unwrap();
        assert!(r.best_train_rmse <= unwarped);
        assert!(r.best_train_rmse <= crate::constructions::lstm_error_bound(10.72, 50.0).unwrap());
        assert_eq!(r.best_train_rmse, r.table.iter().map(|c| c.rmse).fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn selection_is_order_invariant_with_tie_break() {
        let cells = [
            GridCell { alpha_f: 1.0, alpha_i: 0.0, rmse: 0.5 },
            GridCell { alpha_f: -1.0, alpha_i: 0.0, rmse: 0.5 },
            GridCell { alpha_f: 0.5, alpha_i: 0.5, rmse: 0.5 },
            GridCell { alpha_f: 0.0, alpha_i: 3.0, rmse: 0.7 },
            GridCell { alpha_f: 0.0, alpha_i: 0.0, rmse: f64::NAN },
        ];
        let mut rev = cells.to_vec();
        rev.reverse();
        assert_eq!(best_cell(&cells), best_cell(&rev));
        assert_eq!(best_cell(&cells).alpha_f, -1.0);
    }

    #[test]
    fn parallel_table_matches_sequential() {
        let (net, series, _) = oracle(100, 0.5, 3);
        let grid = WarpGrid::uniform(-2.0, 2.0, 5).unwrap();
        let r = grid_search_timewarp(&net, &series, &grid).unwrap();
        for (cell, shift) in r.table.iter().zip(grid.cells()) {
            let rmse = observed_rmse(&apply_bias_shift(&net, shift).unwrap(), &series, None).unwrap();
            assert_eq!(cell.rmse, rmse);
        }
    }

    #[test]
    fn finetune_degenerate_and_oracle() {
        let (lstm_net, series, (af, ai)) = oracle(240, 10.0, 4);
        let train_s = series.slice(0, 160).unwrap();
        let val = series.slice(160, 80).unwrap();
        let cfg = TrainingConfig { window: 40, stride: 20, epochs: 3, patience: 2, learning_rate: 1e-3, ..Default::default() };
        let grid = WarpGrid::new(vec![0.0, af], vec![0.0, ai]).unwrap();
        let (tuned, r) = timewarp_finetune(&lstm_net, &train_s, &val, &grid, &cfg).unwrap();
        assert_eq!(r.table.len(), 4);
        assert_eq!(r.best_shift, WarpShift { alpha_f: af, alpha_i: ai });
        let gs = grid_search_timewarp(&lstm_net, &val, &WarpGrid::new(vec![af], vec![ai]).unwrap()).unwrap();
        assert!(r.best_val_rmse <= gs.best_train_rmse);
        assert_eq!(series_loss(&tuned, &val).unwrap().sqrt(), r.best_val_rmse);

        let empty_val = SparseSeries::new(val.t.clone(), val.features.clone(), vec![None; val.len()]).unwrap();
        assert!(matches!(timewarp_finetune(&lstm_net, &train_s, &empty_val, &grid, &cfg), Err(Error::EmptyData(_))));
    }

    #[test]
    fn finetune_replications_per_seed() {
        let arch = Architecture::lstm_regressor(1, 3);
        let (_, series, _) = oracle(200, 0.5, 5);
        let train_s = series.slice(0, 120).unwrap();
        let val = series.slice(120, 80).unwrap();
        let mut shifts = Vec::new();
        for seed in [11, 12] {
            let net = init_network(&arch, seed).unwrap();
            let cfg = TrainingConfig { window: 40, stride: 20, epochs: 2, seed, freeze: FreezeSpec::ALL, ..Default::default() };
            let (_, r) = timewarp_finetune(&net, &train_s, &val, &WarpGrid::uniform(-1.0, 1.0, 2).unwrap(), &cfg).unwrap();
            shifts.push(r.best_shift);
        }
        assert_eq!(shifts.len(), 2);
    }

    #[test]
    fn shift_signs() {
        assert_eq!(expected_shift_signs(10.0).unwrap(), (-1.0, 1.0));
        assert_eq!(expected_shift_signs(0.1).unwrap(), (1.0, -1.0));
        assert_eq!(expected_shift_signs(0.01).unwrap(), (1.0, -1.0));
        assert!(matches!(expected_shift_signs(1.0), Err(Error::UndefinedSign)));
        assert!(expected_shift_signs(-2.0).is_err());
        let a = 0.8;
        for gamma in [0.01, 0.1, 0.5, 2.0, 10.0] {
            let (f, i) = theoretical_bias_shift(a, gamma).unwrap();
            let (sf, si) = expected_shift_signs(gamma).unwrap();
            assert_eq!((f.signum(), i.signum()), (sf, si));
        }
    }

    #[test]
    fn lstm_params_only_biases_move() {
        let mut p = LstmParams::zeros(1, 2, ActivationKind::Tanh, ActivationKind::Tanh);
        p.b[Gate::Output as usize] = vec![0.3, 0.4];
        let net = Network::new(RecurrentLayer::Lstm(p), vec![]).unwrap();
        let s = apply_bias_shift(&net, WarpShift::new(1.0, -1.0).unwrap()).unwrap();
        let l = s.recurrent().as_lstm().unwrap();
        assert_eq!(l.bias(Gate::Forget), &[1.0, 1.0]);
        assert_eq!(l.bias(Gate::Input), &[-1.0, -1.0]);
        assert_eq!(l.bias(Gate::Output), &[0.3, 0.4]);
    }
}
