//! Command implementations behind the `timewarp` binary.
//!
//! Every command takes a [`RunContext`] (output directory, seed, loaded
//! configuration), writes its artifacts plus a `manifest.json` into the output
//! directory and returns a serialisable report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constructions::{
    build_exact_simplernn, build_linear_lstm_with_budget, build_tanh_simplernn, output_bias_threshold, warp_lstm_theoretical,
    warp_simplernn, LstmErrorBudget, TanhScaling, DEFAULT_OUTPUT_BIAS_MARGIN,
};
use crate::diagnostics::{acf, pacf, AcfResult, Metrics};
use crate::dynsys::{newton_solution, NewtonCooling};
use crate::error::{Error, Result};
use crate::fmc::{fmc_forecast, synthetic_weather, FuelClass};
use crate::io::{
    load_weights, read_columns, read_sparse_series, read_weather, save_weights, write_columns, write_json, write_weather,
    ExperimentConfig, Manifest, NewtonConfig,
};
use crate::rnn::{DenseLayer, Matrix, Network, RecurrentLayer, RecurrentState};
use crate::timewarp::{
    apply_bias_shift, forecast_metrics, grid_search_timewarp, timewarp_finetune, FinetuneResult, GridSearchResult, WarpShift,
};
use crate::training::{init_network, train, SparseSeries, TrainingHistory};

/// Shared inputs of every command.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub seed: u64,
    pub config: ExperimentConfig,
}

impl RunContext {
    pub fn new(out: impl Into<PathBuf>, seed: u64, config: ExperimentConfig) -> Result<Self> {
        let out = out.into();
        fs::create_dir_all(&out)?;
        Ok(Self { out, seed, config })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn manifest<C: Serialize>(&self, command: &str, config: &C) -> Result<Manifest> {
        Manifest::new(command, self.seed, config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonRow {
    pub k: f64,
    pub gamma: f64,
    pub simple_max_error: f64,
    pub lstm_max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub rows: Vec<NewtonRow>,
    pub simple_max_error: f64,
    pub lstm_max_error: f64,
    pub output_bias: f64,
    pub lstm_error_bound: f64,
    pub epsilon: f64,
    pub within_epsilon: bool,
}

/// Per-k trajectories of the demo: exact solution, warped simple RNN and
/// warped linear LSTM at `t = 1..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrajectories {
    pub k: f64,
    pub exact: Vec<f64>,
    pub simple: Vec<f64>,
    pub lstm: Vec<f64>,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Output-gate bias used by the demo: the configured value when it clears
/// the threshold, otherwise threshold plus the default margin.
pub fn newton_output_bias(cfg: &NewtonConfig) -> Result<f64> {
    let threshold = output_bias_threshold(cfg.epsilon, cfg.bound)?;
    Ok(match cfg.output_bias {
        Some(b) if b > threshold => b,
        _ => threshold + DEFAULT_OUTPUT_BIAS_MARGIN,
    })
}

/// Runs the cooling demo without writing files.
pub fn newton_demo(cfg: &NewtonConfig) -> Result<(NewtonReport, Vec<NewtonTrajectories>)> {
    cfg.validate()?;
    let b_o = newton_output_bias(cfg)?;
    let budget = LstmErrorBudget::with_output_bias(cfg.epsilon, cfg.bound, b_o)?;
    let a_src = (-cfg.source_k).exp();
    let (simple_src, h0) = build_exact_simplernn(a_src, cfg.t0)?;
    let (lstm_src, lstm_init) = build_linear_lstm_with_budget(a_src, cfg.t0, &budget)?;
    let inputs = Matrix::column(&vec![cfg.ambient; cfg.steps]);

    let mut rows = Vec::with_capacity(cfg.k_count);
    let mut trajectories = Vec::with_capacity(cfg.k_count);
    for k in cfg.k_values() {
        let gamma = k / cfg.source_k;
        let nc = NewtonCooling::new(cfg.t0, cfg.ambient, k)?;
        let exact = (1..=cfg.steps).map(|t| newton_solution(&nc, t as f64)).collect::<Result<Vec<_>>>()?;

        let simple = Network::new(RecurrentLayer::Simple(warp_simplernn(&simple_src, gamma)?), vec![])?;
        let simple = simple.predict(&inputs, Some(&RecurrentState { h: h0.clone(), c: None }))?;
        let lstm = Network::new(RecurrentLayer::Lstm(warp_lstm_theoretical(&lstm_src, gamma)?), vec![])?;
        let lstm = lstm.predict(&inputs, Some(&lstm_init))?;

        rows.push(NewtonRow {
            k,
            gamma,
            simple_max_error: max_abs_diff(&simple, &exact),
            lstm_max_error: max_abs_diff(&lstm, &exact),
        });
        trajectories.push(NewtonTrajectories { k, exact, simple, lstm });
    }
    let simple_max_error = rows.iter().map(|r| r.simple_max_error).fold(0.0, f64::max);
    let lstm_max_error = rows.iter().map(|r| r.lstm_max_error).fold(0.0, f64::max);
    let report = NewtonReport {
        rows,
        simple_max_error,
        lstm_max_error,
        output_bias: b_o,
        lstm_error_bound: budget.error_bound(),
        epsilon: cfg.epsilon,
        within_epsilon: lstm_max_error <= cfg.epsilon,
    };
    Ok((report, trajectories))
}

/// `newton-demo`: writes `newton_errors.csv`, `newton_trajectories.csv` and
/// `newton_report.json`.
pub fn cmd_newton_demo(ctx: &RunContext) -> Result<NewtonReport> {
    let cfg = &ctx.config.newton;
    let (report, traj) = newton_demo(cfg)?;
    let mut manifest = ctx.manifest("newton-demo", cfg)?;

    let col = |f: fn(&NewtonRow) -> f64| report.rows.iter().map(f).collect::<Vec<_>>();
    write_columns(
        &ctx.path("newton_errors.csv"),
        &["k", "gamma", "simple_max_error", "lstm_max_error"],
        &[&col(|r| r.k), &col(|r| r.gamma), &col(|r| r.simple_max_error), &col(|r| r.lstm_max_error)],
    )?;
    manifest.add("newton_errors.csv");

    let (mut k, mut t, mut exact, mut simple, mut lstm) = (vec![], vec![], vec![], vec![], vec![]);
    for tr in &traj {
        for s in 0..tr.exact.len() {
            k.push(tr.k);
            t.push((s + 1) as f64);
            exact.push(tr.exact[s]);
            simple.push(tr.simple[s]);
            lstm.push(tr.lstm[s]);
        }
    }
    write_columns(&ctx.path("newton_trajectories.csv"), &["k", "t", "exact", "simple_rnn", "lstm"], &[&k, &t, &exact, &simple, &lstm])?;
    manifest.add("newton_trajectories.csv");
    write_json(&ctx.path("newton_report.json"), &report)?;
    manifest.add("newton_report.json");
    manifest.write(&ctx.out)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructKind {
    SimpleExact,
    SimpleTanh,
    LstmLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructArgs {
    pub kind: ConstructKind,
    pub a: f64,
    pub z0: f64,
    pub epsilon: f64,
    pub bound: f64,
    pub horizon: usize,
    pub output_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructReport {
    pub kind: ConstructKind,
    pub initial_state: RecurrentState,
    pub error_bound: f64,
    pub scaling: Option<TanhScaling>,
    pub weights: String,
}

/// `construct`: writes the constructed network to `weights.json` and the
/// initial state and bound to `construct_report.json`.
pub fn cmd_construct(ctx: &RunContext, args: &ConstructArgs) -> Result<ConstructReport> {
    let (layer, initial_state, error_bound, scaling) = match args.kind {
        ConstructKind::SimpleExact => {
            let (p, h0) = build_exact_simplernn(args.a, args.z0)?;
            (RecurrentLayer::Simple(p), RecurrentState { h: h0, c: None }, 0.0, None)
        }
        ConstructKind::SimpleTanh => {
            let (p, s) = build_tanh_simplernn(args.a, args.z0, args.epsilon, args.bound, args.horizon)?;
            let init = RecurrentState { h: vec![s.scale(args.z0)], c: None };
            (RecurrentLayer::Simple(p), init, s.error_bound(args.a, args.horizon), Some(s))
        }
        ConstructKind::LstmLinear => {
            let budget = match args.output_bias {
                Some(b) => LstmErrorBudget::with_output_bias(args.epsilon, args.bound, b)?,
                None => LstmErrorBudget::new(args.epsilon, args.bound)?,
            };
            let (p, init) = build_linear_lstm_with_budget(args.a, args.z0, &budget)?;
            (RecurrentLayer::Lstm(p), init, budget.error_bound(), None)
        }
    };
    let net = Network::new(layer, vec![])?;
    save_weights(&net, &ctx.path("weights.json"))?;
    let report = ConstructReport { kind: args.kind, initial_state, error_bound, scaling, weights: "weights.json".into() };
    write_json(&ctx.path("construct_report.json"), &report)?;
    let mut manifest = ctx.manifest("construct", args)?;
    manifest.add("weights.json");
    manifest.add("construct_report.json");
    manifest.write(&ctx.out)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WarpMode {
    /// exact reparametrisation for a warp factor
    Gamma(f64),
    /// additive forget/input bias shift
    Shift(WarpShift),
}

/// Warps a network: simple RNNs by their exact warp, LSTMs by the
/// logit-space bias warp or by an additive shift.
pub fn warp_network(net: &Network, mode: &WarpMode) -> Result<Network> {
    match mode {
        WarpMode::Shift(s) => apply_bias_shift(net, *s),
        WarpMode::Gamma(gamma) => {
            let mut out = net.clone();
            match out.recurrent_mut() {
                RecurrentLayer::Simple(p) => *p = warp_simplernn(p, *gamma)?,
                RecurrentLayer::Lstm(p) => *p = warp_lstm_theoretical(p, *gamma)?,
            }
            Ok(out)
        }
    }
}

/// `warp`: loads weights, warps them and writes `warped.json`.
pub fn cmd_warp(ctx: &RunContext, weights: &Path, mode: &WarpMode) -> Result<Network> {
    let net = load_weights(weights)?;
    let warped = warp_network(&net, mode)?;
    save_weights(&warped, &ctx.path("warped.json"))?;
    let mut manifest = ctx.manifest("warp", &serde_json::json!({ "weights": weights, "mode": mode }))?;
    manifest.add("warped.json");
    manifest.write(&ctx.out)?;
    Ok(warped)
}

/// Reads a series with the configured column layout.
pub fn load_series(ctx: &RunContext, data: &Path) -> Result<SparseSeries> {
    let d = &ctx.config.data;
    let cols: Vec<&str> = d.features.iter().map(String::as_str).collect();
    read_sparse_series(data, &d.time_column, &cols, &d.target)
}

/// Splits rows into consecutive train, validation and test blocks by the
/// configured fractions.
pub fn split_series(series: &SparseSeries, train_fraction: f64, val_fraction: f64) -> Result<(SparseSeries, SparseSeries, SparseSeries)> {
    if !(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction <= 1.0) {
        return Err(Error::Config(format!("invalid split fractions {train_fraction}, {val_fraction}")));
    }
    let n = series.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    let n_val = ((n as f64 * val_fraction).floor() as usize).min(n - n_train);
    Ok((
        series.slice(0, n_train)?,
        series.slice(n_train, n_val)?,
        series.slice(n_train + n_val, n - n_train - n_val)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub seed: u64,
    pub alpha_f: f64,
    pub alpha_i: f64,
    pub train_rmse: f64,
    pub test_rmse: Option<f64>,
}

fn seeded_path(template: &Path, seed: u64) -> PathBuf {
    PathBuf::from(template.to_string_lossy().replace("{seed}", &seed.to_string()))
}

/// Grid search without fine-tuning on one loaded network. Train and
/// validation fractions are merged into the search period; the rest is test.
pub fn grid_search_split(ctx: &RunContext, net: &Network, series: &SparseSeries) -> Result<GridSearchResult> {
    let d = &ctx.config.data;
    let (train_s, val, _) = split_series(series, d.train_fraction, d.val_fraction)?;
    let search = series.slice(0, train_s.len() + val.len())?;
    let mut result = grid_search_timewarp(net, &search, &ctx.config.grid.grid()?)?;
    if search.len() < series.len() && series.slice(search.len(), series.len() - search.len())?.observed_count() > 0 {
        let warped = apply_bias_shift(net, result.best_shift)?;
        result.test_metrics = Some(forecast_metrics(&warped, series, search.len(), None)?);
    }
    Ok(result)
}

/// `grid-search`: one replication per seed in `seed..seed + replications`;
/// a `{seed}` placeholder in the weights path selects per-seed weights.
/// Writes `grid_table.csv` and `grid_result.json` for the first replication
/// and `replications.csv` with one row per seed.
pub fn cmd_grid_search(ctx: &RunContext, weights: &Path, data: &Path) -> Result<Vec<ReplicationRow>> {
    let series = load_series(ctx, data)?;
    let reps = ctx.config.grid.replications.max(1);
    let mut rows = Vec::with_capacity(reps);
    let mut manifest = ctx.manifest("grid-search", &ctx.config)?;
    for r in 0..reps {
        let seed = ctx.seed + r as u64;
        let net = load_weights(&seeded_path(weights, seed))?;
        let result = grid_search_split(ctx, &net, &series)?;
        if r == 0 {
            let mut f = fs::File::create(ctx.path("grid_table.csv"))?;
            result.write_table_csv(&mut f)?;
            write_json(&ctx.path("grid_result.json"), &result)?;
            manifest.add("grid_table.csv");
            manifest.add("grid_result.json");
        }
        rows.push(ReplicationRow {
            seed,
            alpha_f: result.best_shift.alpha_f,
            alpha_i: result.best_shift.alpha_i,
            train_rmse: result.best_train_rmse,
            test_rmse: result.test_metrics.map(|m| m.rmse),
        });
    }
    write_replications(&ctx.path("replications.csv"), &rows)?;
    manifest.add("replications.csv");
    manifest.write(&ctx.out)?;
    Ok(rows)
}

fn write_replications(path: &Path, rows: &[ReplicationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "alpha_f", "alpha_i", "train_rmse", "test_rmse"])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.alpha_f.to_string(),
            r.alpha_i.to_string(),
            r.train_rmse.to_string(),
            r.test_rmse.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_history(path: &Path, history: &TrainingHistory) -> Result<()> {
    history.write_csv(fs::File::create(path)?)
}

/// `finetune`: grid search with per-cell fine-tuning on the train block,
/// early stopping on the validation block, test metrics on the rest.
pub fn cmd_finetune(ctx: &RunContext, weights: &Path, data: &Path) -> Result<FinetuneResult> {
    let series = load_series(ctx, data)?;
    let net = load_weights(weights)?;
    let d = &ctx.config.data;
    let (train_s, val, test) = split_series(&series, d.train_fraction, d.val_fraction)?;
    let mut cfg = ctx.config.train.clone();
    cfg.seed = ctx.seed;
    let (tuned, mut result) = timewarp_finetune(&net, &train_s, &val, &ctx.config.grid.grid()?, &cfg)?;
    if test.observed_count() > 0 {
        result.test_metrics = Some(forecast_metrics(&tuned, &series, train_s.len() + val.len(), None)?);
    }
    save_weights(&tuned, &ctx.path("finetuned.json"))?;
    result.write_table_csv(fs::File::create(ctx.path("finetune_table.csv"))?)?;
    write_history(&ctx.path("history.csv"), &result.history)?;
    write_json(&ctx.path("finetune_result.json"), &result)?;
    let mut manifest = ctx.manifest("finetune", &ctx.config)?;
    for a in ["finetuned.json", "finetune_table.csv", "history.csv", "finetune_result.json"] {
        manifest.add(a);
    }
    manifest.write(&ctx.out)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: TrainingHistory,
    pub test_metrics: Option<Metrics>,
}

/// `train`: seeded initialisation of the configured architecture (or the
/// given starting weights), training with early stopping, then test metrics.
pub fn cmd_train(ctx: &RunContext, data: &Path, init: Option<&Path>) -> Result<TrainReport> {
    let series = load_series(ctx, data)?;
    let net = match init {
        Some(p) => load_weights(p)?,
        None => {
            let mut arch = ctx.config.architecture.clone();
            arch.features = series.feature_count();
            init_network(&arch, ctx.seed)?
        }
    };
    let d = &ctx.config.data;
    let (train_s, val, test) = split_series(&series, d.train_fraction, d.val_fraction)?;
    let mut cfg = ctx.config.train.clone();
    cfg.seed = ctx.seed;
    let (trained, history) = train(&net, &train_s, &val, &cfg)?;
    let test_metrics = if test.observed_count() > 0 {
        Some(forecast_metrics(&trained, &series, train_s.len() + val.len(), None)?)
    } else {
        None
    };
    save_weights(&trained, &ctx.path("weights.json"))?;
    write_history(&ctx.path("history.csv"), &history)?;
    let report = TrainReport { history, test_metrics };
    write_json(&ctx.path("train_report.json"), &report)?;
    let mut manifest = ctx.manifest("train", &ctx.config)?;
    for a in ["weights.json", "history.csv", "train_report.json"] {
        manifest.add(a);
    }
    manifest.write(&ctx.out)?;
    Ok(report)
}

/// `evaluate`: runs the network over the whole series, writes
/// `predictions.csv` (t, prediction, target) and `metrics.json` over
/// observed rows from `from_row` on.
pub fn cmd_evaluate(ctx: &RunContext, weights: &Path, data: &Path, from_row: usize) -> Result<Metrics> {
    let series = load_series(ctx, data)?;
    let net = load_weights(weights)?;
    let pred = net.predict(&series.features, None)?;
    let metrics = forecast_metrics(&net, &series, from_row, None)?;
    let t: Vec<f64> = series.t.iter().map(|v| *v as f64).collect();
    write_columns(&ctx.path("predictions.csv"), &["t", "prediction", "target"], &[&t, &pred, &series.target])?;
    write_json(&ctx.path("metrics.json"), &metrics)?;
    let mut manifest = ctx.manifest("evaluate", &serde_json::json!({ "weights": weights, "data": data, "from_row": from_row }))?;
    manifest.add("predictions.csv");
    manifest.add("metrics.json");
    manifest.write(&ctx.out)?;
    Ok(metrics)
}

/// ACF and PACF of one column; the series must hold at least four times
/// the larger lag.
pub fn diagnose_series(values: &[f64], acf_lags: usize, pacf_lags: usize) -> Result<(AcfResult, AcfResult)> {
    let need = 4 * acf_lags.max(pacf_lags);
    if values.len() < need {
        return Err(Error::empty(format!("{} values, need at least {need}", values.len())));
    }
    Ok((acf(values, acf_lags)?, pacf(values, pacf_lags)?))
}

/// `diagnose`: writes `acf.csv` and `pacf.csv` (lag, value, ci_bound).
pub fn cmd_diagnose(ctx: &RunContext, input: &Path) -> Result<(AcfResult, AcfResult)> {
    let cfg = &ctx.config.diagnose;
    let values = read_columns(input, &[cfg.column.as_str()])?.remove(0);
    let values: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
    let (a, p) = diagnose_series(&values, cfg.acf_lags, cfg.pacf_lags)?;
    a.write_csv(fs::File::create(ctx.path("acf.csv"))?)?;
    p.write_csv(fs::File::create(ctx.path("pacf.csv"))?)?;
    let mut manifest = ctx.manifest("diagnose", &serde_json::json!({ "input": input, "config": cfg }))?;
    manifest.add("acf.csv");
    manifest.add("pacf.csv");
    manifest.write(&ctx.out)?;
    Ok((a, p))
}

/// `simulate-fmc`: ODE forecast over a weather file, or over seeded
/// synthetic weather (also written out) when none is given.
pub fn cmd_simulate_fmc(ctx: &RunContext, weather: Option<&Path>) -> Result<Vec<f64>> {
    let cfg = &ctx.config.fmc;
    let mut manifest = ctx.manifest("simulate-fmc", cfg)?;
    let (times, rows) = match weather {
        Some(p) => read_weather(p)?,
        None => {
            let rows = synthetic_weather(cfg.hours, ctx.seed);
            let times: Vec<i64> = (0..rows.len() as i64).collect();
            write_weather(&times, &rows, &ctx.path("weather.csv"))?;
            manifest.add("weather.csv");
            (times, rows)
        }
    };
    let traj = fmc_forecast(cfg.m0, &rows, FuelClass::new(cfg.t_lag)?, &cfg.hyper)?;
    let t0 = times.first().copied().unwrap_or(0);
    let t: Vec<f64> = (0..traj.len()).map(|k| (t0 + k as i64 - 1) as f64).collect();
    write_columns(&ctx.path("forecast.csv"), &["t", "fmc"], &[&t, &traj.values])?;
    manifest.add("forecast.csv");
    manifest.write(&ctx.out)?;
    Ok(traj.values)
}

/// Wraps a recurrent layer with an identity dense head.
pub fn with_identity_head(layer: RecurrentLayer) -> Result<Network> {
    let width = layer.units();
    Network::new(layer, vec![DenseLayer::identity(width)])
}
