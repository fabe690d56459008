use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use timewarp::cli::{self, ConstructArgs, ConstructKind, RunContext, WarpMode};
use timewarp::io::ExperimentConfig;
use timewarp::timewarp::WarpShift;
use timewarp::Result;

#[derive(Parser)]
#[command(name = "timewarp", version, about = "Time-lag systems, recurrent constructions and gate-bias time-warping")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// TOML experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// worker threads for grid cells (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    SimpleExact,
    SimpleTanh,
    LstmLinear,
}

#[derive(Args)]
struct Data {
    /// series CSV
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Warped simple-RNN and LSTM reproductions of Newton cooling.
    NewtonDemo,
    /// Write a constructed time-lag cell as a weights file.
    Construct {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        z0: f64,
        #[arg(long, default_value_t = 0.003)]
        epsilon: f64,
        #[arg(long, default_value_t = 50.0)]
        bound: f64,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long)]
        output_bias: Option<f64>,
    },
    /// Warp a weights file by a factor gamma or an additive bias shift.
    Warp {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, conflicts_with_all = ["alpha_f", "alpha_i"], required_unless_present_any = ["alpha_f", "alpha_i"])]
        gamma: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha_f: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha_i: Option<f64>,
    },
    /// Bias-shift grid search; `{seed}` in the weights path picks per-seed files.
    GridSearch {
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Grid search with per-cell fine-tuning and early stopping.
    Finetune {
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        data: Data,
    },
    /// Train the configured architecture (or given weights) on a series.
    Train {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Predictions and metrics of a weights file on a series.
    Evaluate {
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        data: Data,
        /// first row counted in the metrics
        #[arg(long, default_value_t = 0)]
        from_row: usize,
    },
    /// ACF and PACF of one CSV column.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: Option<String>,
    },
    /// ODE fuel-moisture forecast over a weather file or synthetic weather.
    SimulateFmc {
        #[arg(long)]
        weather: Option<PathBuf>,
    },
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(args: Cli) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Command::GridSearch { replications: Some(r), .. } = &args.command {
        config.grid.replications = *r;
    }
    if let Command::Diagnose { column: Some(c), .. } = &args.command {
        config.diagnose.column = c.clone();
    }
    let ctx = RunContext::new(&args.out, args.seed, config)?;
    match &args.command {
        Command::NewtonDemo => print(&cli::cmd_newton_demo(&ctx)?),
        Command::Construct { kind, a, z0, epsilon, bound, horizon, output_bias } => {
            let kind = match kind {
                Kind::SimpleExact => ConstructKind::SimpleExact,
                Kind::SimpleTanh => ConstructKind::SimpleTanh,
                Kind::LstmLinear => ConstructKind::LstmLinear,
            };
            let c = ConstructArgs {
                kind,
                a: *a,
                z0: *z0,
                epsilon: *epsilon,
                bound: *bound,
                horizon: *horizon,
                output_bias: *output_bias,
            };
            print(&cli::cmd_construct(&ctx, &c)?)
        }
        Command::Warp { weights, gamma, alpha_f, alpha_i } => {
            let mode = match gamma {
                Some(g) => WarpMode::Gamma(*g),
                None => WarpMode::Shift(WarpShift::new(alpha_f.unwrap_or(0.0), alpha_i.unwrap_or(0.0))?),
            };
            cli::cmd_warp(&ctx, weights, &mode)?;
            println!("{}", ctx.path("warped.json").display());
            Ok(())
        }
        Command::GridSearch { weights, data, .. } => print(&cli::cmd_grid_search(&ctx, weights, &data.data)?),
        Command::Finetune { weights, data } => {
            let r = cli::cmd_finetune(&ctx, weights, &data.data)?;
            print(&serde_json::json!({
                "best_shift": r.best_shift,
                "best_val_rmse": r.best_val_rmse,
                "test_metrics": r.test_metrics,
            }))
        }
        Command::Train { data, init } => {
            let r = cli::cmd_train(&ctx, &data.data, init.as_deref())?;
            print(&serde_json::json!({
                "best_epoch": r.history.best_epoch,
                "best_val_loss": r.history.best_val_loss,
                "stopped_early": r.history.stopped_early,
                "test_metrics": r.test_metrics,
            }))
        }
        Command::Evaluate { weights, data, from_row } => print(&cli::cmd_evaluate(&ctx, weights, &data.data, *from_row)?),
        Command::Diagnose { input, .. } => {
            let (a, p) = cli::cmd_diagnose(&ctx, input)?;
            print(&serde_json::json!({
                "acf_significant_lags": a.significant_lags(),
                "pacf_significant_lags": p.significant_lags(),
                "ci_bound": a.ci_bound,
            }))
        }
        Command::SimulateFmc { weather } => {
            let v = cli::cmd_simulate_fmc(&ctx, weather.as_deref().map(Path::new))?;
            print(&serde_json::json!({ "steps": v.len() - 1, "final": v.last() }))
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
