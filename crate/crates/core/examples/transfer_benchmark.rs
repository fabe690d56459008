//! Multi-timescale transfer on synthetic fuel-moisture data.
//!
//! `cargo run --release --example transfer_benchmark -- [replications]`

use rayon::prelude::*;
use timewarp::benchmark::{summarize, BenchmarkConfig};

fn main() -> timewarp::Result<()> {
    let reps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let cfg = BenchmarkConfig::default();
    let start = std::time::Instant::now();
    let outcomes = (0..reps).into_par_iter().map(|s| cfg.run_replication(s)).collect::<timewarp::Result<Vec<_>>>()?;
    for r in &outcomes {
        print!("seed {:>3}  source val rmse {:.4} ", r.seed, r.source_val_rmse);
        for c in &r.classes {
            print!(
                " | FM{:<4} ({:+.2}, {:+.2}) {:.3} -> {:.3}",
                c.t_lag, c.shift.alpha_f, c.shift.alpha_i, c.unwarped_test_rmse, c.warped_test_rmse
            );
        }
        println!();
    }
    println!();
    for s in summarize(&outcomes) {
        println!(
            "FM{:<5} unwarped {:.4}  warped {:.4}  forget sign {}/{}  input sign {}/{}",
            s.t_lag, s.mean_unwarped_rmse, s.mean_warped_rmse, s.forget_sign_matches, s.replications, s.input_sign_matches, s.replications
        );
    }
    println!("{:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
