//! Recovering a known warp by bias-shift grid search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timewarp::constructions::{build_linear_lstm, theoretical_bias_shift};
use timewarp::dynsys::{simulate_timelag, warp_retention, TimeLagSystem};
use timewarp::rnn::{DenseLayer, Matrix, Network, RecurrentLayer};
use timewarp::timewarp::{grid_search_timewarp, observed_rmse, WarpGrid};
use timewarp::training::SparseSeries;

fn main() -> timewarp::Result<()> {
    let a = (-0.1f64).exp();
    let gamma = 10.0;
    let (lstm, _) = build_linear_lstm(a, 0.0, 0.003, 50.0)?;
    let net = Network::new(RecurrentLayer::Lstm(lstm), vec![DenseLayer::identity(1)])?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let xs: Vec<f64> = (0..400).map(|_| rng.random_range(-10.0..10.0)).collect();
    let zs = simulate_timelag(&TimeLagSystem::new(warp_retention(a, gamma)?, 0.0)?, &xs)?;
    let target: Vec<f64> = zs.steps().iter().enumerate().map(|(k, z)| if k % 6 == 0 { *z } else { f64::NAN }).collect();
    let series = SparseSeries::from_dense(0, Matrix::column(&xs), &target)?;

    let result = grid_search_timewarp(&net, &series, &WarpGrid::default())?;
    let (af, ai) = theoretical_bias_shift(a, gamma)?;
    println!("unwarped RMSE   {:.4}", observed_rmse(&net, &series, None)?);
    println!("selected shift  ({:+.3}, {:+.3})  RMSE {:.4}", result.best_shift.alpha_f, result.best_shift.alpha_i, result.best_train_rmse);
    println!("theoretical     ({af:+.3}, {ai:+.3})");

    let mut table = result.table.clone();
    table.sort_by(timewarp::timewarp::compare_cells);
    println!("\nbest five cells");
    for c in table.iter().take(5) {
        println!("  ({:+.3}, {:+.3}) {:.4}", c.alpha_f, c.alpha_i, c.rmse);
    }
    Ok(())
}
