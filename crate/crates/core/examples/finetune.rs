//! Grid search with per-cell fine-tuning of a trained source model.

use timewarp::fmc::FuelClass;
use timewarp::benchmark::mean_equilibrium;
use timewarp::fmc::timelag_fmc;
use timewarp::rnn::Matrix;
use timewarp::timewarp::{observed_rmse, timewarp_finetune, WarpGrid};
use timewarp::training::{init_network, train, Architecture, FreezeSpec, SparseSeries, TrainingConfig};

fn series(eq: &[f64], fc: FuelClass, every: usize) -> timewarp::Result<SparseSeries> {
    let z = timelag_fmc(eq[0], eq, fc)?;
    let target: Vec<f64> = z.steps().iter().enumerate().map(|(k, v)| if k % every == 0 { *v } else { f64::NAN }).collect();
    SparseSeries::from_dense(0, Matrix::column(eq), &target)
}

fn main() -> timewarp::Result<()> {
    let norm = |v: Vec<f64>| v.into_iter().map(|x| (x - 12.0) / 4.0).collect::<Vec<_>>();
    let src = series(&norm(mean_equilibrium(24 * 40, 1)?), FuelClass::FM10, 1)?;
    let cfg = TrainingConfig { window: 96, stride: 24, batch_size: 4, epochs: 60, patience: 8, learning_rate: 0.01, ..Default::default() };
    let (source, _) = train(&init_network(&Architecture::lstm_regressor(1, 4), 1)?, &src.slice(0, 720)?, &src.slice(720, 240)?, &cfg)?;

    let tgt = series(&norm(mean_equilibrium(24 * 30, 2)?), FuelClass::FM100, 12)?;
    let (train_s, val) = (tgt.slice(0, 480)?, tgt.slice(480, 240)?);
    let tune = TrainingConfig { epochs: 10, patience: 3, freeze: FreezeSpec::DENSE_ONLY, ..cfg };
    let (tuned, result) = timewarp_finetune(&source, &train_s, &val, &WarpGrid::uniform(-4.0, 4.0, 5)?, &tune)?;
    println!("source on FM100 validation  RMSE {:.4}", observed_rmse(&source, &val, None)?);
    println!(
        "selected shift ({:+.1}, {:+.1})  validation RMSE {:.4}",
        result.best_shift.alpha_f, result.best_shift.alpha_i, result.best_val_rmse
    );
    println!("fine-tuned epochs {}", result.history.records.len());
    assert_eq!(tuned.layer_count(), source.layer_count());
    Ok(())
}
