//! Training an LSTM regressor on sparse targets, then freezing its recurrent
//! layer for a second round.

use timewarp::benchmark::mean_equilibrium;
use timewarp::fmc::{timelag_fmc, FuelClass};
use timewarp::io::{load_weights, save_weights};
use timewarp::rnn::Matrix;
use timewarp::training::{init_network, series_loss, train, Architecture, FreezeSpec, SparseSeries, TrainingConfig};

fn main() -> timewarp::Result<()> {
    let eq: Vec<f64> = mean_equilibrium(24 * 60, 4)?.into_iter().map(|x| (x - 12.0) / 4.0).collect();
    let z = timelag_fmc(eq[0], &eq, FuelClass::FM10)?;
    let target: Vec<f64> = z.steps().iter().enumerate().map(|(k, v)| if k % 24 == 13 || k % 24 == 22 { *v } else { f64::NAN }).collect();
    let s = SparseSeries::from_dense(0, Matrix::column(&eq), &target)?;
    let (tr, val) = (s.slice(0, 24 * 45)?, s.slice(24 * 45, 24 * 15)?);

    let net = init_network(&Architecture::lstm_regressor(1, 8), 0)?;
    let cfg = TrainingConfig { window: 96, stride: 12, batch_size: 8, epochs: 40, learning_rate: 0.01, ..Default::default() };
    let (trained, history) = train(&net, &tr, &val, &cfg)?;
    println!("initial validation MSE {:.4}", history.initial_val_loss);
    for r in history.records.iter().step_by(5) {
        println!("epoch {:>3}  train {:.5}  val {:.5}", r.epoch, r.train_loss, r.val_loss);
    }
    println!("best epoch {:?}, stopped early {}", history.best_epoch, history.stopped_early);

    let dir = std::env::temp_dir().join("timewarp-training-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("weights.json");
    save_weights(&trained, &path)?;
    let mut reloaded = load_weights(&path)?;
    FreezeSpec::RECURRENT_ONLY.apply(&mut reloaded)?;
    let frozen_cfg = TrainingConfig { epochs: 10, freeze: FreezeSpec::RECURRENT_ONLY, ..cfg };
    let (second, _) = train(&reloaded, &tr, &val, &frozen_cfg)?;
    println!("after dense-frozen round: val MSE {:.5} (recurrent layer unchanged: {})", series_loss(&second, &val)?, second.recurrent() == trained.recurrent());
    Ok(())
}
