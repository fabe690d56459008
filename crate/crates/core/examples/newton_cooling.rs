//! Warped simple RNN and linear LSTM reproducing Newton cooling at ten rates.

use timewarp::cli::newton_demo;
use timewarp::io::NewtonConfig;

fn main() -> timewarp::Result<()> {
    let cfg = NewtonConfig::default();
    let (report, trajectories) = newton_demo(&cfg)?;
    println!("{:>6} {:>7} {:>12} {:>10}", "k", "gamma", "simple err", "lstm err");
    for r in &report.rows {
        println!("{:>6.3} {:>7.3} {:>12.2e} {:>10.5}", r.k, r.gamma, r.simple_max_error, r.lstm_max_error);
    }
    println!("output bias {}, analytic LSTM bound {:.5}", report.output_bias, report.lstm_error_bound);

    let slow = &trajectories[0];
    println!("\nk = {}: t, exact, lstm", slow.k);
    for t in (0..cfg.steps).step_by(10) {
        println!("{:>3} {:>8.4} {:>8.4}", t + 1, slow.exact[t], slow.lstm[t]);
    }
    Ok(())
}
