//! Exact, tanh-rescaled and LSTM constructions of one time-lag system.

use timewarp::constructions::{
    build_exact_simplernn, build_linear_lstm, build_tanh_simplernn, run_scaled_simplernn, theoretical_bias_shift,
    warp_lstm_theoretical, warp_simplernn,
};
use timewarp::dynsys::{simulate_timelag, TimeLagSystem};
use timewarp::rnn::{Gate, Matrix, Network, RecurrentLayer, RecurrentState};

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn main() -> timewarp::Result<()> {
    let a = (-0.1f64).exp();
    let z0 = 12.0;
    let xs: Vec<f64> = (0..200).map(|t| 30.0 * (t as f64 / 17.0).sin()).collect();
    let sys = TimeLagSystem::new(a, z0)?;
    let truth = simulate_timelag(&sys, &xs)?;
    let input = Matrix::column(&xs);

    let (simple, h0) = build_exact_simplernn(a, z0)?;
    let init = RecurrentState { h: h0, c: None };
    let out = Network::new(RecurrentLayer::Simple(simple.clone()), vec![])?.predict(&input, Some(&init))?;
    println!("exact simple RNN        max error {:.2e}", max_err(&out, truth.steps()));

    let (tanh, scaling) = build_tanh_simplernn(a, z0, 0.01, 50.0, xs.len())?;
    let out = run_scaled_simplernn(&tanh, &scaling, z0, &xs)?;
    println!("tanh RNN, delta {:.5}  max error {:.2e} (target 0.01)", scaling.delta, max_err(&out, truth.steps()));

    let (lstm, state) = build_linear_lstm(a, z0, 0.003, 50.0)?;
    let out = Network::new(RecurrentLayer::Lstm(lstm.clone()), vec![])?.predict(&input, Some(&state))?;
    println!("linear LSTM, b_o {:.3}  max error {:.2e}", lstm.bias(Gate::Output)[0], max_err(&out, truth.steps()));

    let gamma = 10.0;
    let warped_truth = simulate_timelag(&sys.warped(gamma)?, &xs)?;
    let warped = warp_simplernn(&simple, gamma)?;
    let out = Network::new(RecurrentLayer::Simple(warped), vec![])?.predict(&input, Some(&init))?;
    println!("\nwarp gamma = {gamma}");
    println!("simple RNN              max error {:.2e}", max_err(&out, warped_truth.steps()));
    let wl = warp_lstm_theoretical(&lstm, gamma)?;
    let out = Network::new(RecurrentLayer::Lstm(wl.clone()), vec![])?.predict(&input, Some(&state))?;
    println!("LSTM                    max error {:.2e}", max_err(&out, warped_truth.steps()));
    let (af, ai) = theoretical_bias_shift(a, gamma)?;
    println!("bias shift              forget {af:+.5}, input {ai:+.5}");
    Ok(())
}
