//! ACF and PACF of an AR(1) process and of a slow fuel-moisture series.

use timewarp::benchmark::mean_equilibrium;
use timewarp::diagnostics::{acf, ar1_simulate, pacf};
use timewarp::fmc::{timelag_fmc, FuelClass};

fn show(name: &str, z: &[f64]) -> timewarp::Result<()> {
    let a = acf(z, 50)?;
    let p = pacf(z, 30)?;
    println!("{name}: N = {}, band +/-{:.4}", z.len(), a.ci_bound);
    println!("  ACF  lags 1, 5, 10, 50: {:.3} {:.3} {:.3} {:.3}", a.values[1], a.values[5], a.values[10], a.values[50]);
    println!("  PACF lags 1..5: {:?}", p.values[1..=5].iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    println!("  significant PACF lags: {:?}", p.significant_lags());
    Ok(())
}

fn main() -> timewarp::Result<()> {
    show("AR(1) beta 0.9", &ar1_simulate(0.9, 10_000, 0)?)?;
    let eq = mean_equilibrium(24 * 120, 0)?;
    for fc in [FuelClass::FM1, FuelClass::FM100] {
        let z = timelag_fmc(eq[0], &eq, fc)?;
        show(&format!("FM{}", fc.t_lag()), z.steps())?;
    }
    Ok(())
}
