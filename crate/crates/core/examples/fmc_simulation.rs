//! ODE fuel-moisture forecasts for the four fuel classes next to their
//! time-lag counterparts.

use timewarp::fmc::{equilibria, fmc_forecast, synthetic_weather, timelag_fmc, FmcOdeHyper, FuelClass};

fn main() -> timewarp::Result<()> {
    let weather = synthetic_weather(24 * 14, 7);
    let hyper = FmcOdeHyper::default();
    let eq = weather.iter().map(|w| equilibria(w.temp_c, w.rh).map(|(d, e)| 0.5 * (d + e))).collect::<timewarp::Result<Vec<_>>>()?;
    let rain_hours = weather.iter().filter(|w| w.rain > 0.0).count();
    println!("{} hours, {rain_hours} with rain", weather.len());
    println!("{:>7} {:>10} {:>10} {:>10}", "class", "ode end", "lag end", "ode max");
    for fc in [FuelClass::FM1, FuelClass::FM10, FuelClass::FM100, FuelClass::FM1000] {
        let ode = fmc_forecast(15.0, &weather, fc, &hyper)?;
        let lag = timelag_fmc(15.0, &eq, fc)?;
        let max = ode.values.iter().cloned().fold(f64::MIN, f64::max);
        println!("FM{:<5} {:>10.3} {:>10.3} {:>10.3}", fc.t_lag(), ode.values.last().unwrap(), lag.values.last().unwrap(), max);
    }
    Ok(())
}
