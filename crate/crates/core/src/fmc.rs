//! Dead fuel moisture: equilibrium moisture contents, fuel-class time-lag
//! coefficients and the four-case ODE forecast model.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynsys::{simulate_timelag, TimeLagSystem, Trajectory};
use crate::error::{Error, Result};

/// Fuel size class by its characteristic lag in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelClass {
    t_lag: f64,
}

impl FuelClass {
    pub const FM1: FuelClass = FuelClass { t_lag: 1.0 };
    pub const FM10: FuelClass = FuelClass { t_lag: 10.0 };
    pub const FM100: FuelClass = FuelClass { t_lag: 100.0 };
    pub const FM1000: FuelClass = FuelClass { t_lag: 1000.0 };

    pub fn new(t_lag: f64) -> Result<Self> {
        if !(t_lag.is_finite() && t_lag > 0.0) {
            return Err(Error::domain(format!("fuel lag time {t_lag} must be positive")));
        }
        Ok(Self { t_lag })
    }

    pub fn t_lag(&self) -> f64 {
        self.t_lag
    }

    /// Hourly retention coefficient `e^{-1/T}`.
    pub fn retention(&self) -> f64 {
        (-1.0 / self.t_lag).exp()
    }
}

/// Rain-phase parameters of the ODE model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmcOdeHyper {
    /// threshold rain intensity, mm/h
    pub r0: f64,
    /// saturation moisture, percent
    pub saturation: f64,
    /// rain delay time, hours
    pub t_r: f64,
    /// saturation rain intensity, mm/h
    pub r_s: f64,
}

impl Default for FmcOdeHyper {
    fn default() -> Self {
        Self { r0: 0.05, saturation: 250.0, t_r: 14.0, r_s: 8.0 }
    }
}

impl FmcOdeHyper {
    pub fn validate(&self) -> Result<()> {
        let all = [self.r0, self.saturation, self.t_r, self.r_s];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::domain("ODE hyperparameters must all be positive"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherRow {
    pub temp_c: f64,
    /// relative humidity, percent
    pub rh: f64,
    /// rain, mm/h
    pub rain: f64,
    #[serde(default)]
    pub solar: Option<f64>,
    #[serde(default)]
    pub wind: Option<f64>,
}

impl WeatherRow {
    pub fn new(temp_c: f64, rh: f64, rain: f64) -> Result<Self> {
        let row = Self { temp_c, rh, rain, solar: None, wind: None };
        row.validate()?;
        Ok(row)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.temp_c.is_finite() {
            return Err(Error::domain("temperature is not finite"));
        }
        if !(0.0..=100.0).contains(&self.rh) {
            return Err(Error::domain(format!("relative humidity {} outside [0, 100]", self.rh)));
        }
        if !(self.rain >= 0.0 && self.rain.is_finite()) {
            return Err(Error::domain(format!("rain {} must be non-negative", self.rain)));
        }
        Ok(())
    }
}

/// Drying and wetting equilibrium moisture contents, percent.
pub fn equilibria(temp_c: f64, rh: f64) -> Result<(f64, f64)> {
    if !(0.0..=100.0).contains(&rh) {
        return Err(Error::domain(format!("relative humidity {rh} outside [0, 100]")));
    }
    if !temp_c.is_finite() {
        return Err(Error::domain("temperature is not finite"));
    }
    let shared = 0.18 * (21.1 - temp_c) * (1.0 - (-0.115 * rh).exp());
    let e_d = 0.924 * rh.powf(0.679) + 0.000499 * (0.1 * rh).exp() + shared;
    let e_w = 0.618 * rh.powf(0.753) + 0.000454 * (0.1 * rh).exp() + shared;
    Ok((e_d, e_w))
}

/// `(input weight, retention weight) = (1 - e^{-1/T}, e^{-1/T})`.
pub fn fuel_class_coeffs(fc: FuelClass) -> (f64, f64) {
    let r = fc.retention();
    (1.0 - r, r)
}

/// Which branch of the ODE governs a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OdeCase {
    Rain,
    Drying,
    Wetting,
    Steady,
}

/// Case, target and rate for the state at the start of a step.
pub fn ode_case(m: f64, rain: f64, e: (f64, f64), fc: FuelClass, hyper: &FmcOdeHyper) -> (OdeCase, f64, f64) {
    let (e_d, e_w) = e;
    if rain > hyper.r0 {
        let rate = (1.0 - ((hyper.r0 - rain) / hyper.r_s).exp()) / hyper.t_r;
        (OdeCase::Rain, hyper.saturation, rate)
    } else if m > e_d {
        (OdeCase::Drying, e_d, 1.0 / fc.t_lag)
    } else if m < e_w {
        (OdeCase::Wetting, e_w, 1.0 / fc.t_lag)
    } else {
        (OdeCase::Steady, m, 0.0)
    }
}

/// Advances moisture `m` by `dt` hours with the case frozen at the start of
/// the step and the exact exponential solution of that case.
pub fn fmc_ode_step(m: f64, w: &WeatherRow, e: (f64, f64), fc: FuelClass, hyper: &FmcOdeHyper, dt: f64) -> Result<f64> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::domain(format!("moisture {m} must be non-negative")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("time step {dt} must be positive")));
    }
    let (e_d, e_w) = e;
    if e_w > e_d {
        return Err(Error::InconsistentEquilibria { e_d, e_w });
    }
    w.validate()?;
    let (_, target, rate) = ode_case(m, w.rain, e, fc, hyper);
    Ok(target + (m - target) * (-rate * dt).exp())
}

/// Hourly forecast from `m0` without data assimilation. Index 0 of the
/// trajectory is `m0`.
pub fn fmc_forecast(m0: f64, weather: &[WeatherRow], fc: FuelClass, hyper: &FmcOdeHyper) -> Result<Trajectory> {
    if weather.is_empty() {
        return Err(Error::empty("no weather rows"));
    }
    hyper.validate()?;
    let mut values = Vec::with_capacity(weather.len() + 1);
    let mut m = m0;
    values.push(m);
    for w in weather {
        let e = equilibria(w.temp_c, w.rh)?;
        m = fmc_ode_step(m, w, e, fc, hyper, 1.0)?;
        values.push(m);
    }
    Ok(Trajectory { values })
}

/// Time-lag moisture response `m_{t+1} = (1 - e^{-1/T}) E_{t+1} + e^{-1/T} m_t`
/// to an equilibrium series.
pub fn timelag_fmc(m0: f64, equilibrium: &[f64], fc: FuelClass) -> Result<Trajectory> {
    simulate_timelag(&TimeLagSystem::new(fc.retention(), m0)?, equilibrium)
}

/// Seeded synthetic hourly weather with diurnal temperature and humidity
/// cycles, day-to-day drift and occasional rain showers. Hour 0 is midnight.
pub fn synthetic_weather(hours: usize, seed: u64) -> Vec<WeatherRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut temp_drift = 0.0;
    let mut rh_drift = 0.0;
    let mut synoptic = 0.0;
    let mut rain_left = 0usize;
    let mut rain_rate = 0.0;
    (0..hours)
        .map(|h| {
            let phase = 2.0 * PI * ((h % 24) as f64 - 9.0) / 24.0;
            temp_drift = 0.97 * temp_drift + 0.5 * noise.sample(&mut rng);
            rh_drift = 0.97 * rh_drift + 1.5 * noise.sample(&mut rng);
            synoptic = 0.995 * synoptic + 0.1 * noise.sample(&mut rng);
            if rain_left == 0 && rng.random_bool(0.004) {
                rain_left = rng.random_range(2..10);
                rain_rate = rng.random_range(0.2..6.0);
            }
            let rain = if rain_left > 0 {
                rain_left -= 1;
                rain_rate
            } else {
                0.0
            };
            let temp_c = 18.0 + 8.0 * phase.sin() + temp_drift + 4.0 * synoptic;
            let wet = if rain > 0.0 { 25.0 } else { 0.0 };
            let rh = (55.0 - 25.0 * phase.sin() + rh_drift - 12.0 * synoptic + wet).clamp(5.0, 100.0);
            WeatherRow { temp_c, rh, rain, solar: None, wind: None }
        })
        .collect()
}
