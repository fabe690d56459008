//! First-order time-lag systems and their time-warped variants.
//!
//! A time-lag system is the recursion `z_t = a * z_{t-1} + (1 - a) * x_t` with
//! retention `a` in `(0, 1)`. Warping by `gamma` replaces `a` with `a^gamma`:
//! `gamma > 1` lowers retention and speeds up equilibration, `gamma < 1` slows
//! it down. Everything here is exact `f64` arithmetic and serves as ground
//! truth for the recurrent constructions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_retention(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("retention coefficient {a} must lie in (0, 1)")))
    }
}

fn check_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} is not finite")))
    }
}

/// Retention coefficient and initial state of a time-lag system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeLagSystem {
    a: f64,
    z0: f64,
}

impl TimeLagSystem {
    pub fn new(a: f64, z0: f64) -> Result<Self> {
        check_retention(a)?;
        check_finite("initial state", z0)?;
        Ok(Self { a, z0 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// The same system with retention raised to `gamma`.
    pub fn warped(&self, gamma: f64) -> Result<Self> {
        Ok(Self { a: warp_retention(self.a, gamma)?, z0: self.z0 })
    }
}

/// Newton's law of cooling, `dT/dt = -k (T - Ta)` with `T(0) = T0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonCooling {
    pub t0: f64,
    pub ambient: f64,
    k: f64,
}

impl NewtonCooling {
    pub fn new(t0: f64, ambient: f64, k: f64) -> Result<Self> {
        check_finite("T0", t0)?;
        check_finite("Ta", ambient)?;
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::domain(format!("cooling constant {k} must be positive")));
        }
        Ok(Self { t0, ambient, k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// The equivalent unit-step time-lag system (`a = e^{-k}`, `z0 = T0`).
    pub fn as_time_lag(&self) -> TimeLagSystem {
        TimeLagSystem { a: (-self.k).exp(), z0: self.t0 }
    }
}

/// States `z_0..=z_N`; index 0 holds the initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    /// States after the initial condition, `z_1..=z_N`.
    pub fn steps(&self) -> &[f64] {
        &self.values[1..]
    }
}

pub fn timelag_step(z_prev: f64, a: f64, x: f64) -> Result<f64> {
    check_retention(a)?;
    Ok(a * z_prev + (1.0 - a) * x)
}

pub fn simulate_timelag(sys: &TimeLagSystem, xs: &[f64]) -> Result<Trajectory> {
    if let Some(pos) = xs.iter().position(|x| !x.is_finite()) {
        return Err(Error::domain(format!("input {pos} is not finite")));
    }
    let mut values = Vec::with_capacity(xs.len() + 1);
    let mut z = sys.z0;
    values.push(z);
    for &x in xs {
        z = sys.a * z + (1.0 - sys.a) * x;
        values.push(z);
    }
    Ok(Trajectory { values })
}

/// `a^t z0 + (1 - a) sum_{k=0}^{t-1} a^k x_{t-k}` for `1 <= t <= xs.len()`.
pub fn timelag_closed_form(sys: &TimeLagSystem, xs: &[f64], t: usize) -> Result<f64> {
    if t == 0 || t > xs.len() {
        return Err(Error::Index { index: t, len: xs.len() });
    }
    let a = sys.a;
    let mut sum = 0.0;
    let mut pow = 1.0;
    for k in 0..t {
        sum += pow * xs[t - 1 - k];
        pow *= a;
    }
    Ok(a.powi(t as i32) * sys.z0 + (1.0 - a) * sum)
}

pub fn warp_retention(a: f64, gamma: f64) -> Result<f64> {
    check_retention(a)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::domain(format!("warp factor {gamma} must be positive")));
    }
    Ok(a.powf(gamma))
}

/// Zero-order-hold discretisation of `dz/dt = -lambda (z - x)`.
pub fn zoh_discretize(lambda: f64, dt: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(Error::domain(format!("rate {lambda} and step {dt} must be positive")));
    }
    Ok((-lambda * dt).exp())
}

pub fn newton_solution(nc: &NewtonCooling, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time {t} must be non-negative")));
    }
    let decay = (-nc.k * t).exp();
    Ok((1.0 - decay) * nc.ambient + decay * nc.t0)
}
