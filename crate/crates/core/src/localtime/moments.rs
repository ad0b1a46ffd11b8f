use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::gamma::gamma;

use super::LocalTimeError;
use crate::quad::{self, Tolerance};

const TABLE_MAX: f64 = 60.0;
const TABLE_STEP: f64 = 0.002;

/// Density `p_1` of the symmetric β-stable law with `ψ(z) = |z|^β`, tabulated
/// by Fourier inversion and continued by its asymptotic series.
#[derive(Debug)]
pub struct StableDensity {
    beta: f64,
    table: Vec<f64>,
}

impl StableDensity {
    fn build(beta: f64) -> Self {
        let zmax = 45f64.powf(1.0 / beta);
        let tol = Tolerance::new(1e-13, 1e-10);
        let n = (TABLE_MAX / TABLE_STEP).round() as usize + 1;
        let table = (0..n)
            .map(|k| {
                let y = k as f64 * TABLE_STEP;
                let pieces = ((y * zmax / PI).ceil() as usize).max(1);
                let mut s = 0.0;
                for j in 0..pieces {
                    let a = zmax * j as f64 / pieces as f64;
                    let b = zmax * (j + 1) as f64 / pieces as f64;
                    s += quad::integrate(|z: f64| (y * z).cos() * (-z.powf(beta)).exp(), a, b, tol)
                        .expect("smooth integrand")
                        .value;
                }
                s / PI
            })
            .collect();
        StableDensity { beta, table }
    }

    /// Shared instance for `beta`, built on first use.
    pub fn get(beta: f64) -> Arc<StableDensity> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<StableDensity>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(d) = cache.lock().unwrap().get(&beta.to_bits()) {
            return d.clone();
        }
        let d = Arc::new(StableDensity::build(beta));
        cache
            .lock()
            .unwrap()
            .entry(beta.to_bits())
            .or_insert(d)
            .clone()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `p_1(0) = Γ(1 + 1/β)/π`.
    pub fn at_zero(&self) -> f64 {
        gamma(1.0 + 1.0 / self.beta) / PI
    }

    pub fn p1(&self, y: f64) -> f64 {
        let y = y.abs();
        if y < TABLE_MAX {
            let u = y / TABLE_STEP;
            let k = u.floor() as usize;
            let f = u - k as f64;
            self.table[k] * (1.0 - f) + self.table[k + 1] * f
        } else {
            let b = self.beta;
            (1..=3)
                .map(|k| {
                    let k = k as f64;
                    let sign = if k as i32 % 2 == 1 { 1.0 } else { -1.0 };
                    sign * gamma(k * b + 1.0) / gamma(k + 1.0)
                        * (k * PI * b / 2.0).sin()
                        * y.powf(-k * b - 1.0)
                })
                .sum::<f64>()
                / PI
        }
    }

    /// `p_u(x) = u^{-1/β} p_1(x u^{-1/β})`.
    pub fn pu(&self, u: f64, x: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let s = u.powf(-1.0 / self.beta);
        s * self.p1(x * s)
    }
}

/// `E L_t(0)^n = n! (p_1(0) Γ(1-1/β))^n t^{n(1-1/β)} / Γ(n(1-1/β) + 1)`.
pub fn moment_at_zero(beta: f64, t: f64, n: u32) -> f64 {
    let a = 1.0 / beta;
    let p0 = gamma(1.0 + a) / PI;
    let k = n as f64;
    gamma(k + 1.0) * (p0 * gamma(1.0 - a)).powf(k) * t.powf(k * (1.0 - a))
        / gamma(k * (1.0 - a) + 1.0)
}

/// `n`-th moment of the local time at `x` up to time `t`.
///
/// Integrating out all but the first visit reduces the ordered `n`-fold
/// integral to one dimension: `n! ∫_0^t p_u(x) E L_{t-u}(0)^{n-1}/(n-1)! du`.
pub fn local_time_moment_exact(beta: f64, t: f64, x: f64, n: u32) -> Result<f64, LocalTimeError> {
    if n == 0 || n > 4 {
        return Err(LocalTimeError::MomentOrder(n));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    if x == 0.0 {
        return Ok(moment_at_zero(beta, t, n));
    }
    let dens = StableDensity::get(beta);
    let rest = |s: f64| moment_at_zero(beta, s, n - 1) / gamma(n as f64);
    let tol = Tolerance::new(1e-12, 1e-9);
    let e = quad::integrate(|u| dens.pu(u, x) * rest(t - u), 0.0, t, tol)?;
    Ok(gamma(n as f64 + 1.0) * e.value)
}
