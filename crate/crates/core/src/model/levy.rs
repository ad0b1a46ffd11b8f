//! Symmetric Lévy motions with regularly varying Lévy densities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::quad::{self, Estimate, QuadError, Tolerance};

/// Closed catalogue of slowly varying functions, extended evenly to ℝ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum SlowlyVarying {
    /// `u ↦ c` with `c > 0`.
    Constant(f64),
    /// `u ↦ log(e + |u|)`.
    Log,
    /// `u ↦ log(e + log(e + |u|))`.
    IteratedLog,
}

impl Default for SlowlyVarying {
    fn default() -> Self {
        SlowlyVarying::Constant(1.0)
    }
}

impl SlowlyVarying {
    pub fn eval(&self, u: f64) -> f64 {
        let u = u.abs();
        match *self {
            SlowlyVarying::Constant(c) => c,
            SlowlyVarying::Log => (std::f64::consts::E + u).ln(),
            SlowlyVarying::IteratedLog => {
                (std::f64::consts::E + (std::f64::consts::E + u).ln()).ln()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SlowlyVarying::Constant(_))
    }

    /// `self(λu) / self(u)` along a ladder of `u`; tends to 1 for slowly varying presets.
    pub fn ratio_ladder(&self, lambda: f64, ladder: &[f64]) -> Vec<f64> {
        ladder
            .iter()
            .map(|&u| self.eval(lambda * u) / self.eval(u))
            .collect()
    }
}

/// `∫_ℝ (1 - cos u) |u|^{-1-a} du`, the constant that turns the Lévy–Khintchine
/// integral of `|u|^{-1-a}` into `|z|^a`. Evaluated by quadrature.
pub fn stable_constant(a: f64) -> f64 {
    let tol = Tolerance::new(1e-13, 1e-11);
    let head = quad::integrate(|u: f64| one_minus_cos(u) * u.powf(-1.0 - a), 0.0, 1.0, tol)
        .expect("smooth integrand");
    let plain = 1.0 / a;
    let osc = quad::integrate_oscillatory(|u: f64| u.powf(-1.0 - a), 1.0, 0.0, 1.0, 400.0, tol)
        .expect("decaying integrand");
    2.0 * (head.value + plain - osc.value)
}

/// Closed form of [`stable_constant`]: `-2 Γ(-a) cos(πa/2)`.
pub fn stable_constant_closed_form(a: f64) -> f64 {
    -2.0 * gamma(-a) * (PI * a / 2.0).cos()
}

/// A symmetric Lévy motion given by its Lévy density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LevyModel {
    /// Symmetric β-stable motion with `ψ(z) = |z|^β`.
    PureStable { beta: f64 },
    /// Lévy density `c(β)^{-1} f(x) |x|^{-1-β}` with `f` slowly varying.
    RvDensity {
        beta: f64,
        f: SlowlyVarying,
        c_beta: f64,
    },
}

impl LevyModel {
    pub fn pure_stable(beta: f64) -> Self {
        LevyModel::PureStable { beta }
    }

    /// Computes and caches `c(β)` once.
    pub fn rv_density(beta: f64, f: SlowlyVarying) -> Self {
        LevyModel::RvDensity {
            beta,
            f,
            c_beta: stable_constant(beta),
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            LevyModel::PureStable { beta } | LevyModel::RvDensity { beta, .. } => beta,
        }
    }

    /// Slowly varying factor of the Lévy density (`1` for the stable case).
    pub fn slowly_varying(&self) -> SlowlyVarying {
        match *self {
            LevyModel::PureStable { .. } => SlowlyVarying::Constant(1.0),
            LevyModel::RvDensity { f, .. } => f,
        }
    }

    /// Lévy density `ν(dx)/dx` at `x ≠ 0`.
    pub fn levy_density(&self, x: f64) -> f64 {
        let beta = self.beta();
        let ax = x.abs();
        match *self {
            LevyModel::PureStable { .. } => ax.powf(-1.0 - beta) / stable_constant_cached(beta),
            LevyModel::RvDensity { f, c_beta, .. } => f.eval(ax) * ax.powf(-1.0 - beta) / c_beta,
        }
    }

    /// Characteristic exponent `ψ(z)`.
    pub fn psi(&self, z: f64) -> Result<f64, QuadError> {
        if z == 0.0 {
            return Ok(0.0);
        }
        match *self {
            LevyModel::PureStable { beta } => Ok(z.abs().powf(beta)),
            LevyModel::RvDensity { beta, f, c_beta } => {
                let az = z.abs();
                let e = levy_khintchine(beta, |u| f.eval(u / az))?;
                Ok(az.powf(beta) * e.value / c_beta)
            }
        }
    }

    /// `ψ_T(z) = T f(T^{1/β})^{-1} ψ(z / T^{1/β})`.
    pub fn psi_scaled(&self, t_scale: f64, z: f64) -> Result<f64, QuadError> {
        if z == 0.0 {
            return Ok(0.0);
        }
        match *self {
            LevyModel::PureStable { beta } => Ok(z.abs().powf(beta)),
            LevyModel::RvDensity { beta, f, c_beta } => {
                let s = t_scale.powf(1.0 / beta);
                let fs = f.eval(s);
                let az = z.abs();
                let e = levy_khintchine(beta, |u| f.eval(s * u / az) / fs)?;
                Ok(az.powf(beta) * e.value / c_beta)
            }
        }
    }

    /// `ψ` restricted to jumps with `|x| ≤ delta`, at `z`.
    pub fn psi_small_jumps(&self, delta: f64, z: f64) -> Result<f64, QuadError> {
        let tol = Tolerance::default();
        let beta = self.beta();
        let e = quad::integrate(
            |x: f64| one_minus_cos(z * x) * self.levy_density(x),
            0.0,
            delta,
            tol,
        )?;
        let _ = beta;
        Ok(2.0 * e.value)
    }

    /// Total mass of the Lévy measure outside `[-delta, delta]`.
    pub fn big_jump_rate(&self, delta: f64) -> Result<f64, QuadError> {
        let e = quad::integrate_to_infinity(|x| self.levy_density(x), delta, Tolerance::default())?;
        Ok(2.0 * e.value)
    }
}

/// `1 - cos u` without cancellation near zero.
fn one_minus_cos(u: f64) -> f64 {
    let s = (0.5 * u).sin();
    2.0 * s * s
}

fn stable_constant_cached(beta: f64) -> f64 {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = beta.to_bits();
    if let Some(&v) = cache.lock().unwrap().get(&key) {
        return v;
    }
    let v = stable_constant(beta);
    cache.lock().unwrap().insert(key, v);
    v
}

/// `2 ∫_0^∞ (1 - cos u) w(u) u^{-1-β} du` for a slowly varying weight `w`.
fn levy_khintchine<W: Fn(f64) -> f64>(beta: f64, w: W) -> Result<Estimate, QuadError> {
    let tol = Tolerance::default();
    let head = quad::integrate(
        |u: f64| one_minus_cos(u) * w(u) * u.powf(-1.0 - beta),
        0.0,
        1.0,
        tol,
    )?;
    let plain = quad::integrate_to_infinity(|u: f64| w(u) * u.powf(-1.0 - beta), 1.0, tol)?;
    let osc = quad::integrate_oscillatory(
        |u: f64| w(u) * u.powf(-1.0 - beta),
        1.0,
        0.0,
        1.0,
        400.0,
        tol,
    )?;
    Ok(Estimate {
        value: 2.0 * (head.value + plain.value - osc.value),
        error: 2.0 * (head.error + plain.error + osc.error),
    })
}

/// Profile `h(z) = z^β s(1/z)` regularly varying at zero with index β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProfile {
    pub beta: f64,
    pub s: SlowlyVarying,
}

impl TailProfile {
    pub fn eval(&self, z: f64) -> f64 {
        z.powf(self.beta) * self.s.eval(1.0 / z)
    }
}

/// `(∫_w^1 h(z)^{-1} dz) / (w h(w)^{-1})`, which tends to `1/(β-1)` as `w → 0`.
pub fn rv_tail_integral_check(h: TailProfile, w: f64) -> Result<f64, QuadError> {
    assert!(w > 0.0 && w < 1.0, "w must lie in (0, 1)");
    // z = e^v keeps the integrand tame near the lower limit
    let e = quad::integrate(
        |v: f64| {
            let z = v.exp();
            z / h.eval(z)
        },
        w.ln(),
        0.0,
        Tolerance::default(),
    )?;
    Ok(e.value / (w / h.eval(w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_constant_matches_closed_form() {
        for &a in &[1.1, 1.3, 1.5, 1.8] {
            let q = stable_constant(a);
            let c = stable_constant_closed_form(a);
            assert!((q / c - 1.0).abs() < 1e-9, "a={a}: {q} vs {c}");
        }
    }

    #[test]
    fn pure_stable_psi() {
        let m = LevyModel::pure_stable(1.5);
        assert!((m.psi(2.0).unwrap() - 2.828_427_124_746_19).abs() < 1e-12);
        assert_eq!(m.psi(0.0).unwrap(), 0.0);
        for &t in &[1.0, 1e3, 1e9] {
            let v = m.psi_scaled(t, 1.3).unwrap();
            assert!((v / 1.3f64.powf(1.5) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rv_density_with_constant_one_is_stable() {
        let m = LevyModel::rv_density(1.5, SlowlyVarying::Constant(1.0));
        for &z in &[0.3, 1.0, 2.0, 7.5] {
            let v = m.psi(z).unwrap();
            assert!((v / z.powf(1.5) - 1.0).abs() < 1e-7, "z={z}: {v}");
        }
    }

    #[test]
    fn psi_log_preset_golden() {
        // independent scipy period-by-period quadrature: 1.3263853
        let m = LevyModel::rv_density(1.5, SlowlyVarying::Log);
        let v = m.psi(1.0).unwrap();
        assert!((v - 1.326_385_3).abs() < 1e-6, "{v}");
        let scaled = m.psi_scaled(1.0, 1.0).unwrap();
        assert!((scaled - v / SlowlyVarying::Log.eval(1.0)).abs() < 1e-9);
        assert!((scaled - 1.009_993_2).abs() < 1e-6, "{scaled}");
    }

    #[test]
    fn psi_is_even_positive() {
        let m = LevyModel::rv_density(1.5, SlowlyVarying::Log);
        for i in 1..=20 {
            let z = 0.37 * i as f64;
            let p = m.psi(z).unwrap();
            let q = m.psi(-z).unwrap();
            assert!(p > 0.0);
            assert_eq!(p, q);
        }
    }

    #[test]
    fn slowly_varying_ratio() {
        for s in [SlowlyVarying::Log, SlowlyVarying::IteratedLog, SlowlyVarying::Constant(2.0)] {
            let r = s.ratio_ladder(3.0, &[1e2, 1e6, 1e12, 1e24]);
            let dev: Vec<f64> = r.iter().map(|v| (v - 1.0).abs()).collect();
            for w in dev.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
            }
            assert!(dev[3] < 0.03);
            assert!(s.eval(0.0) > 0.0);
        }
    }

    #[test]
    fn tail_ratio_power_law() {
        let h = TailProfile {
            beta: 1.5,
            s: SlowlyVarying::Constant(1.0),
        };
        for &w in &[1e-2f64, 1e-4, 1e-6] {
            let exact = (w.powf(-0.5) - 1.0) / (0.5 * w.powf(-0.5));
            let r = rv_tail_integral_check(h, w).unwrap();
            assert!((r - exact).abs() < 1e-8);
        }
        assert!((rv_tail_integral_check(h, 1e-6).unwrap() - 2.0).abs() < 0.02);
    }

    #[test]
    fn tail_ratio_log_trend() {
        let h = TailProfile {
            beta: 1.5,
            s: SlowlyVarying::Log,
        };
        let ladder: Vec<f64> = (2..=8).map(|k| 10f64.powi(-k)).collect();
        let r: Vec<f64> = ladder
            .iter()
            .map(|&w| rv_tail_integral_check(h, w).unwrap())
            .collect();
        let first = (r[0] - 2.0).abs();
        let last = (r[r.len() - 1] - 2.0).abs();
        assert!(last < first, "{r:?}");
    }
}
