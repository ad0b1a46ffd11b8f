use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{RngSpec, SamplingError, StableSampler, TailSampler};
use crate::model::LevyModel;

/// One trajectory sampled at `k·dt`, `k = 0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub dt: f64,
    pub horizon: f64,
    pub values: Vec<f64>,
}

/// Number of grid points `floor(horizon/dt) + 1`, robust to rounding of the ratio.
pub fn grid_len(horizon: f64, dt: f64) -> usize {
    (horizon / dt * (1.0 + 1e-12)).floor() as usize + 1
}

/// Number of indices `k ≥ 0` with `k·dt < t`.
pub fn steps_before(t: f64, dt: f64) -> usize {
    let r = t / dt;
    let n = (r * (1.0 - 1e-12)).ceil();
    if n <= 0.0 {
        0
    } else {
        n as usize
    }
}

impl PathGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Little-endian `dt, horizon, count` header followed by the values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * self.values.len());
        write_path_binary(self, &mut out).expect("writing to memory");
        out
    }
}

#[derive(Debug, Clone)]
enum Scheme {
    Stable(StableSampler),
    JumpDiffusion {
        small: StableSampler,
        jumps: Poisson<f64>,
        sizes: TailSampler,
    },
}

/// Increment generator for a fixed model and step.
///
/// For regularly varying densities, jumps above `δ = dt^{1/β}` are drawn
/// exactly and the remainder is replaced by a stable increment whose exponent
/// matches the small-jump part of `ψ` at `θ = 1`.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    dt: f64,
    scheme: Scheme,
}

impl PathSimulator {
    pub fn new(model: &LevyModel, dt: f64) -> Result<Self, SamplingError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SamplingError::Invalid(format!("dt = {dt} must be positive")));
        }
        let beta = model.beta();
        let scheme = match model {
            LevyModel::PureStable { .. } => Scheme::Stable(StableSampler::new(beta, dt.powf(1.0 / beta))),
            LevyModel::RvDensity { f, c_beta, .. } => {
                let delta = dt.powf(1.0 / beta);
                let small_exponent = model.psi_small_jumps(delta, 1.0)?;
                let rate = model.big_jump_rate(delta)?;
                let sizes = TailSampler::new(delta, beta, *f)?;
                let _ = c_beta;
                Scheme::JumpDiffusion {
                    small: StableSampler::new(beta, (dt * small_exponent).powf(1.0 / beta)),
                    jumps: Poisson::new(rate * dt)
                        .map_err(|e| SamplingError::Invalid(format!("jump rate: {e}")))?,
                    sizes,
                }
            }
        };
        Ok(PathSimulator { dt, scheme })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn increment<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.scheme {
            Scheme::Stable(s) => s.sample(rng),
            Scheme::JumpDiffusion { small, jumps, sizes } => {
                let mut x = small.sample(rng);
                let n = jumps.sample(rng) as u64;
                for _ in 0..n {
                    let m = sizes.sample(rng);
                    x += if rng.random::<bool>() { m } else { -m };
                }
                x
            }
        }
    }

    /// Overwrites `out` with positions at `k·dt`, `k < len`, starting from 0.
    pub fn fill<R: Rng + ?Sized>(&self, out: &mut Vec<f64>, len: usize, rng: &mut R) {
        out.clear();
        out.reserve(len);
        let mut x = 0.0;
        if len > 0 {
            out.push(0.0);
        }
        for _ in 1..len {
            x += self.increment(rng);
            out.push(x);
        }
    }

    pub fn simulate<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> PathGrid {
        let mut values = Vec::new();
        self.fill(&mut values, grid_len(horizon, self.dt), rng);
        PathGrid {
            dt: self.dt,
            horizon,
            values,
        }
    }
}

/// Simulates one path of `model` on `[0, horizon]`.
pub fn simulate_path(
    model: &LevyModel,
    horizon: f64,
    dt: f64,
    rng: &RngSpec,
) -> Result<PathGrid, SamplingError> {
    if dt > horizon {
        return Err(SamplingError::Invalid(format!(
            "dt = {dt} exceeds the horizon {horizon}"
        )));
    }
    Ok(PathSimulator::new(model, dt)?.simulate(horizon, &mut rng.rng()))
}

pub fn write_path_binary<W: Write>(path: &PathGrid, w: &mut W) -> std::io::Result<()> {
    w.write_all(&path.dt.to_le_bytes())?;
    w.write_all(&path.horizon.to_le_bytes())?;
    w.write_all(&(path.values.len() as u64).to_le_bytes())?;
    for v in &path.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_path_binary<R: Read>(r: &mut R) -> Result<PathGrid, SamplingError> {
    let mut buf = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8], SamplingError> {
        r.read_exact(&mut buf)
            .map_err(|e| SamplingError::Format(e.to_string()))?;
        Ok(buf)
    };
    let dt = f64::from_le_bytes(next(r)?);
    let horizon = f64::from_le_bytes(next(r)?);
    let count = u64::from_le_bytes(next(r)?) as usize;
    let mut values = Vec::with_capacity(count.min(1 << 28));
    for _ in 0..count {
        values.push(f64::from_le_bytes(next(r)?));
    }
    Ok(PathGrid {
        dt,
        horizon,
        values,
    })
}
