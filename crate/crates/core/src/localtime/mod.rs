//! Occupation densities of simulated paths and exact local-time moments.

mod moments;

pub use moments::{local_time_moment_exact, moment_at_zero, StableDensity};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TestFunctionPhi;
use crate::sampling::{steps_before, PathGrid};

pub const FIELD_CSV_SCHEMA: &str = "hsssi.localtime-field.v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalTimeError {
    #[error("observation time {t} is beyond the path horizon {horizon}")]
    TimeBeyondHorizon { t: f64, horizon: f64 },
    #[error("observation times must be sorted and non-negative")]
    UnsortedTimes,
    #[error("bandwidth {h} is below half the grid spacing {step}")]
    BandwidthTooSmall { h: f64, step: f64 },
    #[error("moment order {0} is not supported; use 1..=4")]
    MomentOrder(u32),
    #[error("grid must have positive spacing and at least one point")]
    BadGrid,
    #[error(transparent)]
    Quadrature(#[from] crate::quad::QuadError),
}

/// Points `start + k·step`, `k < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Self {
        UniformGrid { start, step, len }
    }

    /// Smallest grid with spacing `step` covering `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, step: f64) -> Self {
        let start = (lo / step).floor() * step;
        let len = ((hi - start) / step).ceil() as usize + 1;
        UniformGrid { start, step, len }
    }

    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.point(self.len.saturating_sub(1))
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|k| self.point(k))
    }
}

/// Box-kernel occupation density `L̂_t(x_k)` at several times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeField {
    pub xgrid: UniformGrid,
    pub times: Vec<f64>,
    /// `table[i][k] = L̂_{times[i]}(x_k)`.
    pub table: Vec<Vec<f64>>,
    pub bandwidth: f64,
}

impl LocalTimeField {
    /// `Σ_k L̂_{t_i}(x_k) Δx`.
    pub fn mass(&self, i: usize) -> f64 {
        self.table[i].iter().sum::<f64>() * self.xgrid.step
    }

    /// Linear interpolation of row `i` at `x`; zero off the grid.
    pub fn value_at(&self, i: usize, x: f64) -> f64 {
        interpolate_row(&self.table[i], &self.xgrid, x)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# schema: {FIELD_CSV_SCHEMA}")?;
        writeln!(w, "t,x,value")?;
        for (i, t) in self.times.iter().enumerate() {
            for (k, v) in self.table[i].iter().enumerate() {
                writeln!(w, "{},{},{}", t, self.xgrid.point(k), v)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn interpolate_row(row: &[f64], grid: &UniformGrid, x: f64) -> f64 {
    let u = (x - grid.start) / grid.step;
    if !(u >= 0.0) || u > (grid.len - 1) as f64 {
        return 0.0;
    }
    let k = (u.floor() as usize).min(grid.len.saturating_sub(2));
    let frac = u - k as f64;
    if grid.len == 1 {
        return row[0];
    }
    row[k] * (1.0 - frac) + row[k + 1] * frac
}

/// Default bandwidth `dt^{1/β}`.
pub fn default_bandwidth(dt: f64, beta: f64) -> f64 {
    dt.powf(1.0 / beta)
}

fn check_times(times: &[f64], horizon: f64) -> Result<(), LocalTimeError> {
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(LocalTimeError::UnsortedTimes);
    }
    if let Some(&t) = times.iter().find(|&&t| t > horizon * (1.0 + 1e-12)) {
        return Err(LocalTimeError::TimeBeyondHorizon { t, horizon });
    }
    Ok(())
}

/// `L̂_t(x) = (1/2h) Σ_{s<t} dt 1{-h ≤ ξ_s - x < h}`.
///
/// The window is half-open, so when `2h` is a multiple of the grid spacing
/// every step covers the same number of grid points and the total mass over a
/// covering grid equals `t`.
pub fn estimate_local_time(
    path: &PathGrid,
    xgrid: UniformGrid,
    h: f64,
    times: &[f64],
) -> Result<LocalTimeField, LocalTimeError> {
    if !(xgrid.step > 0.0) || xgrid.len == 0 {
        return Err(LocalTimeError::BadGrid);
    }
    if h < xgrid.step / 2.0 {
        return Err(LocalTimeError::BandwidthTooSmall {
            h,
            step: xgrid.step,
        });
    }
    check_times(times, path.horizon)?;
    let ratio = 2.0 * h / xgrid.step;
    let width = ratio.round();
    let exact_width = (ratio - width).abs() < 1e-9;
    let weight = path.dt / (2.0 * h);
    let n = xgrid.len as i64;
    let mut diff = vec![0i64; xgrid.len + 1];
    let mut table = Vec::with_capacity(times.len());
    let mut done = 0usize;
    for &t in times {
        let upto = steps_before(t, path.dt).min(path.values.len());
        for &xi in &path.values[done.min(upto)..upto] {
            // grid points with xi - h < x_k <= xi + h
            let lo_f = ((xi - h - xgrid.start) / xgrid.step).floor() + 1.0;
            let hi_f = if exact_width {
                lo_f + width - 1.0
            } else {
                ((xi + h - xgrid.start) / xgrid.step).floor()
            };
            if hi_f < 0.0 || lo_f >= n as f64 {
                continue;
            }
            let lo = (lo_f.max(0.0)) as usize;
            let hi = (hi_f.min((n - 1) as f64)) as usize;
            if lo > hi {
                continue;
            }
            diff[lo] += 1;
            diff[hi + 1] -= 1;
        }
        done = done.max(upto);
        let mut acc = 0i64;
        let row: Vec<f64> = diff[..xgrid.len]
            .iter()
            .map(|d| {
                acc += d;
                acc as f64 * weight
            })
            .collect();
        table.push(row);
    }
    Ok(LocalTimeField {
        xgrid,
        times: times.to_vec(),
        table,
        bandwidth: h,
    })
}

/// `L̂_t(x)` at a single point.
pub fn local_time_at(path: &PathGrid, x: f64, h: f64, t: f64) -> f64 {
    let upto = steps_before(t, path.dt).min(path.values.len());
    let hits = path.values[..upto]
        .iter()
        .filter(|&&xi| {
            let d = xi - x;
            d >= -h && d < h
        })
        .count();
    hits as f64 * path.dt / (2.0 * h)
}

/// Riemann sum `Σ_{k·dt < τ} dt φ(ξ_{k·dt})`.
pub fn occupation_integral(path: &PathGrid, phi: &TestFunctionPhi, tau: f64) -> f64 {
    let upto = steps_before(tau, path.dt).min(path.values.len());
    path.dt * path.values[..upto].iter().map(|&x| phi.eval(x)).sum::<f64>()
}
