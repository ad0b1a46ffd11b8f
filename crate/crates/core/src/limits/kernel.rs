use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::LimitError;
use crate::localtime::{LocalTimeField, UniformGrid};
use crate::model::Family;

/// Coarsest field spacing accepted by the kernels.
pub const MAX_KERNEL_STEP: f64 = 0.05;

/// Fractional kernels of the heavy-tail limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelVariant {
    /// `Z_t(x) = ∫_0^∞ y^{-γ} (L_t(x+y) − L_t(x−y)) dy`.
    Symmetric { gamma: f64 },
    /// `Z̃_t(x) = ∫_0^∞ y^{-γ1} (L_t(x+y) − L_t(x)) dy`, taken on the side of
    /// the lighter tail exponent.
    Asymmetric { gamma1: f64, gamma2: f64 },
}

impl KernelVariant {
    pub fn from_family(family: &Family) -> Option<Self> {
        match *family {
            Family::HeavySymmetric { gamma } => Some(KernelVariant::Symmetric { gamma }),
            Family::HeavyAsymmetric { gamma1, gamma2 } => Some(KernelVariant::Asymmetric { gamma1, gamma2 }),
            _ => None,
        }
    }

    pub fn exponent(&self) -> f64 {
        match *self {
            KernelVariant::Symmetric { gamma } => gamma,
            KernelVariant::Asymmetric { gamma1, gamma2 } => gamma1.min(gamma2),
        }
    }

    /// Discrete form: `Z_i = Σ_s k_s L_{i+s} − self_weight · L_i`.
    fn stencil(&self, step: f64, n: usize) -> (Vec<f64>, f64) {
        let g = self.exponent();
        let w = cell_weights(g, step, n);
        let tail = (0.5 * step).powf(1.0 - g) / (g - 1.0);
        // index n-1+s holds k_s
        let mut k = vec![0.0; 2 * n - 1];
        match *self {
            KernelVariant::Symmetric { .. } => {
                for s in 1..n {
                    k[n - 1 + s] = w[s];
                    k[n - 1 - s] = -w[s];
                }
                (k, 0.0)
            }
            KernelVariant::Asymmetric { gamma1, gamma2 } => {
                if gamma1 == gamma2 {
                    return KernelVariant::Symmetric { gamma: g }.stencil(step, n);
                }
                let sign = if gamma1 < gamma2 { 1.0 } else { -1.0 };
                for s in 1..n {
                    let at = if gamma1 < gamma2 { n - 1 + s } else { n - 1 - s };
                    k[at] = sign * w[s];
                }
                (k, sign * tail)
            }
        }
    }
}

/// `w_s = ∫_{(s-1/2)Δ}^{(s+1/2)Δ} y^{-γ} dy` for `s ≥ 1`; `w_0 = 0`.
fn cell_weights(gamma: f64, step: f64, n: usize) -> Vec<f64> {
    let p = 1.0 - gamma;
    let c = step.powf(p) / p;
    (0..n)
        .map(|s| {
            if s == 0 {
                0.0
            } else {
                let s = s as f64;
                c * ((s + 0.5).powf(p) - (s - 0.5).powf(p))
            }
        })
        .collect()
}

/// Kernel values on a grid, one row per observation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelField {
    pub xgrid: UniformGrid,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub variant: KernelVariant,
}

fn check_grid(field: &LocalTimeField, variant: &KernelVariant) -> Result<(), LimitError> {
    if field.xgrid.step > MAX_KERNEL_STEP {
        return Err(LimitError::GridTooCoarse {
            step: field.xgrid.step,
            required: MAX_KERNEL_STEP,
        });
    }
    let g = variant.exponent();
    if !(g > 1.0 && g < 2.0) {
        return Err(LimitError::Invalid(format!("kernel exponent {g} outside (1, 2)")));
    }
    Ok(())
}

/// Kernel at grid index `i` of row `row`; points off the grid count as zero.
fn kernel_at_index(row: &[f64], variant: &KernelVariant, step: f64, i: usize) -> f64 {
    let n = row.len();
    let w = cell_weights(variant.exponent(), step, n);
    let at = |j: i64| -> f64 {
        if j >= 0 && (j as usize) < n {
            row[j as usize]
        } else {
            0.0
        }
    };
    let i = i as i64;
    match *variant {
        KernelVariant::Symmetric { .. } => (1..n).map(|s| w[s] * (at(i + s as i64) - at(i - s as i64))).sum(),
        KernelVariant::Asymmetric { gamma1, gamma2 } if gamma1 == gamma2 => {
            (1..n).map(|s| w[s] * (at(i + s as i64) - at(i - s as i64))).sum()
        }
        KernelVariant::Asymmetric { gamma1, gamma2 } => {
            let dir: i64 = if gamma1 < gamma2 { 1 } else { -1 };
            let g = variant.exponent();
            // Σ_{s≥1} w_s = ∫_{Δ/2}^∞ y^{-γ} dy
            let total = (0.5 * step).powf(1.0 - g) / (g - 1.0);
            let ahead: f64 = (1..n).map(|s| w[s] * at(i + dir * s as i64)).sum();
            dir as f64 * (ahead - total * at(i))
        }
    }
}

/// Kernel at a single point `x` for every time of `field`, by direct summation.
/// Off-grid points are linearly interpolated between neighbouring nodes.
pub fn kernel_z(field: &LocalTimeField, variant: KernelVariant, x: f64) -> Result<Vec<f64>, LimitError> {
    check_grid(field, &variant)?;
    let g = &field.xgrid;
    let u = (x - g.start) / g.step;
    if !(u >= 0.0 && u <= (g.len - 1) as f64) {
        return Err(LimitError::Invalid(format!("x = {x} lies outside the field grid")));
    }
    let i = (u.floor() as usize).min(g.len.saturating_sub(2));
    let f = u - i as f64;
    Ok(field
        .table
        .iter()
        .map(|row| {
            let a = kernel_at_index(row, &variant, g.step, i);
            if f.abs() < 1e-9 || g.len < 2 {
                a
            } else {
                (1.0 - f) * a + f * kernel_at_index(row, &variant, g.step, i + 1)
            }
        })
        .collect())
}

/// Kernel on every node of the field grid, by FFT convolution. Two times share
/// one complex transform.
pub fn kernel_field(field: &LocalTimeField, variant: KernelVariant) -> Result<KernelField, LimitError> {
    check_grid(field, &variant)?;
    let n = field.xgrid.len;
    let (k, self_weight) = variant.stencil(field.xgrid.step, n);
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    // Z_i = Σ_j L_j k_{j-i}: convolution of L with k'_d = k_{-d}
    let mut kern = vec![Complex64::new(0.0, 0.0); size];
    for (idx, &v) in k.iter().enumerate() {
        let s = idx as i64 - (n as i64 - 1);
        let d = (-s).rem_euclid(size as i64) as usize;
        kern[d] = Complex64::new(v, 0.0);
    }
    fwd.process(&mut kern);
    let scale = 1.0 / size as f64;
    let mut values = Vec::with_capacity(field.table.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for pair in field.table.chunks(2) {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (j, slot) in buf.iter_mut().take(n).enumerate() {
            let im = if pair.len() == 2 { pair[1][j] } else { 0.0 };
            *slot = Complex64::new(pair[0][j], im);
        }
        fwd.process(&mut buf);
        for (x, y) in buf.iter_mut().zip(&kern) {
            *x *= y;
        }
        inv.process(&mut buf);
        let row = |part: usize, src: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let z = buf[i] * scale;
                    let v = if part == 0 { z.re } else { z.im };
                    v - self_weight * src[i]
                })
                .collect()
        };
        values.push(row(0, &pair[0]));
        if pair.len() == 2 {
            values.push(row(1, &pair[1]));
        }
    }
    Ok(KernelField {
        xgrid: field.xgrid,
        times: field.times.clone(),
        values,
        variant,
    })
}
