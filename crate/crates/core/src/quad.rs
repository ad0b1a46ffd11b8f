//! Adaptive Gauss–Kronrod quadrature.
//!
//! Global bisection of the interval with the largest error estimate until the
//! summed estimate meets `max(abs, rel * |value|)`. Semi-infinite ranges are
//! mapped onto `[0, 1)` by `x = a + u / (1 - u)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

/// Error targets for the adaptive rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// Integral value together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn zero() -> Self {
        Estimate {
            value: 0.0,
            error: 0.0,
        }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge: value {value:.6e}, achieved error {achieved:.3e} (requested {requested:.3e})")]
    NonConvergence {
        value: f64,
        achieved: f64,
        requested: f64,
    },
    #[error("integrand is not finite at x = {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 15-point Kronrod evaluation with the embedded 7-point Gauss error.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Estimate, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { at: center });
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !f1.is_finite() {
            return Err(QuadError::NonFinite { at: center - dx });
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite { at: center + dx });
        }
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok(Estimate { value, error })
}

/// Adaptive integral over a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate, QuadError> {
    if a == b {
        return Ok(Estimate::zero());
    }
    if b < a {
        let e = integrate(f, b, a, tol)?;
        return Ok(Estimate {
            value: -e.value,
            error: e.error,
        });
    }
    let first = gk15(&f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: first.value,
        error: first.error,
    });
    let mut value = first.value;
    let mut error = first.error;
    while error > tol.target(value) {
        if heap.len() >= MAX_INTERVALS {
            return Err(QuadError::NonConvergence {
                value,
                achieved: error,
                requested: tol.target(value),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            return Err(QuadError::NonConvergence {
                value,
                achieved: error,
                requested: tol.target(value),
            });
        }
        let left = gk15(&f, worst.a, mid)?;
        let right = gk15(&f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: left.value,
            error: left.error,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: right.value,
            error: right.error,
        });
    }
    // resum to shed accumulated rounding in the running totals
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Estimate { value, error })
}

/// Adaptive integral over `[a, ∞)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    tol: Tolerance,
) -> Result<Estimate, QuadError> {
    let g = |u: f64| {
        let one_minus = 1.0 - u;
        let x = a + u / one_minus;
        let jac = 1.0 / (one_minus * one_minus);
        let v = f(x) * jac;
        // the mapped integrand of any integrable tail vanishes at u -> 1
        if v.is_finite() {
            v
        } else if x.is_infinite() {
            0.0
        } else {
            v
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

/// Integral over `[a, b]` split at the given interior breakpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate, QuadError> {
    let mut total = Estimate::zero();
    for w in breaks.windows(2) {
        total = total + integrate(&f, w[0], w[1], tol)?;
    }
    Ok(total)
}

/// `∫_a^∞ g(x) cos(ωx + phase) dx` for a smooth, eventually monotone `g`
/// decaying at least like `x^{-1-δ}`.
///
/// The range is cut at a multiple of the period past `cut`; the finite part is
/// integrated period by period and the remainder is approximated by two
/// integrations by parts.
pub fn integrate_oscillatory<F: Fn(f64) -> f64>(
    g: F,
    omega: f64,
    phase: f64,
    a: f64,
    cut: f64,
    tol: Tolerance,
) -> Result<Estimate, QuadError> {
    if omega == 0.0 {
        let c = phase.cos();
        let e = integrate_to_infinity(&g, a, tol)?;
        return Ok(Estimate {
            value: c * e.value,
            error: e.error,
        });
    }
    let w = omega.abs();
    let period = 2.0 * std::f64::consts::PI / w;
    let h = |x: f64| g(x) * (omega * x + phase).cos();
    // first node past `cut` with sin(ωx + phase) = 0
    let start = cut.max(a);
    let k = ((omega * start + phase) / std::f64::consts::PI).ceil();
    let end = (k * std::f64::consts::PI - phase) / omega;
    let end = if end < start { end + period / 2.0 } else { end };
    let mut total = Estimate::zero();
    let mut lo = a;
    while lo < end {
        let hi = (lo + period).min(end);
        total = total + integrate(&h, lo, hi, tol)?;
        lo = hi;
    }
    // ∫_end^∞ g cos(ωx+φ) = [g sin/ω] - ∫ g' sin/ω ≈ -g'(end) cos(ωend+φ)/ω²
    let d = 1e-4 * end.abs().max(1.0);
    let g1 = (g(end + d) - g(end - d)) / (2.0 * d);
    let g2 = (g(end + d) - 2.0 * g(end) + g(end - d)) / (d * d);
    let c = (omega * end + phase).cos();
    let tail = -g1 * c / (omega * omega);
    total.value += tail;
    total.error += (g2 / (omega * omega * w)).abs() + 1e-3 * tail.abs();
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let e = integrate(|x| x * x * x - x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} = 2
        let e = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-7, "{}", e.value);
    }

    #[test]
    fn semi_infinite() {
        let e = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, Tolerance::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-10);
        let p = integrate_to_infinity(|x: f64| x.powf(-2.5), 1.0, Tolerance::default()).unwrap();
        assert!((p.value - 1.0 / 1.5).abs() < 1e-8);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let e = integrate(|x: f64| x.sin(), 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((e.value + (1.0 - 1f64.cos())).abs() < 1e-12);
    }

    #[test]
    fn oscillatory_tail() {
        // ∫_1^∞ cos(x)/x² dx = cos 1 - sin 1 · ... use Ci: known value 0.03052...
        // cross-check against a long brute-force integral
        let g = |x: f64| 1.0 / (x * x);
        let e = integrate_oscillatory(g, 1.0, 0.0, 1.0, 50.0, Tolerance::default()).unwrap();
        let brute =
            integrate(|x: f64| x.cos() / (x * x), 1.0, 4000.0 * std::f64::consts::PI, Tolerance::new(1e-12, 1e-12));
        let brute = brute.unwrap().value;
        assert!((e.value - brute).abs() < 1e-7, "{} vs {}", e.value, brute);
    }

    #[test]
    fn nonconvergence_reported() {
        let r = integrate(|x: f64| (1.0 / x).sin() / x, 1e-12, 1.0, Tolerance::new(1e-15, 1e-15));
        assert!(matches!(r, Err(QuadError::NonConvergence { .. })));
    }
}
