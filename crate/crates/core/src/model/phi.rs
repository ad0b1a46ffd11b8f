//! Test functions φ integrated along particle trajectories.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::quad::{self, Tolerance};

/// `weight · 1_[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalTerm {
    pub weight: f64,
    pub lo: f64,
    pub hi: f64,
}

/// `weight` times the normal density with the given centre and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpTerm {
    pub weight: f64,
    pub center: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TestFunctionPhi {
    /// Signed sum of interval indicators.
    Indicators { terms: Vec<IntervalTerm> },
    /// Signed sum of Gaussian densities.
    GaussianBumps { terms: Vec<BumpTerm> },
    /// `g1 y^{-γ1}` on `y > 1` and `-g2 |y|^{-γ2}` on `y < -1`, zero in between.
    /// `g2 = g1 (γ2 - 1)/(γ1 - 1)` so that the total integral vanishes.
    HeavyPair { gamma1: f64, gamma2: f64, g1: f64 },
}

impl TestFunctionPhi {
    pub fn indicator(lo: f64, hi: f64) -> Self {
        TestFunctionPhi::Indicators {
            terms: vec![IntervalTerm { weight: 1.0, lo, hi }],
        }
    }

    /// `1_(0,1] - 1_[-1,0)`.
    pub fn haar() -> Self {
        TestFunctionPhi::Indicators {
            terms: vec![
                IntervalTerm {
                    weight: 1.0,
                    lo: 0.0,
                    hi: 1.0,
                },
                IntervalTerm {
                    weight: -1.0,
                    lo: -1.0,
                    hi: 0.0,
                },
            ],
        }
    }

    pub fn heavy_symmetric(gamma: f64) -> Self {
        TestFunctionPhi::HeavyPair {
            gamma1: gamma,
            gamma2: gamma,
            g1: 1.0,
        }
    }

    pub fn heavy_pair(gamma1: f64, gamma2: f64) -> Self {
        TestFunctionPhi::HeavyPair {
            gamma1,
            gamma2,
            g1: 1.0,
        }
    }

    pub fn zero() -> Self {
        TestFunctionPhi::Indicators { terms: Vec::new() }
    }

    /// `λ φ`.
    pub fn scaled(&self, lambda: f64) -> Self {
        match self {
            TestFunctionPhi::Indicators { terms } => TestFunctionPhi::Indicators {
                terms: terms
                    .iter()
                    .map(|t| IntervalTerm {
                        weight: lambda * t.weight,
                        ..*t
                    })
                    .collect(),
            },
            TestFunctionPhi::GaussianBumps { terms } => TestFunctionPhi::GaussianBumps {
                terms: terms
                    .iter()
                    .map(|t| BumpTerm {
                        weight: lambda * t.weight,
                        ..*t
                    })
                    .collect(),
            },
            TestFunctionPhi::HeavyPair { gamma1, gamma2, g1 } => TestFunctionPhi::HeavyPair {
                gamma1: *gamma1,
                gamma2: *gamma2,
                g1: lambda * g1,
            },
        }
    }

    fn g2(gamma1: f64, gamma2: f64, g1: f64) -> f64 {
        g1 * (gamma2 - 1.0) / (gamma1 - 1.0)
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            TestFunctionPhi::Indicators { terms } => terms
                .iter()
                .filter(|t| y >= t.lo && y <= t.hi)
                .map(|t| t.weight)
                .sum(),
            TestFunctionPhi::GaussianBumps { terms } => terms
                .iter()
                .map(|t| {
                    let u = (y - t.center) / t.sd;
                    t.weight * (-0.5 * u * u).exp() / (t.sd * (2.0 * std::f64::consts::PI).sqrt())
                })
                .sum(),
            TestFunctionPhi::HeavyPair { gamma1, gamma2, g1 } => {
                if y > 1.0 {
                    g1 * y.powf(-gamma1)
                } else if y < -1.0 {
                    -Self::g2(*gamma1, *gamma2, *g1) * (-y).powf(-gamma2)
                } else {
                    0.0
                }
            }
        }
    }

    /// Analytic `∫φ`.
    pub fn integral(&self) -> f64 {
        match self {
            TestFunctionPhi::Indicators { terms } => {
                terms.iter().map(|t| t.weight * (t.hi - t.lo)).sum()
            }
            TestFunctionPhi::GaussianBumps { terms } => terms.iter().map(|t| t.weight).sum(),
            TestFunctionPhi::HeavyPair { .. } => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TestFunctionPhi::Indicators { terms } => {
                terms.iter().all(|t| t.weight == 0.0 || t.hi <= t.lo)
            }
            TestFunctionPhi::GaussianBumps { terms } => terms.iter().all(|t| t.weight == 0.0),
            TestFunctionPhi::HeavyPair { g1, .. } => *g1 == 0.0,
        }
    }

    /// Smallest interval outside which φ vanishes, if bounded. Gaussian bumps
    /// are cut at 12 standard deviations.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            TestFunctionPhi::Indicators { terms } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for t in terms.iter().filter(|t| t.weight != 0.0 && t.hi > t.lo) {
                    lo = lo.min(t.lo);
                    hi = hi.max(t.hi);
                }
                if lo > hi {
                    Some((0.0, 0.0))
                } else {
                    Some((lo, hi))
                }
            }
            TestFunctionPhi::GaussianBumps { terms } => {
                let lo = terms
                    .iter()
                    .map(|t| t.center - 12.0 * t.sd)
                    .fold(f64::INFINITY, f64::min);
                let hi = terms
                    .iter()
                    .map(|t| t.center + 12.0 * t.sd)
                    .fold(f64::NEG_INFINITY, f64::max);
                if lo > hi {
                    Some((0.0, 0.0))
                } else {
                    Some((lo, hi))
                }
            }
            TestFunctionPhi::HeavyPair { .. } => None,
        }
    }

    /// Lighter of the two power tails, `min(γ1, γ2)`, for heavy pairs.
    pub fn tail_exponent(&self) -> Option<f64> {
        match self {
            TestFunctionPhi::HeavyPair { gamma1, gamma2, .. } => Some(gamma1.min(*gamma2)),
            _ => None,
        }
    }

    /// Largest `|y|` at which φ changes character; sets the oscillation scale of `φ̂`.
    pub fn spatial_extent(&self) -> f64 {
        match self.support() {
            Some((lo, hi)) => lo.abs().max(hi.abs()).max(1e-3),
            None => 1.0,
        }
    }

    /// `φ̂(w) = ∫ φ(y) e^{iwy} dy`.
    pub fn fourier(&self, w: f64) -> Complex64 {
        match self {
            TestFunctionPhi::Indicators { terms } => {
                if w == 0.0 {
                    return Complex64::new(self.integral(), 0.0);
                }
                let i = Complex64::i();
                terms
                    .iter()
                    .map(|t| {
                        let mid = 0.5 * (t.lo + t.hi);
                        let half = 0.5 * (t.hi - t.lo);
                        // (e^{iw hi} - e^{iw lo})/(iw) = e^{iw mid} · 2 sin(w half)/w
                        (i * w * mid).exp() * (t.weight * 2.0 * (w * half).sin() / w)
                    })
                    .sum()
            }
            TestFunctionPhi::GaussianBumps { terms } => terms
                .iter()
                .map(|t| {
                    Complex64::from_polar(
                        t.weight * (-0.5 * t.sd * t.sd * w * w).exp(),
                        w * t.center,
                    )
                })
                .sum(),
            TestFunctionPhi::HeavyPair { gamma1, gamma2, g1 } => {
                if w == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let g2 = Self::g2(*gamma1, *gamma2, *g1);
                let right = power_tail_transform(*gamma1, w);
                let left = power_tail_transform(*gamma2, -w);
                right * *g1 - left * g2
            }
        }
    }
}

/// `∫_1^∞ y^{-γ} e^{iwy} dy` for `γ ∈ (1, 2)` and `w ≠ 0`.
///
/// One integration by parts reduces it to `∫_0^∞ y^{1-γ} e^{iwy} dy`, which is
/// `Γ(2-γ) |w|^{γ-2} e^{±iπ(2-γ)/2}`, minus a regular integral over `[0, 1]`.
pub fn power_tail_transform(gamma_exp: f64, w: f64) -> Complex64 {
    let i = Complex64::i();
    let s = 2.0 - gamma_exp;
    let aw = w.abs();
    let sign = w.signum();
    let full = Complex64::from_polar(gamma(s) * aw.powf(-s), sign * std::f64::consts::PI * s / 2.0);
    let tol = Tolerance::new(1e-13, 1e-10);
    // ∫_0^1 y^{1-γ} e^{iwy} dy, chunked so each piece holds a few oscillations
    let pieces = ((aw / std::f64::consts::PI).ceil() as usize).clamp(1, 1 << 16);
    let mut head = Complex64::new(0.0, 0.0);
    for k in 0..pieces {
        let a = k as f64 / pieces as f64;
        let b = (k + 1) as f64 / pieces as f64;
        let re = quad::integrate(|y: f64| y.powf(1.0 - gamma_exp) * (w * y).cos(), a, b, tol)
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
        let im = quad::integrate(|y: f64| y.powf(1.0 - gamma_exp) * (w * y).sin(), a, b, tol)
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
        head += Complex64::new(re, im);
    }
    let one_minus = 1.0 - gamma_exp;
    // [y^{1-γ} e^{iwy}/(1-γ)]_1^∞ - (iw/(1-γ)) ∫_1^∞ y^{1-γ} e^{iwy} dy
    -(i * w).exp() / one_minus - i * w / one_minus * (full - head)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_transform_modulus() {
        let phi = TestFunctionPhi::haar();
        for &w in &[0.1, 0.7, 2.0, 9.3] {
            let m = phi.fourier(w).norm_sqr();
            let expected = (2.0 - 2.0 * f64::cos(w)).powi(2) / (w * w);
            assert!((m - expected).abs() < 1e-12 * (1.0 + expected));
        }
        assert_eq!(phi.integral(), 0.0);
        assert_eq!(phi.eval(0.5), 1.0);
        assert_eq!(phi.eval(-0.5), -1.0);
    }

    #[test]
    fn transform_at_zero_is_integral() {
        let phis = [
            TestFunctionPhi::indicator(-1.0, 1.0),
            TestFunctionPhi::haar(),
            TestFunctionPhi::GaussianBumps {
                terms: vec![
                    BumpTerm {
                        weight: 2.0,
                        center: 0.3,
                        sd: 0.5,
                    },
                    BumpTerm {
                        weight: -0.5,
                        center: -1.0,
                        sd: 1.0,
                    },
                ],
            },
        ];
        for phi in &phis {
            let v = phi.fourier(0.0);
            assert!((v.re - phi.integral()).abs() < 1e-14 && v.im == 0.0);
            for &w in &[0.4, 3.1] {
                let a = phi.fourier(w);
                let b = phi.fourier(-w);
                assert!((a - b.conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn heavy_pair_transform_matches_direct_quadrature() {
        let phi = TestFunctionPhi::heavy_pair(1.3, 1.6);
        for &w in &[0.5, 2.0, 7.0] {
            let got = phi.fourier(w);
            // direct oscillatory quadrature over each tail
            let tol = Tolerance::new(1e-12, 1e-10);
            let tail = |g: f64, c1: f64, phase: f64| {
                quad::integrate_oscillatory(move |y: f64| c1 * y.powf(-g), w, phase, 1.0, 4000.0, tol)
                    .unwrap()
                    .value
            };
            let g2 = 0.6 / 0.3;
            // right: ∫ y^{-γ1} (cos wy + i sin wy); left: -g2 ∫ y^{-γ2} (cos wy - i sin wy)
            let half_pi = std::f64::consts::FRAC_PI_2;
            let re = tail(1.3, 1.0, 0.0) - tail(1.6, g2, 0.0);
            let im = -tail(1.3, 1.0, half_pi) - tail(1.6, g2, half_pi);
            assert!((got.re - re).abs() < 2e-5, "w={w}: {} vs {re}", got.re);
            assert!((got.im - im).abs() < 2e-5, "w={w}: {} vs {im}", got.im);
        }
        assert_eq!(phi.integral(), 0.0);
    }

    #[test]
    fn heavy_pair_integral_vanishes_numerically() {
        let phi = TestFunctionPhi::heavy_pair(1.4, 1.7);
        let r: f64 = 1e6;
        let breaks: Vec<f64> = (0..=60).map(|k| r.powf(k as f64 / 60.0)).collect();
        let tol = Tolerance::default();
        let right = quad::integrate_with_breaks(|y| phi.eval(y), &breaks, tol).unwrap().value;
        let left = quad::integrate_with_breaks(|y| phi.eval(-y), &breaks, tol).unwrap().value;
        // closed-form tails beyond r
        let right = right + r.powf(-0.4) / 0.4;
        let left = left - (0.7 / 0.4) * r.powf(-0.7) / 0.7;
        assert!((right + left).abs() < 1e-8, "{right} {left}");
    }

    #[test]
    fn scaling_is_linear() {
        let phi = TestFunctionPhi::haar().scaled(2.5);
        assert_eq!(phi.eval(0.2), 2.5);
        let h = TestFunctionPhi::heavy_symmetric(1.2).scaled(3.0);
        assert!((h.eval(2.0) - 3.0 * 2f64.powf(-1.2)).abs() < 1e-15);
    }
}
