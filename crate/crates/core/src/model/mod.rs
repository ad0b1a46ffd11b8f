//! Parameters, validation, normalizing constants and Hurst exponents.

mod levy;
mod phi;

pub use levy::{
    rv_tail_integral_check, stable_constant, stable_constant_closed_form, LevyModel,
    SlowlyVarying, TailProfile,
};
pub use phi::{power_tail_transform, BumpTerm, IntervalTerm, TestFunctionPhi};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{self, QuadError, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon_cut: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_d: Option<f64>,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, epsilon_cut: f64) -> Self {
        ModelParams {
            alpha,
            beta,
            epsilon_cut,
            kappa_c: None,
            kappa_d: None,
        }
    }
}

/// Limit regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Family {
    FirstOrder,
    SecondOrder,
    HeavySymmetric { gamma: f64 },
    HeavyAsymmetric { gamma1: f64, gamma2: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::FirstOrder => "first-order",
            Family::SecondOrder => "second-order",
            Family::HeavySymmetric { .. } => "heavy-symmetric",
            Family::HeavyAsymmetric { .. } => "heavy-asymmetric",
        }
    }

    /// Governing tail exponent of a heavy family.
    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Family::HeavySymmetric { gamma } => Some(gamma),
            Family::HeavyAsymmetric { gamma1, gamma2 } => Some(gamma1.min(gamma2)),
            _ => None,
        }
    }

    pub fn is_heavy(&self) -> bool {
        self.gamma().is_some()
    }
}

/// Which hypothesis a parameter set breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    A,
    B,
    C,
    D,
    FirstOrder,
    SecondOrder,
    HeavyTail,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Assumption::A => "Assumption (A)",
            Assumption::B => "Assumption (B)",
            Assumption::C => "Assumption (C)",
            Assumption::D => "Assumption (D)",
            Assumption::FirstOrder => "first-order regime",
            Assumption::SecondOrder => "second-order regime",
            Assumption::HeavyTail => "heavy-tail regime",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub assumption: Assumption,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.assumption, self.message)
    }
}

fn heavy_window(beta: f64) -> f64 {
    1.0 + (beta - 1.0) / 2.0
}

fn check_ranges(params: &ModelParams, out: &mut Vec<Violation>) {
    let mut push = |assumption, message: String| out.push(Violation { assumption, message });
    if !(params.beta > 1.0 && params.beta < 2.0) {
        push(Assumption::A, format!("β = {} outside (1,2)", params.beta));
    }
    if !(params.alpha > 1.0 && params.alpha < 2.0) {
        push(Assumption::B, format!("α = {} outside (1,2)", params.alpha));
    }
    if !(params.epsilon_cut > 0.0 && params.epsilon_cut.is_finite()) {
        push(
            Assumption::B,
            format!("ε = {} must be positive", params.epsilon_cut),
        );
    }
    if let Some(k) = params.kappa_c {
        if !(k > 0.0 && k < 1.0) {
            push(Assumption::C, format!("κ_C = {k} outside (0,1)"));
        }
    }
    if let Some(k) = params.kappa_d {
        let lo = (params.beta - 1.0) / 2.0;
        if k.is_nan() || k <= lo {
            push(Assumption::D, format!("κ_D = {k} must exceed (β-1)/2 = {lo}"));
        }
    }
}

fn check_family(family: &Family, beta: f64, out: &mut Vec<Violation>) {
    let window = heavy_window(beta);
    let mut gamma_check = |name: &str, g: f64| {
        if !(g > 1.0) {
            out.push(Violation {
                assumption: Assumption::HeavyTail,
                message: format!("{name} = {g} must exceed 1"),
            });
        }
    };
    match *family {
        Family::HeavySymmetric { gamma } => gamma_check("γ", gamma),
        Family::HeavyAsymmetric { gamma1, gamma2 } => {
            gamma_check("γ1", gamma1);
            gamma_check("γ2", gamma2);
        }
        _ => {}
    }
    if let Some(g) = family.gamma() {
        if g.is_nan() || g >= window {
            out.push(Violation {
                assumption: Assumption::HeavyTail,
                message: format!("min(γ1,γ2) = {g} must be below 1+(β-1)/2 = {window}"),
            });
        }
    }
}

/// Checks ranges and family hypotheses; collects every violation.
pub fn validate(
    params: &ModelParams,
    phi: &TestFunctionPhi,
    family: &Family,
) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    check_ranges(params, &mut out);
    check_family(family, params.beta, &mut out);
    let integral = phi.integral();
    match *family {
        Family::FirstOrder => {
            if integral == 0.0 {
                out.push(Violation {
                    assumption: Assumption::FirstOrder,
                    message: "∫φ must be non-zero".into(),
                });
            }
        }
        Family::SecondOrder => {
            if integral.abs() > 1e-12 {
                out.push(Violation {
                    assumption: Assumption::SecondOrder,
                    message: format!("∫φ = {integral} must vanish"),
                });
            }
            if let Some(g) = phi.tail_exponent() {
                let window = heavy_window(params.beta);
                if g <= window {
                    out.push(Violation {
                        assumption: Assumption::D,
                        message: format!(
                            "tail exponent {g} of φ is too heavy; need more than 1+(β-1)/2 = {window}"
                        ),
                    });
                }
            }
        }
        Family::HeavySymmetric { gamma } => match *phi {
            TestFunctionPhi::HeavyPair { gamma1, gamma2, .. }
                if gamma1 == gamma && gamma2 == gamma => {}
            _ => out.push(Violation {
                assumption: Assumption::HeavyTail,
                message: format!("φ must be a heavy pair with both tail exponents equal to {gamma}"),
            }),
        },
        Family::HeavyAsymmetric { gamma1, gamma2 } => {
            if gamma1 == gamma2 {
                out.push(Violation {
                    assumption: Assumption::HeavyTail,
                    message: "asymmetric family needs γ1 ≠ γ2".into(),
                });
            }
            match *phi {
                TestFunctionPhi::HeavyPair {
                    gamma1: p1,
                    gamma2: p2,
                    ..
                } if p1 == gamma1 && p2 == gamma2 => {}
                _ => out.push(Violation {
                    assumption: Assumption::HeavyTail,
                    message: format!("φ must be a heavy pair with exponents ({gamma1}, {gamma2})"),
                }),
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// A limit family together with its parameters and Hurst exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSpec {
    pub family: Family,
    pub params: ModelParams,
    pub hurst: f64,
}

impl LimitSpec {
    pub fn new(family: Family, params: ModelParams) -> Result<Self, Vec<Violation>> {
        let mut out = Vec::new();
        check_ranges(&params, &mut out);
        check_family(&family, params.beta, &mut out);
        if !out.is_empty() {
            return Err(out);
        }
        Ok(LimitSpec {
            family,
            params,
            hurst: hurst_exponent(&family, &params),
        })
    }
}

fn hurst_exponent(family: &Family, p: &ModelParams) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    match family {
        Family::FirstOrder => 1.0 - 1.0 / b + 1.0 / (a * b),
        Family::SecondOrder => {
            let bt = 1.0 - 1.0 / b;
            bt / 2.0 + (1.0 - bt) / a
        }
        Family::HeavySymmetric { .. } | Family::HeavyAsymmetric { .. } => {
            let g = family.gamma().expect("heavy family");
            1.0 + 1.0 / (a * b) - g / b
        }
    }
}

pub fn hurst(spec: &LimitSpec) -> f64 {
    hurst_exponent(&spec.family, &spec.params)
}

/// Space and time normalizations of the particle functional at scale `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
    pub c_t: f64,
    pub d_t: f64,
}

/// `f` is the slowly varying factor of the Lévy density, `l` that of the
/// weight measure and `g1` the slowly varying part of the right tail of φ.
pub fn normalization(
    family: &Family,
    t_scale: f64,
    params: &ModelParams,
    f: SlowlyVarying,
    l: SlowlyVarying,
    g1: SlowlyVarying,
) -> Normalization {
    let (a, b) = (params.alpha, params.beta);
    match family {
        Family::FirstOrder => {
            let fs = f.eval(t_scale.powf(1.0 / b));
            Normalization {
                scale: t_scale.powf(1.0 - 1.0 / b + 1.0 / (a * b)) / fs,
                c_t: l.eval(t_scale.powf(1.0 / (a * b))),
                d_t: t_scale / fs,
            }
        }
        Family::SecondOrder => Normalization {
            scale: t_scale.powf((b - 1.0) / (2.0 * b) + 1.0 / (a * b)),
            c_t: 1.0,
            d_t: t_scale,
        },
        Family::HeavySymmetric { .. } | Family::HeavyAsymmetric { .. } => {
            let g = family.gamma().expect("heavy family");
            Normalization {
                scale: g1.eval(t_scale.powf(1.0 / b)) * t_scale.powf(1.0 + 1.0 / (a * b) - g / b),
                c_t: 1.0,
                d_t: t_scale,
            }
        }
    }
}

/// Prefactor applied to `I(φ) = ∫|φ̂(w)|² ψ(w)^{-1} dw` when forming `c(φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CphiConvention {
    /// `c(φ) = sqrt(I/π)`, the variance of `∫φ(ξ_s)ds` per unit local time.
    #[default]
    OccupationVariance,
    /// `c(φ) = sqrt(I)/π`.
    InversePiPrefactor,
    /// `c(φ) = sqrt(I)`.
    NoPrefactor,
}

impl CphiConvention {
    pub const ALL: [CphiConvention; 3] = [
        CphiConvention::OccupationVariance,
        CphiConvention::InversePiPrefactor,
        CphiConvention::NoPrefactor,
    ];

    pub fn apply(&self, integral: f64) -> f64 {
        match self {
            CphiConvention::OccupationVariance => (integral / std::f64::consts::PI).sqrt(),
            CphiConvention::InversePiPrefactor => integral.sqrt() / std::f64::consts::PI,
            CphiConvention::NoPrefactor => integral.sqrt(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CphiError {
    #[error("∫φ = {0} must vanish")]
    NonZeroIntegral(f64),
    #[error("integral diverges: tail exponent {gamma} of φ does not exceed 1+(β-1)/2 = {threshold}")]
    Divergent { gamma: f64, threshold: f64 },
    #[error("partitions disagree: {first} vs {second}")]
    PartitionMismatch { first: f64, second: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// `∫_ℝ |φ̂(w)|² ψ(w)^{-1} dw` on a partition whose pieces are `chunk` wide
/// beyond the first unit interval, truncated at `cutoff`.
fn cphi_integral_on(
    phi: &TestFunctionPhi,
    model: &LevyModel,
    first: f64,
    chunk: f64,
    cutoff: f64,
) -> Result<f64, QuadError> {
    let tol = Tolerance::new(1e-12, 1e-10);
    let psi = |w: f64| model.psi(w).unwrap_or(f64::NAN);
    let g = |w: f64| {
        if w == 0.0 {
            0.0
        } else {
            phi.fourier(w).norm_sqr() / psi(w)
        }
    };
    let mut total = quad::integrate(g, 0.0, first, tol)?.value;
    let mut lo = first;
    while lo < cutoff {
        let hi = (lo + chunk).min(cutoff);
        total += quad::integrate(g, lo, hi, tol)?.value;
        lo = hi;
    }
    Ok(2.0 * total)
}

/// Evaluates `I(φ)` on two unrelated partitions.
pub fn c_phi_squared_partitions(
    phi: &TestFunctionPhi,
    model: &LevyModel,
) -> Result<(f64, f64), CphiError> {
    let integral = phi.integral();
    if integral.abs() > 1e-12 {
        return Err(CphiError::NonZeroIntegral(integral));
    }
    let beta = model.beta();
    if let Some(g) = phi.tail_exponent() {
        let threshold = heavy_window(beta);
        if g <= threshold {
            return Err(CphiError::Divergent {
                gamma: g,
                threshold,
            });
        }
    }
    let extent = phi.spatial_extent();
    let period = std::f64::consts::PI / extent;
    // |φ̂|² decays at least like w^{-2}; the neglected tail is below w^{-1-β}
    let cutoff = match phi {
        TestFunctionPhi::GaussianBumps { terms } => {
            let sd = terms.iter().map(|t| t.sd).fold(f64::INFINITY, f64::min);
            40.0 / sd
        }
        TestFunctionPhi::HeavyPair { .. } => 2.0e3,
        TestFunctionPhi::Indicators { .. } => 2.0e5 / extent,
    };
    let a = cphi_integral_on(phi, model, 1.0, period, cutoff)?;
    let b = cphi_integral_on(phi, model, 0.37, 0.71 * period, cutoff)?;
    Ok((a, b))
}

/// Variance constant `c(φ)` of the second-order occupation limit.
pub fn c_phi(
    phi: &TestFunctionPhi,
    model: &LevyModel,
    convention: CphiConvention,
) -> Result<f64, CphiError> {
    let (a, b) = c_phi_squared_partitions(phi, model)?;
    if (a - b).abs() > 1e-6 * a.abs().max(b.abs()) {
        return Err(CphiError::PartitionMismatch {
            first: a,
            second: b,
        });
    }
    Ok(convention.apply(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(alpha: f64, beta: f64) -> ModelParams {
        ModelParams::new(alpha, beta, 1.0)
    }

    #[test]
    fn validate_accepts_first_order() {
        let phi = TestFunctionPhi::indicator(0.0, 1.0);
        assert!(validate(&p(1.5, 1.5), &phi, &Family::FirstOrder).is_ok());
    }

    #[test]
    fn validate_rejects_beta_range() {
        let phi = TestFunctionPhi::indicator(0.0, 1.0);
        let v = validate(&p(1.5, 2.2), &phi, &Family::FirstOrder).unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].assumption, Assumption::A);
        assert!(v[0].message.contains("outside (1,2)"));
    }

    #[test]
    fn validate_rejects_heavy_gamma_window() {
        let phi = TestFunctionPhi::heavy_symmetric(1.4);
        let v = validate(&p(1.5, 1.5), &phi, &Family::HeavySymmetric { gamma: 1.4 }).unwrap_err();
        assert!(v.iter().any(|x| x.assumption == Assumption::HeavyTail));
    }

    #[test]
    fn validate_second_order_needs_zero_integral() {
        let v = validate(
            &p(1.5, 1.5),
            &TestFunctionPhi::indicator(0.0, 1.0),
            &Family::SecondOrder,
        )
        .unwrap_err();
        assert_eq!(v[0].assumption, Assumption::SecondOrder);
        assert!(validate(&p(1.5, 1.5), &TestFunctionPhi::haar(), &Family::SecondOrder).is_ok());
    }

    #[test]
    fn validate_kappa() {
        let mut q = p(1.5, 1.5);
        q.kappa_d = Some(0.2);
        q.kappa_c = Some(1.5);
        let v = validate(&q, &TestFunctionPhi::haar(), &Family::SecondOrder).unwrap_err();
        let names: Vec<_> = v.iter().map(|x| x.assumption).collect();
        assert!(names.contains(&Assumption::C) && names.contains(&Assumption::D));
    }

    #[test]
    fn hurst_examples() {
        let first = LimitSpec::new(Family::FirstOrder, p(1.5, 1.5)).unwrap();
        assert!((first.hurst - 7.0 / 9.0).abs() < 1e-15);
        let second = LimitSpec::new(Family::SecondOrder, p(1.5, 1.5)).unwrap();
        assert!((second.hurst - 11.0 / 18.0).abs() < 1e-15);
        let heavy =
            LimitSpec::new(Family::HeavySymmetric { gamma: 1.1 }, p(4.0 / 3.0, 1.5)).unwrap();
        assert!((heavy.hurst - (1.5 - 1.1 / 1.5)).abs() < 1e-15);
        assert!((hurst(&heavy) - 0.766_666_666_666_666_7).abs() < 1e-12);
    }

    #[test]
    fn normalization_examples() {
        let c = SlowlyVarying::Constant(1.0);
        let n1 = normalization(&Family::FirstOrder, 1e3, &p(1.5, 1.5), c, c, c);
        assert!((n1.scale - 10f64.powf(7.0 / 3.0)).abs() < 1e-9);
        assert!((n1.scale - 215.443_469).abs() < 1e-5);
        assert_eq!(n1.d_t, 1e3);
        let n2 = normalization(&Family::SecondOrder, 1e3, &p(1.5, 1.5), c, c, c);
        assert!((n2.scale - 68.129_206).abs() < 1e-5);
        let n3 = normalization(
            &Family::HeavySymmetric { gamma: 1.1 },
            1e3,
            &p(1.5, 1.5),
            c,
            c,
            c,
        );
        assert!((n3.scale - 10f64.powf(3.0 * (1.0 + 4.0 / 9.0 - 1.1 / 1.5))).abs() < 1e-9);
        assert!((n3.scale - 135.93).abs() < 0.01);
    }

    #[test]
    fn cphi_haar_golden() {
        let model = LevyModel::pure_stable(1.5);
        let (a, b) = c_phi_squared_partitions(&TestFunctionPhi::haar(), &model).unwrap();
        // scipy QUADPACK oracle: 4.42999
        assert!((a - 4.42999).abs() < 1e-4, "{a}");
        assert!((a - b).abs() < 1e-6 * a);
        let c = c_phi(&TestFunctionPhi::haar(), &model, CphiConvention::NoPrefactor).unwrap();
        assert!((c * c - a).abs() < 1e-5);
    }

    #[test]
    fn cphi_is_homogeneous() {
        let model = LevyModel::pure_stable(1.5);
        let conv = CphiConvention::default();
        let c1 = c_phi(&TestFunctionPhi::haar(), &model, conv).unwrap();
        let c3 = c_phi(&TestFunctionPhi::haar().scaled(3.0), &model, conv).unwrap();
        assert!((c3 / c1 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn cphi_heavy_diverges() {
        let model = LevyModel::pure_stable(1.5);
        let e = c_phi(&TestFunctionPhi::heavy_symmetric(1.2), &model, CphiConvention::default())
            .unwrap_err();
        assert!(matches!(e, CphiError::Divergent { .. }));
        assert!(e.to_string().contains("integral diverges"));
    }

    #[test]
    fn cphi_rejects_nonzero_integral() {
        let model = LevyModel::pure_stable(1.5);
        let e = c_phi(&TestFunctionPhi::indicator(0.0, 1.0), &model, CphiConvention::default());
        assert!(matches!(e, Err(CphiError::NonZeroIntegral(_))));
    }
}
