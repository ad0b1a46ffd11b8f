//! Empirical characteristic functions, CF distances, convergence ladders and
//! scaling checks.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::FunctionalSample;
use crate::limits::{c_alpha, CfEstimate};
use crate::parallel::{map_indexed, pairwise_sum};
use crate::sampling::RngSpec;

pub const LADDER_CSV_SCHEMA: &str = "hsssi.cf-ladder.v1";
pub const DEFAULT_K_SIGMA: f64 = 3.0;
pub const BOOTSTRAP_RESAMPLES: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample has no observation at time {0}")]
    MissingTime(f64),
    #[error("θ grids differ: expected {expected} points, got {got} or different values")]
    GridMismatch { expected: usize, got: usize },
    #[error("a tabulated target cannot be rescaled")]
    NotScalable,
    #[error("{0}")]
    Invalid(String),
}

/// `n` points geometric in `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|k| lo * (r * k as f64).exp()).collect()
}

/// Sixteen points geometric in `[0.1, 4]`.
pub fn default_theta_grid() -> Vec<f64> {
    geometric_grid(0.1, 4.0, 16)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcfReport {
    pub theta: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub se: Vec<f64>,
    pub n: usize,
}

impl EcfReport {
    pub fn value(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }
}

/// `Σ_j a_j X_{t_j}` for every sample.
pub fn project(samples: &[FunctionalSample], coeffs: &[f64], times: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if coeffs.len() != times.len() {
        return Err(AnalysisError::Invalid("coefficients and times differ in length".into()));
    }
    samples
        .iter()
        .map(|s| {
            let mut v = 0.0;
            for (a, t) in coeffs.iter().zip(times) {
                let j = s
                    .times
                    .iter()
                    .position(|u| (u - t).abs() <= 1e-12 * t.abs().max(1.0))
                    .ok_or(AnalysisError::MissingTime(*t))?;
                v += a * s.values[j];
            }
            Ok(v)
        })
        .collect()
}

/// ECF of scalar observations. The standard error of the complex mean uses
/// the plug-in variance, so it never exceeds `1/√N`.
pub fn ecf_values(values: &[f64], theta: &[f64]) -> Result<EcfReport, AnalysisError> {
    let n = values.len();
    if n < 2 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let nf = n as f64;
    let per: Vec<(f64, f64, f64)> = map_indexed(theta.len(), |k| {
        let t = theta[k];
        let c: Vec<f64> = values.iter().map(|x| (t * x).cos()).collect();
        let s: Vec<f64> = values.iter().map(|x| (t * x).sin()).collect();
        let re = pairwise_sum(&c) / nf;
        let im = pairwise_sum(&s) / nf;
        let var = (1.0 - re * re - im * im).max(0.0);
        (re, im, (var / nf).sqrt())
    });
    Ok(EcfReport {
        theta: theta.to_vec(),
        re: per.iter().map(|p| p.0).collect(),
        im: per.iter().map(|p| p.1).collect(),
        se: per.iter().map(|p| p.2).collect(),
        n,
    })
}

/// `ecf(θ) = (1/N) Σ exp(iθ Σ_j a_j X_{t_j})`.
pub fn ecf(samples: &[FunctionalSample], coeffs: &[f64], times: &[f64], theta: &[f64]) -> Result<EcfReport, AnalysisError> {
    ecf_values(&project(samples, coeffs, times)?, theta)
}

/// Reference characteristic function for [`cf_compare`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetCf {
    /// Fixed values on a θ grid.
    Tabulated {
        theta: Vec<f64>,
        values: Vec<Complex64>,
        stderr: Vec<f64>,
    },
    /// `exp(−c(α)|θ|^α I)`, which can be rescaled.
    Stable { alpha: f64, integral: f64, integral_se: f64 },
}

impl From<&CfEstimate> for TargetCf {
    fn from(e: &CfEstimate) -> Self {
        TargetCf::Stable {
            alpha: e.alpha,
            integral: e.integral,
            integral_se: e.integral_se,
        }
    }
}

impl TargetCf {
    /// Values and standard errors on `theta` with coefficients scaled by `lambda`.
    pub fn eval(&self, theta: &[f64], lambda: f64) -> Result<(Vec<Complex64>, Vec<f64>), AnalysisError> {
        match self {
            TargetCf::Tabulated { theta: t, values, stderr } => {
                if t.len() != theta.len() || t.iter().zip(theta).any(|(a, b)| a != b) {
                    return Err(AnalysisError::GridMismatch {
                        expected: theta.len(),
                        got: t.len(),
                    });
                }
                if lambda != 1.0 {
                    return Err(AnalysisError::NotScalable);
                }
                Ok((values.clone(), stderr.clone()))
            }
            TargetCf::Stable {
                alpha,
                integral,
                integral_se,
            } => {
                let est = CfEstimate::from_integral(
                    &theta.iter().map(|t| t * lambda).collect::<Vec<_>>(),
                    *alpha,
                    *integral,
                    *integral_se,
                    0,
                );
                Ok((est.values, est.stderr))
            }
        }
    }

    /// `c(α)·I`, the scale of the stable law, when known.
    pub fn stable_scale(&self) -> Option<f64> {
        match self {
            TargetCf::Stable { alpha, integral, .. } => Some(c_alpha(*alpha) * integral),
            TargetCf::Tabulated { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub k_sigma: f64,
    /// Deterministic error allowance added to every threshold.
    pub quad_tol: f64,
    pub fit_scale: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            k_sigma: DEFAULT_K_SIGMA,
            quad_tol: 0.0,
            fit_scale: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfComparison {
    pub sup_distance: f64,
    /// Largest `|ecf − target|` in units of the combined standard error.
    pub max_sigma: f64,
    pub pass: bool,
    pub fitted_scale: Option<f64>,
    pub target: Vec<Complex64>,
    pub combined_se: Vec<f64>,
    pub pass_at: Vec<bool>,
}

fn misfit(ecf: &EcfReport, target: &TargetCf, lambda: f64) -> Result<f64, AnalysisError> {
    let (v, s) = target.eval(&ecf.theta, lambda)?;
    Ok((0..v.len())
        .map(|i| {
            let d = (ecf.value(i) - v[i]).norm_sqr();
            let w = ecf.se[i] * ecf.se[i] + s[i] * s[i];
            d / w.max(1e-12)
        })
        .sum())
}

/// One scale `λ > 0` on the coefficients minimizing the standardized squared
/// distance summed over all pairs.
pub fn fit_common_scale(pairs: &[(&EcfReport, &TargetCf)]) -> Result<f64, AnalysisError> {
    let total = |u: f64| -> Result<f64, AnalysisError> {
        pairs.iter().map(|(e, t)| misfit(e, t, u.exp())).sum()
    };
    let (lo, hi, n) = (-7.0f64, 7.0f64, 141);
    let grid: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let mut best = (0, f64::INFINITY);
    for (k, u) in grid.iter().enumerate() {
        let m = total(*u)?;
        if m < best.1 {
            best = (k, m);
        }
    }
    let mut a = grid[best.0.saturating_sub(1)];
    let mut b = grid[(best.0 + 1).min(n - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if total(c)? < total(d)? {
            b = d;
        } else {
            a = c;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Sup distance between an ECF and a target CF, passing when every θ is
/// within `k_sigma` combined standard errors plus `quad_tol`.
pub fn cf_compare(ecf: &EcfReport, target: &TargetCf, opts: CompareOptions) -> Result<CfComparison, AnalysisError> {
    let lambda = if opts.fit_scale { fit_common_scale(&[(ecf, target)])? } else { 1.0 };
    let mut c = cf_compare_scaled(ecf, target, lambda, opts)?;
    c.fitted_scale = opts.fit_scale.then_some(lambda);
    Ok(c)
}

/// [`cf_compare`] at a given scale `λ`.
pub fn cf_compare_scaled(
    ecf: &EcfReport,
    target: &TargetCf,
    lambda: f64,
    opts: CompareOptions,
) -> Result<CfComparison, AnalysisError> {
    let (values, tse) = target.eval(&ecf.theta, lambda)?;
    let mut sup = 0.0f64;
    let mut max_sigma = 0.0f64;
    let mut pass_at = Vec::with_capacity(values.len());
    let mut combined = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let d = (ecf.value(i) - values[i]).norm();
        let se = (ecf.se[i] * ecf.se[i] + tse[i] * tse[i]).sqrt();
        sup = sup.max(d);
        if se > 0.0 {
            max_sigma = max_sigma.max(d / se);
        } else if d > 0.0 {
            max_sigma = f64::INFINITY;
        }
        pass_at.push(d <= opts.k_sigma * se + opts.quad_tol);
        combined.push(se);
    }
    Ok(CfComparison {
        sup_distance: sup,
        max_sigma,
        pass: pass_at.iter().all(|p| *p),
        fitted_scale: (lambda != 1.0).then_some(lambda),
        target: values,
        combined_se: combined,
        pass_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub deviation: f64,
    /// Largest deviation in units of the combined standard error.
    pub max_sigma: f64,
}

const UNDERFLOW_FLOOR: f64 = 1e-12;

fn deviation(a: &(Vec<Complex64>, Vec<f64>), b: &(Vec<Complex64>, Vec<f64>)) -> DeviationReport {
    let mut dev = 0.0f64;
    let mut sig = 0.0f64;
    for i in 0..a.0.len() {
        let d = (a.0[i] - b.0[i]).norm();
        dev = dev.max(d);
        // both values lost to underflow: nothing to distinguish
        if d <= UNDERFLOW_FLOOR {
            continue;
        }
        let se = (a.1[i] * a.1[i] + b.1[i] * b.1[i]).sqrt();
        if se > 0.0 {
            sig = sig.max(d / se);
        } else if d > 0.0 {
            sig = f64::INFINITY;
        }
    }
    DeviationReport {
        deviation: dev,
        max_sigma: sig,
    }
}

/// `max_θ |Φ_{ct}(θ) − Φ_t(c^H θ)|`, where `cf(times, theta)` returns values
/// and standard errors.
pub fn selfsim_check<F>(cf: F, times: &[f64], theta: &[f64], h: f64, c: f64) -> Result<DeviationReport, AnalysisError>
where
    F: Fn(&[f64], &[f64]) -> (Vec<Complex64>, Vec<f64>),
{
    if !(c > 0.0) {
        return Err(AnalysisError::Invalid("the time scale must be positive".into()));
    }
    let scaled: Vec<f64> = times.iter().map(|t| c * t).collect();
    let left = cf(&scaled, theta);
    let right = cf(times, &theta.iter().map(|t| c.powf(h) * t).collect::<Vec<_>>());
    Ok(deviation(&left, &right))
}

/// Largest pairwise deviation among CFs that should coincide.
pub fn max_spread(cfs: &[(Vec<Complex64>, Vec<f64>)]) -> DeviationReport {
    let mut out = DeviationReport {
        deviation: 0.0,
        max_sigma: 0.0,
    };
    for i in 0..cfs.len() {
        for j in i + 1..cfs.len() {
            let d = deviation(&cfs[i], &cfs[j]);
            out.deviation = out.deviation.max(d.deviation);
            out.max_sigma = out.max_sigma.max(d.max_sigma);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    #[serde(rename = "T")]
    pub t_scale: f64,
    pub value: f64,
    pub se: f64,
    pub distance: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLadder {
    pub rungs: Vec<LadderRung>,
}

impl ConvergenceLadder {
    pub fn new(mut rungs: Vec<LadderRung>) -> Self {
        rungs.sort_by(|a, b| a.t_scale.total_cmp(&b.t_scale));
        ConvergenceLadder { rungs }
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rungs.windows(2).all(|w| w[1].distance < w[0].distance)
    }

    pub fn non_increasing(&self) -> bool {
        self.rungs.windows(2).all(|w| w[1].distance <= w[0].distance)
    }

    pub fn final_pass(&self) -> bool {
        self.rungs.last().is_some_and(|r| r.pass)
    }
}

fn raw_moment(xs: &[f64], order: u32) -> f64 {
    let p: Vec<f64> = xs.iter().map(|x| x.powi(order as i32)).collect();
    pairwise_sum(&p) / xs.len() as f64
}

/// Empirical moment with a bootstrap standard error.
pub fn bootstrap_moment(xs: &[f64], order: u32, rng: &RngSpec) -> (f64, f64) {
    let m = raw_moment(xs, order);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let mut r = rng.rng();
    let mut buf = vec![0.0; xs.len()];
    let reps: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[r.random_range(0..xs.len())];
            }
            raw_moment(&buf, order)
        })
        .collect();
    let mean = pairwise_sum(&reps) / reps.len() as f64;
    let var = reps.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps.len() - 1) as f64;
    (m, var.sqrt())
}

/// Per `T`, the raw moment of `order` against `target`. A nonzero target is
/// met when the relative error is at most `tolerance`; a zero target when the
/// moment lies within `k_sigma` bootstrap errors of zero.
pub fn moment_trend(
    ladder: &[(f64, Vec<f64>)],
    target: f64,
    order: u32,
    tolerance: f64,
    k_sigma: f64,
    seed: u64,
) -> Result<ConvergenceLadder, AnalysisError> {
    if ladder.is_empty() {
        return Err(AnalysisError::Invalid("empty ladder".into()));
    }
    if !matches!(order, 1 | 2 | 4) {
        return Err(AnalysisError::Invalid(format!("moment order {order} is not 1, 2 or 4")));
    }
    let base = RngSpec::new(seed, order as u64).tagged("bootstrap");
    let rungs = ladder
        .iter()
        .enumerate()
        .map(|(k, (t, xs))| {
            let (m, se) = bootstrap_moment(xs, order, &base.child(k as u64));
            let distance = (m - target).abs();
            let (tol, pass) = if target != 0.0 {
                (tolerance * target.abs(), distance <= tolerance * target.abs())
            } else {
                (k_sigma * se, distance <= k_sigma * se)
            };
            LadderRung {
                t_scale: *t,
                value: m,
                se,
                distance,
                tolerance: tol,
                pass,
            }
        })
        .collect();
    Ok(ConvergenceLadder::new(rungs))
}

/// CF distances along a ladder of `T`, with the CSV rows of each rung.
pub fn cf_ladder(
    ecfs: &[(f64, EcfReport)],
    target: &TargetCf,
    opts: CompareOptions,
) -> Result<(ConvergenceLadder, Vec<CfComparison>), AnalysisError> {
    let mut rungs = Vec::new();
    let mut cmps = Vec::new();
    for (t, e) in ecfs {
        let c = cf_compare(e, target, opts)?;
        let k = c
            .pass_at
            .iter()
            .zip(&c.combined_se)
            .map(|(_, se)| opts.k_sigma * se + opts.quad_tol)
            .fold(f64::INFINITY, f64::min);
        rungs.push(LadderRung {
            t_scale: *t,
            value: c.max_sigma,
            se: 0.0,
            distance: c.sup_distance,
            tolerance: k,
            pass: c.pass,
        });
        cmps.push(c);
    }
    Ok((ConvergenceLadder { rungs }, cmps))
}

pub fn write_ladder_csv<W: Write>(w: &mut W, rows: &[(f64, &EcfReport, &CfComparison)]) -> std::io::Result<()> {
    writeln!(w, "# schema: {LADDER_CSV_SCHEMA}")?;
    writeln!(w, "T,theta,ecf_re,ecf_im,se,target_re,target_im,pass")?;
    for (t, e, c) in rows {
        for i in 0..e.theta.len() {
            writeln!(
                w,
                "{t},{},{},{},{},{},{},{}",
                e.theta[i], e.re[i], e.im[i], e.se[i], c.target[i].re, c.target[i].im, c.pass_at[i]
            )?;
        }
    }
    Ok(())
}
