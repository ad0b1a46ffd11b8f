//! Occupation functionals: the single-path occupation and Rosen functionals
//! and the particle-system functional `G_t^T` in the three limit regimes.

mod engine;
mod occupation;

pub use engine::{
    particle_functional_sample, ParticleRun, ParticleSystem, PathSource, RunPlan, WindowPolicy,
};
pub use occupation::HEAVY_FINE_STEP;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LevyModel, LimitSpec, TestFunctionPhi};
use crate::parallel::map_indexed;
use crate::quad::QuadError;
use crate::sampling::{steps_before, PathSimulator, RngSpec, SamplingError, StreamRng};

pub const SAMPLE_JSONL_SCHEMA: &str = "hsssi.functional-sample.v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("observation times must be non-empty, sorted and non-negative")]
    BadTimes,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Which functional produced a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regime {
    /// Rescaled single-path occupation functional `P_t^T(x)`.
    Prop1 { x: f64 },
    /// Normalized Rosen functional.
    Rosen,
    /// Particle functional `G_t^T`.
    Particle { spec: LimitSpec },
    /// Draw from the limit law itself.
    Limit { spec: LimitSpec },
}

/// One replica of a functional observed at several times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub regime: Regime,
    #[serde(rename = "T")]
    pub t_scale: f64,
    pub seed: u64,
    pub replica: u64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl FunctionalSample {
    /// `Σ_j a_j · values[j]`.
    pub fn combine(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().zip(&self.values).map(|(a, v)| a * v).sum()
    }
}

/// One JSON record per line, preceded by a schema comment line.
pub fn write_jsonl<W: Write>(samples: &[FunctionalSample], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "# schema: {SAMPLE_JSONL_SCHEMA}")?;
    for s in samples {
        serde_json::to_writer(&mut *w, s)?;
        writeln!(w)?;
    }
    Ok(())
}

pub(crate) fn check_times(times: &[f64]) -> Result<(), FunctionalError> {
    if times.is_empty()
        || times.iter().any(|t| !(*t >= 0.0 && t.is_finite()))
        || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(FunctionalError::BadTimes);
    }
    Ok(())
}

/// Streams a path from 0 and returns `dt Σ_{k<n} φ(η_k + shift)` at each
/// sorted cutoff `n`.
fn streamed_occupation(
    sim: &PathSimulator,
    rng: &mut StreamRng,
    phi: &TestFunctionPhi,
    shift: f64,
    cutoffs: &[usize],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(cutoffs.len());
    let mut acc = 0.0;
    let mut x = 0.0;
    let mut k = 0usize;
    for &n in cutoffs {
        while k < n {
            if k > 0 {
                x += sim.increment(rng);
            }
            acc += phi.eval(x + shift);
            k += 1;
        }
        out.push(acc * sim.dt());
    }
    out
}

/// Normalization `(F_T, D_T)` of the occupation functional.
pub fn prop1_normalization(model: &LevyModel, t_scale: f64) -> (f64, f64) {
    let b = model.beta();
    let fs = model.slowly_varying().eval(t_scale.powf(1.0 / b));
    (t_scale.powf(1.0 - 1.0 / b) / fs, t_scale / fs)
}

/// `P_t^T(x) = F_T^{-1} ∫_0^{D_T t} φ(η_s − T^{1/β} x) ds` for every `T` in
/// `ladder`, all read off prefixes of one path.
pub fn prop1_ladder(
    model: &LevyModel,
    phi: &TestFunctionPhi,
    ladder: &[f64],
    x: f64,
    times: &[f64],
    dt: f64,
    rng: &RngSpec,
) -> Result<Vec<FunctionalSample>, FunctionalError> {
    if phi.integral() == 0.0 {
        return Err(FunctionalError::Precondition("the occupation functional needs ∫φ ≠ 0".into()));
    }
    check_times(times)?;
    let sim = PathSimulator::new(model, dt)?;
    let beta = model.beta();
    let base = rng.rng();
    let mut out = Vec::with_capacity(ladder.len());
    for &t_scale in ladder {
        let (f_t, d_t) = prop1_normalization(model, t_scale);
        let shift = -t_scale.powf(1.0 / beta) * x;
        let cutoffs: Vec<usize> = times.iter().map(|&t| steps_before(d_t * t, dt)).collect();
        // restarting from the same generator state replays the same path
        let values = streamed_occupation(&sim, &mut base.clone(), phi, shift, &cutoffs)
            .into_iter()
            .map(|v| v / f_t)
            .collect();
        out.push(FunctionalSample {
            regime: Regime::Prop1 { x },
            t_scale,
            seed: rng.seed,
            replica: rng.stream_id,
            times: times.to_vec(),
            values,
            warning: None,
        });
    }
    Ok(out)
}

/// Single-`T` form of [`prop1_ladder`].
pub fn prop1_sample(
    model: &LevyModel,
    phi: &TestFunctionPhi,
    t_scale: f64,
    x: f64,
    times: &[f64],
    dt: f64,
    rng: &RngSpec,
) -> Result<FunctionalSample, FunctionalError> {
    Ok(prop1_ladder(model, phi, &[t_scale], x, times, dt, rng)?.remove(0))
}

/// `F_T^{-1/2} ∫_0^{T t} φ(ξ_s) ds` with `F_T = T^{1-1/β}` for every `T` in
/// `ladder`, read off prefixes of one stable path.
pub fn rosen_ladder(
    beta: f64,
    phi: &TestFunctionPhi,
    ladder: &[f64],
    times: &[f64],
    dt: f64,
    rng: &RngSpec,
) -> Result<Vec<FunctionalSample>, FunctionalError> {
    if phi.integral().abs() > 1e-12 {
        return Err(FunctionalError::Precondition(
            "the Rosen functional needs ∫φ = 0".into(),
        ));
    }
    if phi.tail_exponent().is_some() {
        return Err(FunctionalError::Precondition(
            "the Rosen functional needs a compactly supported φ".into(),
        ));
    }
    check_times(times)?;
    let sim = PathSimulator::new(&LevyModel::pure_stable(beta), dt)?;
    let mut cuts: Vec<(usize, usize, usize)> = Vec::new();
    for (li, &t_scale) in ladder.iter().enumerate() {
        for (ti, &t) in times.iter().enumerate() {
            cuts.push((steps_before(t_scale * t, dt), li, ti));
        }
    }
    cuts.sort();
    let ns: Vec<usize> = cuts.iter().map(|c| c.0).collect();
    let occ = streamed_occupation(&sim, &mut rng.rng(), phi, 0.0, &ns);
    let mut values = vec![vec![0.0; times.len()]; ladder.len()];
    for ((_, li, ti), v) in cuts.iter().zip(occ) {
        let f_t = ladder[*li].powf(1.0 - 1.0 / beta);
        values[*li][*ti] = v / f_t.sqrt();
    }
    Ok(ladder
        .iter()
        .zip(values)
        .map(|(&t_scale, values)| FunctionalSample {
            regime: Regime::Rosen,
            t_scale,
            seed: rng.seed,
            replica: rng.stream_id,
            times: times.to_vec(),
            values,
            warning: None,
        })
        .collect())
}

pub fn rosen_sample(
    beta: f64,
    phi: &TestFunctionPhi,
    t_scale: f64,
    times: &[f64],
    dt: f64,
    rng: &RngSpec,
) -> Result<FunctionalSample, FunctionalError> {
    Ok(rosen_ladder(beta, phi, &[t_scale], times, dt, rng)?.remove(0))
}

/// Transposes per-replica ladders into per-`T` sample sets.
fn by_scale(rows: Vec<Vec<FunctionalSample>>, ladder_len: usize) -> Vec<Vec<FunctionalSample>> {
    let mut out: Vec<Vec<FunctionalSample>> = (0..ladder_len).map(|_| Vec::with_capacity(rows.len())).collect();
    for row in rows {
        for (li, s) in row.into_iter().enumerate() {
            out[li].push(s);
        }
    }
    out
}

/// `replicas` independent occupation-functional ladders; result indexed `[T][replica]`.
#[allow(clippy::too_many_arguments)]
pub fn prop1_experiment(
    model: &LevyModel,
    phi: &TestFunctionPhi,
    ladder: &[f64],
    x: f64,
    times: &[f64],
    dt: f64,
    seed: u64,
    replicas: usize,
) -> Result<Vec<Vec<FunctionalSample>>, FunctionalError> {
    let rows: Result<Vec<_>, _> = map_indexed(replicas, |r| {
        prop1_ladder(model, phi, ladder, x, times, dt, &RngSpec::new(seed, r as u64))
    })
    .into_iter()
    .collect();
    Ok(by_scale(rows?, ladder.len()))
}

/// `replicas` independent Rosen ladders; result indexed `[T][replica]`.
pub fn rosen_experiment(
    beta: f64,
    phi: &TestFunctionPhi,
    ladder: &[f64],
    times: &[f64],
    dt: f64,
    seed: u64,
    replicas: usize,
) -> Result<Vec<Vec<FunctionalSample>>, FunctionalError> {
    let rows: Result<Vec<_>, _> = map_indexed(replicas, |r| {
        rosen_ladder(beta, phi, ladder, times, dt, &RngSpec::new(seed, r as u64))
    })
    .into_iter()
    .collect();
    Ok(by_scale(rows?, ladder.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prop1_is_linear_in_phi() {
        let m = LevyModel::pure_stable(1.5);
        let phi = TestFunctionPhi::indicator(-0.5, 0.5);
        let rng = RngSpec::new(3, 7);
        let a = prop1_sample(&m, &phi, 100.0, 0.0, &[0.5, 1.0], 0.25, &rng).unwrap();
        let b = prop1_sample(&m, &phi.scaled(2.5), 100.0, 0.0, &[0.5, 1.0], 0.25, &rng).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((2.5 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        assert!(a.values[0] <= a.values[1]);
    }

    #[test]
    fn prop1_ladder_matches_single_scale() {
        let m = LevyModel::pure_stable(1.5);
        let phi = TestFunctionPhi::indicator(-0.5, 0.5);
        let rng = RngSpec::new(1, 0);
        let ladder = prop1_ladder(&m, &phi, &[100.0, 1000.0], 0.0, &[1.0], 0.25, &rng).unwrap();
        let single = prop1_sample(&m, &phi, 1000.0, 0.0, &[1.0], 0.25, &rng).unwrap();
        assert_eq!(ladder[1].values, single.values);
    }

    #[test]
    fn preconditions() {
        let m = LevyModel::pure_stable(1.5);
        assert!(prop1_sample(&m, &TestFunctionPhi::haar(), 10.0, 0.0, &[1.0], 0.1, &RngSpec::new(0, 0)).is_err());
        let ind = TestFunctionPhi::indicator(0.0, 1.0);
        assert!(rosen_sample(1.5, &ind, 10.0, &[1.0], 0.1, &RngSpec::new(0, 0)).is_err());
        assert!(rosen_sample(1.5, &TestFunctionPhi::haar(), 10.0, &[1.0, 0.5], 0.1, &RngSpec::new(0, 0)).is_err());
    }

    #[test]
    fn rosen_ladder_matches_single_scale() {
        let phi = TestFunctionPhi::haar();
        let rng = RngSpec::new(2, 5);
        let l = rosen_ladder(1.5, &phi, &[10.0, 100.0], &[0.5, 1.0], 0.05, &rng).unwrap();
        let s = rosen_sample(1.5, &phi, 100.0, &[0.5, 1.0], 0.05, &rng).unwrap();
        assert_eq!(l[1].values, s.values);
    }

    #[test]
    fn jsonl_round_trip() {
        let phi = TestFunctionPhi::haar();
        let s = rosen_sample(1.5, &phi, 10.0, &[1.0], 0.05, &RngSpec::new(2, 5)).unwrap();
        let mut buf = Vec::new();
        write_jsonl(std::slice::from_ref(&s), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert!(line.contains("\"T\":10.0"));
        let back: FunctionalSample = serde_json::from_str(line).unwrap();
        assert_eq!(back, s);
    }
}
