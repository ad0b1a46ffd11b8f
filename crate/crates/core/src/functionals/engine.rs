use std::sync::Arc;

use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::occupation::{direct_occupation, shared_kernel, HeavyTails, PathOccupation, SmoothedKernel};
use super::{check_times, FunctionalError, FunctionalSample, Regime};
use crate::model::{
    normalization, validate, Family, LevyModel, LimitSpec, ModelParams, Normalization, SlowlyVarying,
    TestFunctionPhi,
};
use crate::parallel::map_indexed;
use crate::sampling::{
    sample_field_with, steps_before, weight_mass, PathSimulator, RngSpec, SamplingError, TailSampler,
};

/// Particle positions are kept on `|C_T x| ≤ k · D_T^{1/β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowPolicy {
    pub k: f64,
    /// Largest acceptable truncation estimate before a warning is attached.
    pub tolerance: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy { k: 10.0, tolerance: 0.05 }
    }
}

impl WindowPolicy {
    /// Estimated relative contribution of the region beyond the window, in
    /// limit coordinates at the largest time `t`.
    ///
    /// For local-time kernels this is the share of occupation time spent
    /// beyond `k`, from the stable density tail `C|x|^{-1-β}`. For the
    /// heavy-tail kernels `|Z_t(x)| ≈ t|x|^{-γ}` it is the share of
    /// `∫|Z|^α dx` beyond `k`.
    pub fn truncation_estimate(&self, family: &Family, params: &ModelParams, t: f64) -> f64 {
        let (a, b) = (params.alpha, params.beta);
        let k = self.k;
        match family.gamma() {
            None => {
                let c = statrs::function::gamma::gamma(b + 1.0) * (std::f64::consts::PI * b / 2.0).sin()
                    / std::f64::consts::PI;
                (c * t * k.powf(-b) / b).min(1.0)
            }
            Some(g) => {
                let r = k / t.max(1e-12).powf(1.0 / b);
                let p = g * a - 1.0;
                let outside = r.powf(-p) / p;
                outside / (1.0 + (1.0 - r.powf(-p)) / p + outside)
            }
        }
    }
}

/// How particle trajectories are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathSource {
    /// One independent path per particle.
    Fresh,
    /// Each particle draws a path uniformly from a pool of `size` paths; a new
    /// pool is simulated for every `batch` replicas.
    Pool { size: usize, batch: usize },
}

impl Default for PathSource {
    fn default() -> Self {
        PathSource::Pool { size: 4000, batch: 1000 }
    }
}

/// Everything fixed by `T` and the observation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub t_scale: f64,
    pub times: Vec<f64>,
    pub norm: Normalization,
    pub dt: f64,
    /// Path points entering each observation time.
    pub counts: Vec<usize>,
    /// Half-width of the particle window in particle coordinates.
    pub half_width: f64,
    pub truncation: f64,
    pub warning: Option<String>,
}

/// Samples of one run, with the plan that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRun {
    pub plan: RunPlan,
    pub samples: Vec<FunctionalSample>,
}

/// The particle system `Σ_j z_j ∫_0^{D_T t} φ(C_T x_j + η^j_u) du` and its
/// simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    pub spec: LimitSpec,
    pub motion: LevyModel,
    /// Slowly varying factor of the weight intensity.
    pub weight_l: SlowlyVarying,
    pub phi: TestFunctionPhi,
    pub window: WindowPolicy,
    pub source: PathSource,
    /// Largest time step, in the time units of the motion.
    pub dt: f64,
    /// Fewest steps per path at the largest observation time.
    pub min_steps: usize,
}

struct Context {
    plan: RunPlan,
    sim: PathSimulator,
    kernel: Option<Arc<SmoothedKernel>>,
    tails: Option<HeavyTails>,
    support: Option<(f64, f64)>,
    sampler: TailSampler,
    mass: f64,
    levels: Vec<f64>,
}

impl ParticleSystem {
    pub fn new(
        spec: LimitSpec,
        motion: LevyModel,
        weight_l: SlowlyVarying,
        phi: TestFunctionPhi,
    ) -> Result<Self, FunctionalError> {
        if (motion.beta() - spec.params.beta).abs() > 1e-12 {
            return Err(FunctionalError::Precondition(format!(
                "motion index {} differs from the spec's β = {}",
                motion.beta(),
                spec.params.beta
            )));
        }
        if let Err(v) = validate(&spec.params, &phi, &spec.family) {
            let msg: Vec<String> = v.iter().map(|v| v.to_string()).collect();
            return Err(FunctionalError::Precondition(msg.join("; ")));
        }
        Ok(ParticleSystem {
            spec,
            motion,
            weight_l,
            phi,
            window: WindowPolicy::default(),
            source: PathSource::default(),
            dt: 1.0,
            min_steps: 1000,
        })
    }

    fn g1(&self) -> SlowlyVarying {
        match self.phi {
            TestFunctionPhi::HeavyPair { g1, .. } => SlowlyVarying::Constant(g1),
            _ => SlowlyVarying::Constant(1.0),
        }
    }

    pub fn plan(&self, t_scale: f64, times: &[f64]) -> Result<RunPlan, FunctionalError> {
        check_times(times)?;
        if !(t_scale >= 1.0) {
            return Err(FunctionalError::Precondition(format!("T = {t_scale} must be ≥ 1")));
        }
        let p = &self.spec.params;
        let norm = normalization(
            &self.spec.family,
            t_scale,
            p,
            self.motion.slowly_varying(),
            self.weight_l,
            self.g1(),
        );
        let t_max = *times.last().expect("checked non-empty");
        let horizon = norm.d_t * t_max;
        let dt = if horizon > 0.0 {
            self.dt.min(horizon / self.min_steps.max(1) as f64)
        } else {
            self.dt
        };
        let counts = times.iter().map(|&t| steps_before(norm.d_t * t, dt)).collect();
        let half_width = self.window.k * norm.d_t.powf(1.0 / p.beta) / norm.c_t;
        let truncation = self.window.truncation_estimate(&self.spec.family, p, t_max);
        let warning = (truncation > self.window.tolerance).then(|| {
            format!(
                "window truncation estimate {truncation:.3} exceeds tolerance {}",
                self.window.tolerance
            )
        });
        Ok(RunPlan {
            t_scale,
            times: times.to_vec(),
            norm,
            dt,
            counts,
            half_width,
            truncation,
            warning,
        })
    }

    fn context(&self, t_scale: f64, times: &[f64], levels: &[f64]) -> Result<Context, FunctionalError> {
        if levels.is_empty() || levels.iter().any(|e| !(*e > 0.0)) {
            return Err(FunctionalError::Precondition("cut levels must be positive".into()));
        }
        let plan = self.plan(t_scale, times)?;
        let sim = PathSimulator::new(&self.motion, plan.dt)?;
        let kernel = shared_kernel(&self.phi);
        let eps = levels.iter().copied().fold(f64::INFINITY, f64::min);
        let params = ModelParams {
            epsilon_cut: eps,
            ..self.spec.params
        };
        Ok(Context {
            plan,
            sim,
            kernel,
            tails: HeavyTails::from_phi(&self.phi),
            support: self.phi.support(),
            sampler: TailSampler::new(eps, params.alpha, self.weight_l)?,
            mass: weight_mass(&params, self.weight_l)?,
            levels: levels.to_vec(),
        })
    }

    fn sample_from(&self, ctx: &Context, seed: u64, replica: u64, values: Vec<f64>) -> FunctionalSample {
        FunctionalSample {
            regime: Regime::Particle { spec: self.spec },
            t_scale: ctx.plan.t_scale,
            seed,
            replica,
            times: ctx.plan.times.clone(),
            values,
            warning: ctx.plan.warning.clone(),
        }
    }

    /// Field of replica `r`; the same generator then assigns pool paths.
    fn field_rng(seed: u64, replica: u64) -> crate::sampling::StreamRng {
        RngSpec::new(seed, replica).tagged("field").rng()
    }

    fn fresh_replica(&self, ctx: &Context, seed: u64, replica: u64) -> Result<Vec<Vec<f64>>, SamplingError> {
        let plan = &ctx.plan;
        let mut rng = Self::field_rng(seed, replica);
        let w = plan.half_width;
        let field = sample_field_with(&ctx.sampler, ctx.mass, (-w, w), &mut rng)?;
        let paths = RngSpec::new(seed, replica).tagged("paths");
        let len = plan.counts.iter().copied().max().unwrap_or(0);
        let mut acc = vec![vec![0.0; plan.counts.len()]; ctx.levels.len()];
        let mut buf = Vec::new();
        for (j, part) in field.particles.iter().enumerate() {
            ctx.sim.fill(&mut buf, len, &mut paths.child(j as u64).rng());
            let shift = plan.norm.c_t * part.x;
            for (i, &n) in plan.counts.iter().enumerate() {
                if let Some((a, b)) = ctx.support {
                    let (lo, hi) = buf[..n]
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
                    if n == 0 || shift + hi < a || shift + lo > b {
                        continue;
                    }
                }
                let v = direct_occupation(&buf, n, plan.dt, &self.phi, shift);
                for (l, &eps) in ctx.levels.iter().enumerate() {
                    if part.z.abs() >= eps {
                        acc[l][i] += part.z * v;
                    }
                }
            }
        }
        Ok(acc)
    }

    fn pooled_replica(
        &self,
        ctx: &Context,
        pool: &[PathOccupation],
        seed: u64,
        replica: u64,
    ) -> Result<Vec<Vec<f64>>, SamplingError> {
        let plan = &ctx.plan;
        let mut rng = Self::field_rng(seed, replica);
        let w = plan.half_width;
        let field = sample_field_with(&ctx.sampler, ctx.mass, (-w, w), &mut rng)?;
        let mut acc = vec![vec![0.0; plan.counts.len()]; ctx.levels.len()];
        for part in &field.particles {
            let path = &pool[rng.random_range(0..pool.len())];
            let shift = plan.norm.c_t * part.x;
            for i in 0..plan.counts.len() {
                if path.misses(i, shift, ctx.support) {
                    continue;
                }
                let v = path.occupation(i, shift, &self.phi, ctx.tails.as_ref());
                for (l, &eps) in ctx.levels.iter().enumerate() {
                    if part.z.abs() >= eps {
                        acc[l][i] += part.z * v;
                    }
                }
            }
        }
        Ok(acc)
    }

    fn build_pool(&self, ctx: &Context, seed: u64, batch: u64, size: usize) -> Vec<PathOccupation> {
        let plan = &ctx.plan;
        let len = plan.counts.iter().copied().max().unwrap_or(0);
        let root = RngSpec::new(seed, batch).tagged("pool");
        map_indexed(size, |p| {
            let mut buf = Vec::new();
            ctx.sim.fill(&mut buf, len, &mut root.child(p as u64).rng());
            let mut planner = FftPlanner::new();
            PathOccupation::build(&buf, &plan.counts, plan.dt, &self.phi, ctx.kernel.as_deref(), &mut planner)
        })
    }

    /// Replicas `0..replicas` at every cut level; result indexed `[level][replica]`.
    pub fn run_levels(
        &self,
        t_scale: f64,
        times: &[f64],
        seed: u64,
        replicas: usize,
        levels: &[f64],
    ) -> Result<(RunPlan, Vec<Vec<FunctionalSample>>), FunctionalError> {
        let ctx = self.context(t_scale, times, levels)?;
        let raw: Vec<Result<Vec<Vec<f64>>, SamplingError>> = match self.source {
            PathSource::Fresh => map_indexed(replicas, |r| self.fresh_replica(&ctx, seed, r as u64)),
            PathSource::Pool { size, batch } => {
                if size == 0 || batch == 0 {
                    return Err(FunctionalError::Precondition("pool size and batch must be positive".into()));
                }
                let mut out = Vec::with_capacity(replicas);
                for (b, start) in (0..replicas).step_by(batch).enumerate() {
                    let pool = self.build_pool(&ctx, seed, b as u64, size);
                    let n = batch.min(replicas - start);
                    out.extend(map_indexed(n, |k| {
                        self.pooled_replica(&ctx, &pool, seed, (start + k) as u64)
                    }));
                }
                out
            }
        };
        let scale = ctx.plan.norm.scale;
        let mut per_level: Vec<Vec<FunctionalSample>> = vec![Vec::with_capacity(replicas); levels.len()];
        for (r, acc) in raw.into_iter().enumerate() {
            for (l, row) in acc?.into_iter().enumerate() {
                let values = row.into_iter().map(|v| v / scale).collect();
                per_level[l].push(self.sample_from(&ctx, seed, r as u64, values));
            }
        }
        Ok((ctx.plan, per_level))
    }

    /// Replicas `0..replicas` at the configured cut `ε`.
    pub fn run(&self, t_scale: f64, times: &[f64], seed: u64, replicas: usize) -> Result<ParticleRun, FunctionalError> {
        let (plan, mut levels) =
            self.run_levels(t_scale, times, seed, replicas, &[self.spec.params.epsilon_cut])?;
        Ok(ParticleRun {
            plan,
            samples: levels.remove(0),
        })
    }
}

/// One replica with an independent path per particle. The replica is
/// identified by `rng.stream_id` under `rng.seed`.
#[allow(clippy::too_many_arguments)]
pub fn particle_functional_sample(
    spec: &LimitSpec,
    motion: &LevyModel,
    weight_l: SlowlyVarying,
    phi: &TestFunctionPhi,
    t_scale: f64,
    times: &[f64],
    window: WindowPolicy,
    rng: &RngSpec,
) -> Result<FunctionalSample, FunctionalError> {
    let mut sys = ParticleSystem::new(*spec, motion.clone(), weight_l, phi.clone())?;
    sys.window = window;
    sys.source = PathSource::Fresh;
    let ctx = sys.context(t_scale, times, &[spec.params.epsilon_cut])?;
    let acc = sys.fresh_replica(&ctx, rng.seed, rng.stream_id)?;
    let values = acc[0].iter().map(|v| v / ctx.plan.norm.scale).collect();
    Ok(sys.sample_from(&ctx, rng.seed, rng.stream_id, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_order() -> ParticleSystem {
        let spec = LimitSpec::new(Family::FirstOrder, ModelParams::new(1.5, 1.5, 1.0)).unwrap();
        ParticleSystem::new(
            spec,
            LevyModel::pure_stable(1.5),
            SlowlyVarying::Constant(1.0),
            TestFunctionPhi::indicator(-1.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn zero_phi_gives_zero() {
        let spec = LimitSpec::new(Family::SecondOrder, ModelParams::new(1.5, 1.5, 1.0)).unwrap();
        let mut sys = ParticleSystem::new(
            spec,
            LevyModel::pure_stable(1.5),
            SlowlyVarying::Constant(1.0),
            TestFunctionPhi::zero(),
        )
        .unwrap();
        sys.source = PathSource::Pool { size: 16, batch: 4 };
        let run = sys.run(10.0, &[0.5, 1.0], 1, 6).unwrap();
        assert!(run.samples.iter().all(|s| s.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn plan_window_and_steps() {
        let sys = first_order();
        let plan = sys.plan(1000.0, &[0.5, 1.0]).unwrap();
        assert!((plan.half_width - 10.0 * 100.0).abs() < 1e-9);
        assert!((plan.dt - 1.0).abs() < 1e-12);
        assert_eq!(plan.counts, vec![500, 1000]);
        assert!(plan.warning.is_none());
    }

    #[test]
    fn runs_are_deterministic_across_thread_counts() {
        let mut sys = first_order();
        sys.source = PathSource::Pool { size: 64, batch: 5 };
        let a = crate::parallel::with_threads(1, || sys.run(20.0, &[0.5, 1.0], 9, 12).unwrap());
        let b = crate::parallel::with_threads(3, || sys.run(20.0, &[0.5, 1.0], 9, 12).unwrap());
        assert_eq!(a, b);
        sys.source = PathSource::Fresh;
        let c = crate::parallel::with_threads(1, || sys.run(20.0, &[1.0], 9, 3).unwrap());
        let d = crate::parallel::with_threads(2, || sys.run(20.0, &[1.0], 9, 3).unwrap());
        assert_eq!(c, d);
    }

    #[test]
    fn single_sample_matches_fresh_run() {
        let mut sys = first_order();
        sys.source = PathSource::Fresh;
        let run = sys.run(20.0, &[1.0], 4, 3).unwrap();
        let one = particle_functional_sample(
            &sys.spec,
            &sys.motion,
            sys.weight_l,
            &sys.phi,
            20.0,
            &[1.0],
            sys.window,
            &RngSpec::new(4, 2),
        )
        .unwrap();
        assert_eq!(one.values, run.samples[2].values);
    }

    #[test]
    fn cut_levels_share_the_finest_field() {
        let mut sys = first_order();
        sys.source = PathSource::Pool { size: 32, batch: 8 };
        let (_, both) = sys.run_levels(20.0, &[1.0], 3, 4, &[1.0, 0.5]).unwrap();
        let (_, fine) = sys.run_levels(20.0, &[1.0], 3, 4, &[0.5]).unwrap();
        assert_eq!(both[1], fine[0]);
        assert!(both[0].iter().zip(&both[1]).any(|(a, b)| a.values != b.values));
    }

    #[test]
    fn heavy_truncation_warns() {
        let spec = LimitSpec::new(Family::HeavySymmetric { gamma: 1.1 }, ModelParams::new(1.5, 1.5, 1.0)).unwrap();
        let sys = ParticleSystem::new(
            spec,
            LevyModel::pure_stable(1.5),
            SlowlyVarying::Constant(1.0),
            TestFunctionPhi::heavy_symmetric(1.1),
        )
        .unwrap();
        let plan = sys.plan(100.0, &[1.0]).unwrap();
        assert!(plan.warning.is_some());
    }
}
