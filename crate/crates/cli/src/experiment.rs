use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use hsssi::analysis::{
    cf_compare_scaled, ecf, fit_common_scale, moment_trend, write_ladder_csv, CompareOptions, ConvergenceLadder,
    EcfReport, TargetCf,
};
use hsssi::functionals::{prop1_experiment, rosen_experiment, write_jsonl, FunctionalSample, ParticleSystem};
use hsssi::limits::{limit_cf, BrownianMethod, CfEstimate, CfQuery, KernelVariant, LimitKernel};
use hsssi::localtime::local_time_moment_exact;
use hsssi::model::{c_phi, Family, LevyModel, LimitSpec};
use hsssi::RngSpec;

use crate::config::{ExperimentConfig, PoolConfig, RegimeConfig};
use crate::CliError;

pub const SUMMARY_SCHEMA: &str = "hsssi.run-summary.v1";
pub const MOMENTS_CSV_SCHEMA: &str = "hsssi.moment-ladder.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub name: String,
    pub regime: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

struct Artifacts<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl Artifacts<'_> {
    fn write(&mut self, name: String, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(&name);
        let mut w = BufWriter::new(File::create(&path).map_err(|e| CliError::io(&path, e))?);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
        self.names.push(name);
        Ok(())
    }
}

/// Executes the experiment and writes its artifacts and `summary.json` into
/// the output directory.
pub fn run(config: &ExperimentConfig) -> Result<Summary, CliError> {
    config.check()?;
    std::fs::create_dir_all(&config.output).map_err(|e| CliError::io(&config.output, e))?;
    let mut art = Artifacts {
        dir: &config.output,
        names: Vec::new(),
    };
    art.write("config.json".into(), |w| writeln!(w, "{}", config.to_json()))?;
    let mut warnings = Vec::new();
    let checks = match &config.regime {
        RegimeConfig::Prop1 { x, dt } => run_prop1(config, *x, *dt, &mut art)?,
        RegimeConfig::Rosen { dt, convention } => {
            let model = LevyModel::pure_stable(config.params.beta);
            let cphi = c_phi(&config.phi, &model, *convention).map_err(CliError::run)?;
            run_rosen(config, *dt, cphi, &mut art)?
        }
        RegimeConfig::Particles {
            family,
            source,
            dt,
            min_steps,
            limit,
            ..
        } => {
            let spec = LimitSpec::new(*family, config.params).map_err(CliError::violations)?;
            let mut sys = ParticleSystem::new(spec, motion(config), config.weight_l, config.phi.clone())
                .map_err(CliError::run)?;
            sys.window = config.window;
            sys.source = *source;
            if let Some(dt) = dt {
                sys.dt = *dt;
            }
            if let Some(n) = min_steps {
                sys.min_steps = *n;
            }
            let targets = limit_targets(config, *family, limit)?;
            run_particles(config, &sys, &targets, &mut art, &mut warnings)?
        }
        RegimeConfig::CfLimit { family, limit, .. } => {
            let est = limit_estimates(config, *family, limit)?;
            for (k, e) in est.iter().enumerate() {
                art.write(format!("cf_p{k}.csv"), |w| e.write_csv(w))?;
                warnings.extend(e.flag.clone());
            }
            Vec::new()
        }
    };
    let summary = Summary {
        schema: SUMMARY_SCHEMA.into(),
        name: config.name.clone(),
        regime: config.regime.command().into(),
        seed: config.seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
        artifacts: art.names.clone(),
        warnings,
    };
    art.write("summary.json".into(), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)
    })?;
    Ok(summary)
}

fn motion(config: &ExperimentConfig) -> LevyModel {
    if config.motion_f.is_constant() && config.motion_f.eval(0.0) == 1.0 {
        LevyModel::pure_stable(config.params.beta)
    } else {
        LevyModel::rv_density(config.params.beta, config.motion_f)
    }
}

fn write_samples(art: &mut Artifacts, t: f64, samples: &[FunctionalSample]) -> Result<(), CliError> {
    art.write(format!("samples_T{t:e}.jsonl"), |w| write_jsonl(samples, w))
}

fn last_time_values(samples: &[FunctionalSample]) -> Vec<f64> {
    samples.iter().map(|s| *s.values.last().expect("non-empty times")).collect()
}

fn ladder_checks(name: &str, ladder: &ConvergenceLadder, trend: bool) -> Vec<Check> {
    let last = ladder.rungs.last().expect("non-empty ladder");
    let mut out = vec![Check {
        name: format!("{name} at T={:e}", last.t_scale),
        pass: last.pass,
        value: last.distance,
        tolerance: last.tolerance,
    }];
    if trend && ladder.rungs.len() > 1 {
        out.push(Check {
            name: format!("{name} distance non-increasing along the ladder"),
            pass: ladder.non_increasing(),
            value: last.distance,
            tolerance: ladder.rungs[0].distance,
        });
    }
    out
}

fn write_moments(art: &mut Artifacts, ladders: &[(u32, f64, &ConvergenceLadder)]) -> Result<(), CliError> {
    art.write("moments.csv".into(), |w| {
        writeln!(w, "# schema: {MOMENTS_CSV_SCHEMA}")?;
        writeln!(w, "T,order,value,se,target,tolerance,pass")?;
        for (order, target, l) in ladders {
            for r in &l.rungs {
                writeln!(w, "{},{order},{},{},{target},{},{}", r.t_scale, r.value, r.se, r.tolerance, r.pass)?;
            }
        }
        Ok(())
    })
}

fn run_prop1(config: &ExperimentConfig, x: f64, dt: f64, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let per_t = prop1_experiment(
        &motion(config),
        &config.phi,
        &config.ladder,
        x,
        &config.times,
        dt,
        config.seed,
        config.replicas,
    )
    .map_err(CliError::run)?;
    for (t, s) in config.ladder.iter().zip(&per_t) {
        write_samples(art, *t, s)?;
    }
    let series: Vec<(f64, Vec<f64>)> = config
        .ladder
        .iter()
        .zip(&per_t)
        .map(|(t, s)| (*t, last_time_values(s)))
        .collect();
    let t_last = *config.times.last().expect("checked");
    let int_phi = config.phi.integral();
    let mut checks = Vec::new();
    let mut ladders = Vec::new();
    for order in [1u32, 2] {
        let target = int_phi.powi(order as i32)
            * local_time_moment_exact(config.params.beta, t_last, x, order).map_err(CliError::run)?;
        let l = moment_trend(
            &series,
            target,
            order,
            config.checks.moment_tolerance,
            config.checks.k_sigma,
            config.seed,
        )
        .map_err(CliError::run)?;
        checks.extend(ladder_checks(&format!("moment {order}"), &l, true));
        ladders.push((order, target, l));
    }
    write_moments(art, &ladders.iter().map(|(o, t, l)| (*o, *t, l)).collect::<Vec<_>>())?;
    Ok(checks)
}

fn run_rosen(config: &ExperimentConfig, dt: f64, cphi: f64, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let beta = config.params.beta;
    let per_t = rosen_experiment(beta, &config.phi, &config.ladder, &config.times, dt, config.seed, config.replicas)
        .map_err(CliError::run)?;
    for (t, s) in config.ladder.iter().zip(&per_t) {
        write_samples(art, *t, s)?;
    }
    let series: Vec<(f64, Vec<f64>)> = config
        .ladder
        .iter()
        .zip(&per_t)
        .map(|(t, s)| (*t, last_time_values(s)))
        .collect();
    let t_last = *config.times.last().expect("checked");
    let target = cphi * cphi * local_time_moment_exact(beta, t_last, 0.0, 1).map_err(CliError::run)?;
    let k = config.checks.k_sigma;
    let first = moment_trend(&series, 0.0, 1, 0.0, k, config.seed).map_err(CliError::run)?;
    let second =
        moment_trend(&series, target, 2, config.checks.moment_tolerance, k, config.seed).map_err(CliError::run)?;
    let mut checks: Vec<Check> = first
        .rungs
        .iter()
        .map(|r| Check {
            name: format!("mean zero at T={:e}", r.t_scale),
            pass: r.pass,
            value: r.distance,
            tolerance: r.tolerance,
        })
        .collect();
    checks.extend(ladder_checks("second moment", &second, true));
    write_moments(art, &[(1, 0.0, &first), (2, target, &second)])?;
    Ok(checks)
}

fn limit_kernel(config: &ExperimentConfig, family: Family) -> Result<LimitKernel, CliError> {
    Ok(match family {
        Family::FirstOrder => LimitKernel::LocalTime {
            int_phi: config.phi.integral(),
        },
        Family::SecondOrder => {
            let convention = match config.regime {
                RegimeConfig::Particles { convention, .. } | RegimeConfig::CfLimit { convention, .. } => convention,
                _ => Default::default(),
            };
            LimitKernel::Brownian {
                cphi: c_phi(&config.phi, &motion(config), convention).map_err(CliError::run)?,
                method: BrownianMethod::Sampled,
            }
        }
        _ => LimitKernel::Heavy {
            variant: KernelVariant::from_family(&family).expect("heavy family"),
        },
    })
}

fn limit_estimates(config: &ExperimentConfig, family: Family, limit: &PoolConfig) -> Result<Vec<CfEstimate>, CliError> {
    LimitSpec::new(family, config.params).map_err(CliError::violations)?;
    let kernel = limit_kernel(config, family)?;
    let seed = RngSpec::new(config.seed, 0).tagged("limit-pool").seed;
    let pool = limit.pool(config.params.beta, seed);
    let queries = config
        .projections()
        .into_iter()
        .map(|a| CfQuery::new(config.theta.clone(), a, config.times.clone()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::run)?;
    limit_cf(&pool, &kernel, config.params.alpha, &queries).map_err(CliError::run)
}

fn limit_targets(config: &ExperimentConfig, family: Family, limit: &PoolConfig) -> Result<Vec<TargetCf>, CliError> {
    Ok(limit_estimates(config, family, limit)?.iter().map(TargetCf::from).collect())
}

fn run_particles(
    config: &ExperimentConfig,
    sys: &ParticleSystem,
    targets: &[TargetCf],
    art: &mut Artifacts,
    warnings: &mut Vec<String>,
) -> Result<Vec<Check>, CliError> {
    let projections = config.projections();
    let opts = CompareOptions {
        k_sigma: config.checks.k_sigma,
        ..Default::default()
    };
    let mut rows: Vec<Vec<(f64, EcfReport, hsssi::CfComparison)>> = vec![Vec::new(); projections.len()];
    let mut distances = Vec::new();
    let mut checks = Vec::new();
    for &t in &config.ladder {
        let run = sys.run(t, &config.times, config.seed, config.replicas).map_err(CliError::run)?;
        warnings.extend(run.plan.warning.clone());
        write_samples(art, t, &run.samples)?;
        let ecfs = projections
            .iter()
            .map(|a| ecf(&run.samples, a, &config.times, &config.theta))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::run)?;
        let pairs: Vec<(&EcfReport, &TargetCf)> = ecfs.iter().zip(targets).collect();
        let lambda = if config.checks.fit_scale {
            fit_common_scale(&pairs).map_err(CliError::run)?
        } else {
            1.0
        };
        let mut worst: f64 = 0.0;
        for (k, (e, target)) in pairs.iter().enumerate() {
            let c = cf_compare_scaled(e, target, lambda, opts).map_err(CliError::run)?;
            worst = worst.max(c.sup_distance);
            if t == *config.ladder.last().expect("checked") {
                checks.push(Check {
                    name: format!("CF of projection {k} at T={t:e} (λ={lambda:.4})"),
                    pass: c.pass,
                    value: c.max_sigma,
                    tolerance: opts.k_sigma,
                });
            }
            rows[k].push((t, (*e).clone(), c));
        }
        distances.push(worst);
    }
    if distances.len() > 1 {
        checks.push(Check {
            name: "CF distance strictly decreasing along the ladder".into(),
            pass: distances.windows(2).all(|w| w[1] < w[0]),
            value: *distances.last().expect("non-empty"),
            tolerance: distances[0],
        });
    }
    for (k, r) in rows.iter().enumerate() {
        let refs: Vec<(f64, &EcfReport, &hsssi::CfComparison)> = r.iter().map(|(t, e, c)| (*t, e, c)).collect();
        art.write(format!("ladder_p{k}.csv"), |w| write_ladder_csv(w, &refs))?;
    }
    Ok(checks)
}
