use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hsssi::analysis::{cf_compare, default_theta_grid, ecf, CompareOptions, TargetCf, DEFAULT_K_SIGMA};
use hsssi::functionals::FunctionalSample;
use hsssi::limits::{limit_cf, BrownianMethod, CfQuery, KernelVariant, LimitKernel, LimitPool};
use hsssi::localtime::local_time_moment_exact;
use hsssi::model::SlowlyVarying;
use hsssi::sampling::{write_path_binary, PathSimulator};
use hsssi::{LevyModel, RngSpec};
use hsssi_cli::{preset, report, run, summary_exit_code, CliError, ExperimentConfig};
use num_complex::Complex64;

#[derive(Parser)]
#[command(name = "hsssi", version, about = "Simulation laboratory for occupation functionals and their H-sssi limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a config describes.
    Run(Source),
    /// Check a config without running it.
    Validate(Source),
    /// Simulate one stable path.
    SimulatePath(PathArgs),
    /// Exact moment `E L_t(x)^n` of stable local time.
    LocaltimeMoments(MomentArgs),
    /// Run a single-path occupation functional experiment.
    Prop1(Source),
    /// Run a Rosen functional experiment.
    Rosen(Source),
    /// Run a particle-system experiment against its limit.
    Particles(Source),
    /// Limit characteristic function, from a config or from flags.
    CfLimit(CfArgs),
    /// Compare the ECF of a sample file with a tabulated CF.
    Compare(CompareArgs),
    /// Aggregate the summaries of a run directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
struct Source {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled config: thm1-small, prop1-small or rosen-small.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

impl Source {
    fn given(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }

    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match (&self.config, &self.preset) {
            (Some(p), _) => ExperimentConfig::load(p)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => return Err(CliError::Config("give --config or --preset".into())),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.replicas {
            c.replicas = n;
        }
        if let Some(o) = &self.output {
            c.output = o.clone();
        }
        if let Some(l) = &self.ladder {
            c.ladder = l.clone();
        }
        if let Some(t) = &self.times {
            c.times = t.clone();
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SlowlyVaryingArg {
    Constant,
    Log,
    IteratedLog,
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Slowly varying factor of the Lévy density.
    #[arg(long, value_enum, default_value = "constant")]
    f: SlowlyVaryingArg,
    /// Binary output file; CSV on stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MomentArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1)]
    n: u32,
    #[arg(long, default_value_t = 0.0)]
    x: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    FirstOrder,
    SecondOrder,
    HeavySymmetric,
    HeavyAsymmetric,
}

#[derive(Args)]
struct CfArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum, default_value = "first-order")]
    family: FamilyArg,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.5)]
    beta: f64,
    /// Tail exponent of the heavy kernels (the lighter one when asymmetric).
    #[arg(long, default_value_t = 1.1)]
    gamma: f64,
    /// Second tail exponent of the asymmetric kernel.
    #[arg(long, default_value_t = 1.2)]
    gamma2: f64,
    /// `∫φ` for the first-order kernel.
    #[arg(long, default_value_t = 1.0)]
    int_phi: f64,
    /// `c(φ)` for the second-order kernel.
    #[arg(long, default_value_t = 1.0)]
    cphi: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1")]
    coeffs: Vec<f64>,
    #[arg(long = "at", value_delimiter = ',', default_value = "1")]
    at: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "pool-seed", default_value_t = 1)]
    pool_seed: u64,
}

#[derive(Args)]
struct CompareArgs {
    /// JSONL samples.
    #[arg(long)]
    samples: PathBuf,
    /// CSV with columns theta,re,im,stderr.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1")]
    coeffs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    times: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_K_SIGMA)]
    k_sigma: f64,
}

fn main() -> ExitCode {
    hsssi::parallel::init_global_pool();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("hsssi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run_source(source: &Source, command: Option<&str>) -> Result<u8, CliError> {
    let config = source.load()?;
    if let Some(cmd) = command {
        if config.regime.command() != cmd {
            return Err(CliError::Config(format!(
                "this config describes a {} experiment, not {cmd}",
                config.regime.command()
            )));
        }
    }
    let summary = run(&config)?;
    print_json(&summary);
    Ok(summary_exit_code(summary.pass))
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Run(s) => run_source(&s, None),
        Command::Prop1(s) => run_source(&s, Some("prop1")),
        Command::Rosen(s) => run_source(&s, Some("rosen")),
        Command::Particles(s) => run_source(&s, Some("particles")),
        Command::Validate(s) => {
            let c = s.load()?;
            c.check()?;
            println!("valid: {} ({})", c.name, c.regime.command());
            Ok(0)
        }
        Command::SimulatePath(a) => simulate_path(a),
        Command::LocaltimeMoments(a) => {
            let v = local_time_moment_exact(a.beta, a.t, a.x, a.n).map_err(|e| CliError::Config(e.to_string()))?;
            println!("{v:.5}");
            Ok(0)
        }
        Command::CfLimit(a) if a.source.given() => run_source(&a.source, Some("cf-limit")),
        Command::CfLimit(a) => cf_from_flags(a),
        Command::Compare(a) => compare(a),
        Command::Report { dir } => {
            let r = report::report(&dir)?;
            let path = dir.join("report.json");
            let text = serde_json::to_string_pretty(&r).expect("serializable");
            std::fs::write(&path, format!("{text}\n")).map_err(|e| CliError::io(&path, e))?;
            println!("{text}");
            Ok(summary_exit_code(r.pass))
        }
    }
}

fn simulate_path(a: PathArgs) -> Result<u8, CliError> {
    let f = match a.f {
        SlowlyVaryingArg::Constant => SlowlyVarying::Constant(1.0),
        SlowlyVaryingArg::Log => SlowlyVarying::Log,
        SlowlyVaryingArg::IteratedLog => SlowlyVarying::IteratedLog,
    };
    let model = if f.is_constant() {
        LevyModel::pure_stable(a.beta)
    } else {
        LevyModel::rv_density(a.beta, f)
    };
    let sim = PathSimulator::new(&model, a.dt).map_err(|e| CliError::Config(e.to_string()))?;
    if !(a.horizon > 0.0) {
        return Err(CliError::Config("horizon must be positive".into()));
    }
    let path = sim.simulate(a.horizon, &mut RngSpec::new(a.seed, a.stream).rng());
    match a.out {
        Some(p) => {
            let mut w = std::io::BufWriter::new(std::fs::File::create(&p).map_err(|e| CliError::io(&p, e))?);
            write_path_binary(&path, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(&p, e))?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            let res = (|| {
                writeln!(out, "# schema: hsssi.path.v1")?;
                writeln!(out, "t,x")?;
                for (k, x) in path.values.iter().enumerate() {
                    writeln!(out, "{},{x}", k as f64 * path.dt)?;
                }
                Ok::<_, std::io::Error>(())
            })();
            res.map_err(|e| CliError::Run(e.to_string()))?;
        }
    }
    Ok(0)
}

fn cf_from_flags(a: CfArgs) -> Result<u8, CliError> {
    let kernel = match a.family {
        FamilyArg::FirstOrder => LimitKernel::LocalTime { int_phi: a.int_phi },
        FamilyArg::SecondOrder => LimitKernel::Brownian {
            cphi: a.cphi,
            method: BrownianMethod::Sampled,
        },
        FamilyArg::HeavySymmetric => LimitKernel::Heavy {
            variant: KernelVariant::Symmetric { gamma: a.gamma },
        },
        FamilyArg::HeavyAsymmetric => LimitKernel::Heavy {
            variant: KernelVariant::Asymmetric {
                gamma1: a.gamma,
                gamma2: a.gamma2,
            },
        },
    };
    let bad = |m: &str| Err(CliError::Config(m.into()));
    if !(a.alpha > 1.0 && a.alpha < 2.0) || !(a.beta > 1.0 && a.beta < 2.0) {
        return bad("alpha and beta must lie in (1, 2)");
    }
    if matches!(kernel, LimitKernel::Heavy { .. }) && !(a.gamma > 1.0 && a.gamma < 1.0 + (a.beta - 1.0) / 2.0) {
        return bad("gamma must lie in (1, 1 + (beta - 1)/2)");
    }
    let query = CfQuery::new(a.theta.unwrap_or_else(default_theta_grid), a.coeffs, a.at)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let pool = LimitPool {
        size: a.paths,
        dt: a.dt,
        ..LimitPool::new(a.beta, a.pool_seed)
    };
    let est = limit_cf(&pool, &kernel, a.alpha, &[query])
        .map_err(CliError::run)?
        .remove(0);
    if let Some(f) = &est.flag {
        eprintln!("hsssi: warning: {f}");
    }
    let mut out = std::io::stdout().lock();
    est.write_csv(&mut out).map_err(|e| CliError::Run(e.to_string()))?;
    Ok(0)
}

fn read_samples(path: &PathBuf) -> Result<Vec<FunctionalSample>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Config(format!("{}: {e}", path.display()))))
        .collect()
}

fn read_target(path: &PathBuf) -> Result<TargetCf, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (mut theta, mut values, mut stderr) = (Vec::new(), Vec::new(), Vec::new());
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("theta") && !l.trim().is_empty()) {
        let f: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("{}: {e} in {line:?}", path.display())))?;
        if f.len() != 4 {
            return Err(CliError::Config(format!("{}: expected theta,re,im,stderr", path.display())));
        }
        theta.push(f[0]);
        values.push(Complex64::new(f[1], f[2]));
        stderr.push(f[3]);
    }
    Ok(TargetCf::Tabulated { theta, values, stderr })
}

fn compare(a: CompareArgs) -> Result<u8, CliError> {
    let samples = read_samples(&a.samples)?;
    let target = read_target(&a.target)?;
    let TargetCf::Tabulated { theta, .. } = &target else {
        unreachable!("tabulated target")
    };
    let e = ecf(&samples, &a.coeffs, &a.times, theta).map_err(|e| CliError::Config(e.to_string()))?;
    let opts = CompareOptions {
        k_sigma: a.k_sigma,
        ..Default::default()
    };
    let c = cf_compare(&e, &target, opts).map_err(|e| CliError::Config(e.to_string()))?;
    print_json(&c);
    Ok(summary_exit_code(c.pass))
}
