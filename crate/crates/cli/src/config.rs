use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hsssi::analysis::default_theta_grid;
use hsssi::model::{validate, CphiConvention, Family, LimitSpec, ModelParams, SlowlyVarying, TestFunctionPhi};
use hsssi::{LimitPool, PathSource, WindowPolicy};

use crate::CliError;

/// One experiment, fully specified. The seed has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub regime: RegimeConfig,
    pub params: ModelParams,
    /// Slowly varying factor of the motion's Lévy density.
    #[serde(default)]
    pub motion_f: SlowlyVarying,
    /// Slowly varying factor of the weight intensity.
    #[serde(default)]
    pub weight_l: SlowlyVarying,
    pub phi: TestFunctionPhi,
    pub ladder: Vec<f64>,
    pub replicas: usize,
    pub times: Vec<f64>,
    #[serde(default = "default_theta_grid")]
    pub theta: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub window: WindowPolicy,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub checks: CheckConfig,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("hsssi-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegimeConfig {
    /// Single-path occupation functional at level `x`.
    Prop1 {
        #[serde(default)]
        x: f64,
        dt: f64,
    },
    /// Normalized Rosen functional of a pure stable path.
    Rosen {
        dt: f64,
        #[serde(default)]
        convention: CphiConvention,
    },
    /// Particle functional against the limit of `family`.
    Particles {
        family: Family,
        #[serde(default)]
        source: PathSource,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        min_steps: Option<usize>,
        #[serde(default)]
        convention: CphiConvention,
        #[serde(default)]
        limit: PoolConfig,
    },
    /// Limit characteristic functions alone.
    CfLimit {
        family: Family,
        #[serde(default)]
        convention: CphiConvention,
        #[serde(default)]
        limit: PoolConfig,
    },
}

impl RegimeConfig {
    pub fn command(&self) -> &'static str {
        match self {
            RegimeConfig::Prop1 { .. } => "prop1",
            RegimeConfig::Rosen { .. } => "rosen",
            RegimeConfig::Particles { .. } => "particles",
            RegimeConfig::CfLimit { .. } => "cf-limit",
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            RegimeConfig::Particles { family, .. } | RegimeConfig::CfLimit { family, .. } => Some(*family),
            _ => None,
        }
    }
}

/// Path pool of the limit characteristic function; its seed is derived from
/// the experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub size: usize,
    pub dt: f64,
    pub half_width: f64,
    pub far_field: bool,
}

impl Default for PoolConfig {
    fn default() -> Self {
        let p = LimitPool::new(1.5, 0);
        PoolConfig {
            size: p.size,
            dt: p.dt,
            half_width: p.half_width,
            far_field: p.far_field,
        }
    }
}

impl PoolConfig {
    pub fn pool(&self, beta: f64, seed: u64) -> LimitPool {
        LimitPool {
            beta,
            size: self.size,
            dt: self.dt,
            half_width: self.half_width,
            far_field: self.far_field,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "default_k_sigma")]
    pub k_sigma: f64,
    /// Relative tolerance of moment checks.
    #[serde(default = "default_moment_tolerance")]
    pub moment_tolerance: f64,
    /// Fit one scale on the coefficients per `T` before comparing CFs.
    #[serde(default)]
    pub fit_scale: bool,
    /// Coefficient vectors over `times`; default: the last time alone and the sum.
    #[serde(default)]
    pub projections: Option<Vec<Vec<f64>>>,
}

fn default_k_sigma() -> f64 {
    hsssi::analysis::DEFAULT_K_SIGMA
}

fn default_moment_tolerance() -> f64 {
    0.05
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            k_sigma: default_k_sigma(),
            moment_tolerance: default_moment_tolerance(),
            fit_scale: false,
            projections: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn projections(&self) -> Vec<Vec<f64>> {
        self.checks.projections.clone().unwrap_or_else(|| {
            let n = self.times.len();
            let mut last = vec![0.0; n];
            last[n - 1] = 1.0;
            if n == 1 {
                vec![last]
            } else {
                vec![last, vec![1.0; n]]
            }
        })
    }

    /// Everything beyond the shape of the file.
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.ladder.is_empty() || self.ladder.iter().any(|t| !(*t >= 1.0 && t.is_finite())) {
            return bad("ladder: every T must be finite and at least 1".into());
        }
        if self.replicas < 2 {
            return bad("replicas: need at least 2".into());
        }
        if self.times.is_empty()
            || self.times.iter().any(|t| !(*t > 0.0 && t.is_finite()))
            || self.times.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("times: need strictly increasing positive times".into());
        }
        if self.theta.is_empty() || self.theta.iter().any(|t| !t.is_finite()) {
            return bad("theta: need finite values".into());
        }
        if !(self.checks.k_sigma > 0.0) || !(self.checks.moment_tolerance > 0.0) {
            return bad("checks: k_sigma and moment_tolerance must be positive".into());
        }
        if self.projections().iter().any(|p| p.len() != self.times.len()) {
            return bad("checks.projections: every vector needs one coefficient per time".into());
        }
        match &self.regime {
            RegimeConfig::Prop1 { dt, .. } | RegimeConfig::Rosen { dt, .. } if !(*dt > 0.0) => {
                return bad("regime.dt must be positive".into());
            }
            RegimeConfig::Prop1 { .. } if self.phi.integral().abs() <= 1e-12 => {
                return bad("prop1 needs ∫φ ≠ 0".into());
            }
            RegimeConfig::Rosen { .. } if self.phi.integral().abs() > 1e-12 => {
                return bad("rosen needs ∫φ = 0".into());
            }
            _ => {}
        }
        let family = self.regime.family().unwrap_or(Family::FirstOrder);
        let spec_check = match self.regime {
            RegimeConfig::Prop1 { .. } | RegimeConfig::Rosen { .. } => LimitSpec::new(family, self.params).map(|_| ()),
            _ => validate(&self.params, &self.phi, &family),
        };
        spec_check.map_err(|v| {
            CliError::Config(v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))
        })
    }
}

/// Bundled configurations, by name.
pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let base = |regime: RegimeConfig, phi: TestFunctionPhi| ExperimentConfig {
        name: name.to_string(),
        regime,
        params: ModelParams::new(1.5, 1.5, 1.0),
        motion_f: SlowlyVarying::default(),
        weight_l: SlowlyVarying::default(),
        phi,
        ladder: vec![1e2, 1e3],
        replicas: 2000,
        times: vec![0.5, 1.0],
        theta: default_theta_grid(),
        seed: 42,
        window: WindowPolicy::default(),
        output: PathBuf::from(name),
        checks: CheckConfig {
            fit_scale: true,
            ..CheckConfig::default()
        },
    };
    match name {
        "thm1-small" => Ok(base(
            RegimeConfig::Particles {
                family: Family::FirstOrder,
                source: PathSource::Pool { size: 2000, batch: 1000 },
                dt: None,
                min_steps: None,
                convention: CphiConvention::default(),
                limit: PoolConfig {
                    size: 4000,
                    ..PoolConfig::default()
                },
            },
            TestFunctionPhi::indicator(-0.5, 1.0),
        )),
        "prop1-small" => Ok(ExperimentConfig {
            times: vec![1.0],
            checks: CheckConfig::default(),
            ..base(RegimeConfig::Prop1 { x: 0.0, dt: 0.1 }, TestFunctionPhi::indicator(-0.25, 0.25).scaled(2.0))
        }),
        "rosen-small" => Ok(ExperimentConfig {
            times: vec![1.0],
            checks: CheckConfig {
                moment_tolerance: 0.10,
                ..CheckConfig::default()
            },
            ..base(
                RegimeConfig::Rosen {
                    dt: 0.05,
                    convention: CphiConvention::default(),
                },
                TestFunctionPhi::haar(),
            )
        }),
        _ => Err(CliError::Config(format!(
            "unknown preset {name:?}; available: {}",
            PRESETS.join(", ")
        ))),
    }
}

pub const PRESETS: [&str; 3] = ["thm1-small", "prop1-small", "rosen-small"];
