//! Heavy-tailed particle systems driven by stable Lévy motions, their occupation
//! functionals and the H-sssi processes they converge to.

pub mod analysis;
pub mod functionals;
pub mod limits;
pub mod localtime;
pub mod model;
pub mod parallel;
pub mod quad;
pub mod sampling;

pub use analysis::{CfComparison, EcfReport, TargetCf};
pub use functionals::{FunctionalSample, ParticleSystem, PathSource, Regime, WindowPolicy};
pub use limits::{CfEstimate, CfQuery, KernelVariant, LimitKernel, LimitPool};
pub use model::{CphiConvention, Family, LevyModel, LimitSpec, ModelParams, SlowlyVarying, TestFunctionPhi};
pub use sampling::RngSpec;
