//! Shared fixtures for the benchmarks.

use hsssi::model::{Family, LimitSpec, ModelParams, TestFunctionPhi};
use hsssi::{LevyModel, ParticleSystem, PathSource, SlowlyVarying};

/// First-order particle system with α = β = 1.5 and a small path pool.
pub fn first_order_system() -> ParticleSystem {
    let spec = LimitSpec::new(Family::FirstOrder, ModelParams::new(1.5, 1.5, 1.0)).expect("valid spec");
    let mut sys = ParticleSystem::new(
        spec,
        LevyModel::pure_stable(1.5),
        SlowlyVarying::Constant(1.0),
        TestFunctionPhi::indicator(-0.5, 1.0),
    )
    .expect("valid system");
    sys.source = PathSource::Pool { size: 200, batch: 100 };
    sys
}
