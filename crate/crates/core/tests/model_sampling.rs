use hsssi::analysis::ecf_values;
use hsssi::localtime::local_time_at;
use hsssi::model::{hurst, normalization};
use hsssi::sampling::{sample_particle_field, simulate_path};
use hsssi::{Family, LevyModel, LimitSpec, ModelParams, RngSpec, SlowlyVarying};
use proptest::prelude::*;

const SLOWLY: [SlowlyVarying; 3] = [SlowlyVarying::Constant(1.0), SlowlyVarying::Log, SlowlyVarying::IteratedLog];

fn family(k: usize, beta: f64, u: f64, v: f64) -> Family {
    // γ values strictly inside (1, 1 + (β−1)/2)
    let top = (beta - 1.0) / 2.0;
    match k {
        0 => Family::FirstOrder,
        1 => Family::SecondOrder,
        2 => Family::HeavySymmetric { gamma: 1.0 + u * top },
        _ => Family::HeavyAsymmetric {
            gamma1: 1.0 + u * top,
            gamma2: 1.0 + v * top,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn hurst_lies_in_unit_interval(
        k in 0usize..4,
        alpha in 1.001f64..1.999,
        beta in 1.001f64..1.999,
        u in 0.01f64..0.99,
        v in 0.01f64..0.99,
    ) {
        let spec = LimitSpec::new(family(k, beta, u, v), ModelParams::new(alpha, beta, 1.0)).unwrap();
        let h = hurst(&spec);
        prop_assert!(h > 0.0 && h < 1.0, "{:?}: {}", spec.family, h);
    }

    #[test]
    fn normalization_grows_with_scale(
        k in 0usize..4,
        sf in 0usize..3,
        sg in 0usize..3,
        t in 10.0f64..1e6,
        step in 1.1f64..100.0,
    ) {
        let params = ModelParams::new(1.5, 1.5, 1.0);
        let fam = family(k, 1.5, 0.5, 0.3);
        let c = SlowlyVarying::Constant(1.0);
        let a = normalization(&fam, t, &params, SLOWLY[sf], c, SLOWLY[sg]);
        let b = normalization(&fam, t * step, &params, SLOWLY[sf], c, SLOWLY[sg]);
        prop_assert!(b.scale > a.scale, "{} !> {}", b.scale, a.scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn identical_specs_give_identical_bytes(seed in any::<u64>(), stream in any::<u64>(), log in any::<bool>()) {
        let model = if log {
            LevyModel::rv_density(1.5, SlowlyVarying::Log)
        } else {
            LevyModel::pure_stable(1.5)
        };
        let rng = RngSpec::new(seed, stream);
        let a = simulate_path(&model, 0.5, 1e-2, &rng).unwrap();
        let b = simulate_path(&model, 0.5, 1e-2, &rng).unwrap();
        prop_assert_eq!(a.to_bytes(), b.to_bytes());
        let params = ModelParams::new(1.5, 1.5, 1.0);
        let f = sample_particle_field(&params, SlowlyVarying::Log, (-5.0, 5.0), &rng).unwrap();
        let g = sample_particle_field(&params, SlowlyVarying::Log, (-5.0, 5.0), &rng).unwrap();
        prop_assert_eq!(f.to_bytes(), g.to_bytes());
    }

    #[test]
    fn psi_is_even_and_positive_off_origin(k in 0usize..4, z in 1e-3f64..50.0) {
        let model = match k {
            0 => LevyModel::pure_stable(1.5),
            _ => LevyModel::rv_density(1.5, SLOWLY[k - 1]),
        };
        let p = model.psi(z).unwrap();
        prop_assert!(p > 0.0);
        prop_assert_eq!(p, model.psi(-z).unwrap());
        prop_assert_eq!(model.psi(0.0).unwrap(), 0.0);
    }
}

#[test]
fn increments_are_stationary_along_a_path() {
    let path = simulate_path(&LevyModel::rv_density(1.5, SlowlyVarying::Log), 40.0, 1e-2, &RngSpec::new(2, 0)).unwrap();
    let inc: Vec<f64> = path.values.windows(2).map(|w| w[1] - w[0]).collect();
    let (first, second) = inc.split_at(inc.len() / 2);
    let theta = [1.0, 3.0, 10.0, 30.0];
    let a = ecf_values(first, &theta).unwrap();
    let b = ecf_values(second, &theta).unwrap();
    for i in 0..theta.len() {
        let d = (a.value(i) - b.value(i)).norm();
        let se = a.se[i].hypot(b.se[i]);
        assert!(d < 3.0 * se, "θ = {}: {d} vs {se}", theta[i]);
    }
}

#[test]
fn particle_counts_are_poisson() {
    let params = ModelParams::new(1.5, 1.5, 1.0);
    let counts: Vec<f64> = (0..10_000)
        .map(|i| {
            let f = sample_particle_field(&params, SlowlyVarying::Constant(1.0), (0.0, 3.0), &RngSpec::new(4, i)).unwrap();
            f.len() as f64
        })
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(((mean - var) / mean).abs() < 0.05, "{mean} vs {var}");
    // 3 · 2 ε^{-α}/α
    assert!((mean - 4.0).abs() < 0.1);
}

#[test]
fn weight_tail_index_is_alpha() {
    let alpha = 1.5;
    let eps = 1.0;
    let params = ModelParams::new(alpha, 1.5, eps);
    let mut z: Vec<f64> = (0..400)
        .flat_map(|i| {
            sample_particle_field(&params, SlowlyVarying::Constant(1.0), (0.0, 500.0), &RngSpec::new(6, i))
                .unwrap()
                .particles
                .into_iter()
                .map(|p| p.z.abs())
        })
        .collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let levels: Vec<f64> = (0..=10).map(|k| 10.0 * eps * 10f64.powf(k as f64 / 10.0)).collect();
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .map(|&u| {
            let above = n - z.partition_point(|v| *v < u) as f64;
            (u.ln(), (above / n).ln())
        })
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + alpha).abs() < 0.1, "{slope}");
}

#[test]
fn local_time_at_zero_scales_with_time() {
    let beta = 1.5;
    let dt: f64 = 2e-3;
    let h = dt.powf(1.0 / beta);
    let model = LevyModel::pure_stable(beta);
    let n = 3000;
    let mut sums = [0.0; 3];
    for i in 0..n {
        let path = simulate_path(&model, 4.0, dt, &RngSpec::new(10, i)).unwrap();
        for (s, t) in sums.iter_mut().zip([1.0, 2.0, 4.0]) {
            *s += local_time_at(&path, 0.0, h, t);
        }
    }
    for (k, c) in [(1, 2.0f64), (2, 4.0)] {
        let ratio = sums[k] / sums[0] / c.powf(1.0 - 1.0 / beta);
        assert!((ratio - 1.0).abs() < 0.05, "c = {c}: {ratio}");
    }
}
