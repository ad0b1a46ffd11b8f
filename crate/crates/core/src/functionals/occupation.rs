//! Fast evaluation of `dt Σ_{k<n} φ(y + η_k)` for one stored path and many shifts `y`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::model::TestFunctionPhi;
use crate::quad::{self, Tolerance};

/// Grid step of the fine occupation table for heavy-tailed φ.
pub const HEAVY_FINE_STEP: f64 = 0.25;
const COARSE_BINS: usize = 32;
const COARSE_POINTS: usize = 96;
/// Arguments with `|y|` below this use the triangle-smoothed φ from quadrature.
const SMOOTH_NEAR: f64 = 24.0;

/// Power tails of a heavy pair, with the derivatives used by multipole sums.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HeavyTails {
    gamma1: f64,
    gamma2: f64,
    g1: f64,
    g2: f64,
}

impl HeavyTails {
    pub(crate) fn from_phi(phi: &TestFunctionPhi) -> Option<Self> {
        match *phi {
            TestFunctionPhi::HeavyPair { gamma1, gamma2, g1 } => Some(HeavyTails {
                gamma1,
                gamma2,
                g1,
                g2: g1 * (gamma2 - 1.0) / (gamma1 - 1.0),
            }),
            _ => None,
        }
    }

    /// `(φ, φ'', φ''')` at `|y| > 1`.
    #[inline]
    fn derivs(&self, y: f64) -> (f64, f64, f64) {
        if y > 1.0 {
            let g = self.gamma1;
            let p = self.g1 * y.powf(-g);
            let inv = 1.0 / y;
            let d2 = g * (g + 1.0) * p * inv * inv;
            (p, d2, -(g + 2.0) * d2 * inv)
        } else if y < -1.0 {
            let g = self.gamma2;
            let u = -y;
            let p = self.g2 * u.powf(-g);
            let inv = 1.0 / u;
            let d2 = g * (g + 1.0) * p * inv * inv;
            (-p, -d2, -(g + 2.0) * d2 * inv)
        } else {
            (0.0, 0.0, 0.0)
        }
    }
}

/// φ averaged against the triangle of half-width `b`, on the lattice `s·b`.
///
/// This is the kernel matching cloud-in-cell deposition of path positions.
#[derive(Debug)]
pub(crate) struct SmoothedKernel {
    tails: HeavyTails,
    b: f64,
    half: i64,
    near: Vec<f64>,
}

impl SmoothedKernel {
    pub(crate) fn new(phi: &TestFunctionPhi, b: f64) -> Option<Self> {
        let tails = HeavyTails::from_phi(phi)?;
        let half = (SMOOTH_NEAR / b).ceil() as i64;
        let tol = Tolerance::new(1e-13, 1e-10);
        let near = (-half..=half)
            .map(|s| {
                let c = s as f64 * b;
                let w = |u: f64| phi.eval(c + u) * (1.0 - u.abs() / b) / b;
                let mut breaks = vec![-b, 0.0, b];
                for edge in [-1.0 - c, 1.0 - c] {
                    if edge > -b && edge < b {
                        breaks.push(edge);
                    }
                }
                breaks.sort_by(f64::total_cmp);
                quad::integrate_with_breaks(w, &breaks, tol)
                    .map(|e| e.value)
                    .unwrap_or_else(|_| phi.eval(c))
            })
            .collect();
        Some(SmoothedKernel {
            tails,
            b,
            half,
            near,
        })
    }

    #[inline]
    fn at(&self, s: i64) -> f64 {
        if s.abs() <= self.half {
            self.near[(s + self.half) as usize]
        } else {
            let y = s as f64 * self.b;
            let (p, d2, _) = self.tails.derivs(y);
            p + self.b * self.b / 12.0 * d2
        }
    }
}

/// Occupation sums of one time prefix of a path.
#[derive(Debug, Clone)]
enum Prefix {
    Empty,
    /// Sorted positions; exact for indicators and bumps.
    Sorted { pos: Vec<f32> },
    /// Heavy φ: fine table near the path, log-spaced tables further out,
    /// multipole expansion beyond.
    Table(Box<HeavyTable>),
}

#[derive(Debug, Clone)]
struct HeavyTable {
    lo: f64,
    hi: f64,
    g0: f64,
    step: f64,
    fine: Vec<f32>,
    d0: f64,
    far: f64,
    left: Vec<f32>,
    right: Vec<f32>,
    count: f64,
    mean: f64,
    s2: f64,
    s3: f64,
}

/// Query structure for one stored path at several times.
#[derive(Debug, Clone)]
pub(crate) struct PathOccupation {
    dt: f64,
    ranges: Vec<(f64, f64)>,
    prefixes: Vec<Prefix>,
}

fn range_of(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

impl PathOccupation {
    /// `counts[i]` is the number of leading path points entering time `i`.
    pub(crate) fn build(
        values: &[f64],
        counts: &[usize],
        dt: f64,
        phi: &TestFunctionPhi,
        kernel: Option<&SmoothedKernel>,
        planner: &mut FftPlanner<f64>,
    ) -> Self {
        let prefixes_of = |n: usize| &values[..n.min(values.len())];
        let ranges: Vec<(f64, f64)> = counts
            .iter()
            .map(|&n| {
                let xs = prefixes_of(n);
                if xs.is_empty() {
                    (0.0, 0.0)
                } else {
                    range_of(xs)
                }
            })
            .collect();
        let mut prefixes: Vec<Prefix> = Vec::with_capacity(counts.len());
        match (phi, kernel) {
            (TestFunctionPhi::HeavyPair { .. }, Some(k)) => {
                let live: Vec<usize> = (0..counts.len()).filter(|&i| !prefixes_of(counts[i]).is_empty()).collect();
                let sets: Vec<&[f64]> = live.iter().map(|&i| prefixes_of(counts[i])).collect();
                let hull = live.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| {
                    (a.min(ranges[i].0), b.max(ranges[i].1))
                });
                let mut tables = if sets.is_empty() {
                    Vec::new()
                } else {
                    HeavyTable::build_all(&sets, hull, k, planner)
                }
                .into_iter();
                for &n in counts {
                    prefixes.push(if prefixes_of(n).is_empty() {
                        Prefix::Empty
                    } else {
                        Prefix::Table(Box::new(tables.next().expect("one table per live prefix")))
                    });
                }
            }
            _ => {
                for &n in counts {
                    let xs = prefixes_of(n);
                    prefixes.push(if xs.is_empty() {
                        Prefix::Empty
                    } else {
                        let mut pos: Vec<f32> = xs.iter().map(|&x| x as f32).collect();
                        pos.sort_by(f32::total_cmp);
                        Prefix::Sorted { pos }
                    });
                }
            }
        }
        PathOccupation {
            dt,
            ranges,
            prefixes,
        }
    }

    /// Whether `φ(shift + η_k)` vanishes for every point of prefix `i`.
    #[inline]
    pub(crate) fn misses(&self, i: usize, shift: f64, support: Option<(f64, f64)>) -> bool {
        match (&self.prefixes[i], support) {
            (Prefix::Empty, _) => true,
            (_, Some((a, b))) => {
                let (lo, hi) = self.ranges[i];
                shift + hi < a || shift + lo > b
            }
            _ => false,
        }
    }

    pub(crate) fn occupation(&self, i: usize, shift: f64, phi: &TestFunctionPhi, tails: Option<&HeavyTails>) -> f64 {
        match &self.prefixes[i] {
            Prefix::Empty => 0.0,
            Prefix::Sorted { pos } => self.dt * sorted_sum(pos, shift, phi),
            Prefix::Table(t) => self.dt * t.eval(shift, tails.expect("heavy tails")),
        }
    }
}

fn sorted_sum(pos: &[f32], shift: f64, phi: &TestFunctionPhi) -> f64 {
    match phi {
        TestFunctionPhi::Indicators { terms } => terms
            .iter()
            .map(|t| {
                let a = (t.lo - shift) as f32;
                let b = (t.hi - shift) as f32;
                let i = pos.partition_point(|&p| p < a);
                let j = pos.partition_point(|&p| p <= b);
                t.weight * j.saturating_sub(i) as f64
            })
            .sum(),
        TestFunctionPhi::GaussianBumps { terms } => terms
            .iter()
            .map(|t| {
                let a = (t.center - 12.0 * t.sd - shift) as f32;
                let b = (t.center + 12.0 * t.sd - shift) as f32;
                let i = pos.partition_point(|&p| p < a);
                let j = pos.partition_point(|&p| p <= b);
                let norm = t.weight / (t.sd * (2.0 * std::f64::consts::PI).sqrt());
                pos[i..j.max(i)]
                    .iter()
                    .map(|&p| {
                        let u = (p as f64 + shift - t.center) / t.sd;
                        norm * (-0.5 * u * u).exp()
                    })
                    .sum::<f64>()
            })
            .sum(),
        TestFunctionPhi::HeavyPair { .. } => pos.iter().map(|&p| phi.eval(p as f64 + shift)).sum(),
    }
}

/// Moments of a group of points about its mean.
#[derive(Debug, Clone, Copy, Default)]
struct Group {
    n: f64,
    mean: f64,
    s2: f64,
    s3: f64,
}

impl Group {
    fn of(xs: impl Iterator<Item = f64> + Clone) -> Group {
        let (n, s) = xs.clone().fold((0.0, 0.0), |(n, s), x| (n + 1.0, s + x));
        if n == 0.0 {
            return Group::default();
        }
        let mean = s / n;
        let (s2, s3) = xs.fold((0.0, 0.0), |(a, b), x| {
            let d = x - mean;
            (a + d * d, b + d * d * d)
        });
        Group { n, mean, s2, s3 }
    }

    #[inline]
    fn field(&self, y: f64, tails: &HeavyTails) -> f64 {
        let (p, d2, d3) = tails.derivs(y + self.mean);
        self.n * p + 0.5 * self.s2 * d2 + self.s3 * d3 / 6.0
    }
}

impl HeavyTable {
    /// Tables for several prefixes of one path sharing the hull `(lo, hi)` of
    /// the longest. Pairs of prefixes share one complex transform.
    fn build_all(sets: &[&[f64]], (lo, hi): (f64, f64), k: &SmoothedKernel, planner: &mut FftPlanner<f64>) -> Vec<Self> {
        let b = k.b;
        let range = hi - lo;
        let d0 = (range / 8.0).max(4.0);
        let far = 8.0 * range + 16.0;

        // cloud-in-cell deposits on lattice nodes j·b, j ∈ [j0, j0 + nh);
        // table nodes g·b, g ∈ [g0, g0 + nt); F[q] = Σ_m dep[m] κ[g0 + j0 + q + m]
        let j0 = (lo / b).floor() as i64;
        let nh = ((hi / b).floor() as i64 - j0 + 2) as usize;
        let g0 = ((-hi - d0) / b).floor() as i64;
        let nt = (((-lo + d0) / b).ceil() as i64 - g0 + 1) as usize;
        let nk = nt + nh - 1;
        let size = (nt + 2 * nh).next_power_of_two();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut spec = vec![Complex64::new(0.0, 0.0); size];
        let base = g0 + j0;
        for (r, slot) in spec.iter_mut().take(nk).enumerate() {
            *slot = Complex64::new(k.at(base + r as i64), 0.0);
        }
        fwd.process(&mut spec);
        let scale = 1.0 / size as f64;

        let mut fines: Vec<Vec<f32>> = Vec::with_capacity(sets.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        for pair in sets.chunks(2) {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for (part, xs) in pair.iter().enumerate() {
                for &x in xs.iter() {
                    let u = x / b;
                    let j = u.floor();
                    let w = u - j;
                    let idx = nh - 1 - (j as i64 - j0) as usize;
                    // reversed deposit; the second prefix rides in the imaginary part
                    if part == 0 {
                        buf[idx].re += 1.0 - w;
                        buf[idx - 1].re += w;
                    } else {
                        buf[idx].im += 1.0 - w;
                        buf[idx - 1].im += w;
                    }
                }
            }
            fwd.process(&mut buf);
            for (x, y) in buf.iter_mut().zip(&spec) {
                *x *= y;
            }
            inv.process(&mut buf);
            fines.push((0..nt).map(|q| (buf[q + nh - 1].re * scale) as f32).collect());
            if pair.len() == 2 {
                fines.push((0..nt).map(|q| (buf[q + nh - 1].im * scale) as f32).collect());
            }
        }

        let tails = k.tails;
        let ratio = far / d0;
        let dist = |i: usize| d0 * ratio.powf(i as f64 / (COARSE_POINTS - 1) as f64);
        let width = range / COARSE_BINS as f64;
        sets.iter()
            .zip(fines)
            .map(|(xs, fine)| {
                let mut groups = Vec::with_capacity(COARSE_BINS);
                if width > 0.0 {
                    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); COARSE_BINS];
                    for &x in xs.iter() {
                        let i = (((x - lo) / width) as usize).min(COARSE_BINS - 1);
                        buckets[i].push(x);
                    }
                    for bucket in buckets.iter().filter(|v| !v.is_empty()) {
                        groups.push(Group::of(bucket.iter().copied()));
                    }
                } else {
                    groups.push(Group::of(xs.iter().copied()));
                }
                let global = Group::of(xs.iter().copied());
                let sum = |y: f64| groups.iter().map(|g| g.field(y, &tails)).sum::<f64>();
                let left = (0..COARSE_POINTS).map(|i| sum(-hi - dist(i)) as f32).collect();
                let right = (0..COARSE_POINTS).map(|i| sum(-lo + dist(i)) as f32).collect();
                HeavyTable {
                    lo,
                    hi,
                    g0: g0 as f64 * b,
                    step: b,
                    fine,
                    d0,
                    far,
                    left,
                    right,
                    count: global.n,
                    mean: global.mean,
                    s2: global.s2,
                    s3: global.s3,
                }
            })
            .collect()
    }

    fn log_interp(&self, table: &[f32], d: f64) -> f64 {
        let u = (d / self.d0).ln() / (self.far / self.d0).ln() * (COARSE_POINTS - 1) as f64;
        let u = u.clamp(0.0, (COARSE_POINTS - 1) as f64);
        let i = (u.floor() as usize).min(COARSE_POINTS - 2);
        let f = u - i as f64;
        table[i] as f64 * (1.0 - f) + table[i + 1] as f64 * f
    }

    fn eval(&self, y: f64, tails: &HeavyTails) -> f64 {
        let u = (y - self.g0) / self.step;
        if u >= 0.0 && u <= (self.fine.len() - 1) as f64 {
            let i = (u.floor() as usize).min(self.fine.len().saturating_sub(2));
            let f = u - i as f64;
            if self.fine.len() == 1 {
                return self.fine[0] as f64;
            }
            return self.fine[i] as f64 * (1.0 - f) + self.fine[i + 1] as f64 * f;
        }
        let (d, table) = if y + self.hi < 0.0 {
            (-(y + self.hi), &self.left)
        } else {
            (y + self.lo, &self.right)
        };
        if d <= self.far {
            self.log_interp(table, d.max(self.d0))
        } else {
            Group {
                n: self.count,
                mean: self.mean,
                s2: self.s2,
                s3: self.s3,
            }
            .field(y, tails)
        }
    }
}

/// Direct `dt Σ_{k<n} φ(shift + η_k)`; reference for the index structures.
pub(crate) fn direct_occupation(values: &[f64], n: usize, dt: f64, phi: &TestFunctionPhi, shift: f64) -> f64 {
    dt * values[..n.min(values.len())]
        .iter()
        .map(|&x| phi.eval(shift + x))
        .sum::<f64>()
}

pub(crate) fn shared_kernel(phi: &TestFunctionPhi) -> Option<Arc<SmoothedKernel>> {
    SmoothedKernel::new(phi, HEAVY_FINE_STEP).map(Arc::new)
}
