use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::{LimitError, LimitKernel, LimitPool};
use crate::functionals::{FunctionalSample, Regime};
use crate::model::LimitSpec;
use crate::parallel::map_indexed;
use crate::sampling::RngSpec;

/// Kernel vectors `(K_{t_1}(x), …, K_{t_m}(x))` at uniformly chosen points
/// of independent pool paths. The points range over the union of the path
/// supports, or over the window for the heavy kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    pub times: Vec<f64>,
    pub alpha: f64,
    /// Length of the spatial range the points are drawn from.
    pub width: f64,
    pub entries: Vec<Vec<f64>>,
    /// Lower Cholesky factor of `E[K Kᵀ]`.
    chol: Vec<Vec<f64>>,
}

impl KernelBank {
    pub fn build(
        pool: &LimitPool,
        kernel: &LimitKernel,
        alpha: f64,
        times: &[f64],
        per_path: usize,
    ) -> Result<Self, LimitError> {
        if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) || per_path == 0 {
            return Err(LimitError::Invalid("need sorted times and at least one point per path".into()));
        }
        let extents = map_indexed(pool.size, |p| pool.row_extent(p, kernel, times))
            .into_iter()
            .collect::<Result<Vec<_>, LimitError>>()?;
        let first = extents.iter().map(|e| e.0).min().unwrap_or(0);
        let last = extents.iter().map(|e| e.1).max().unwrap_or(0);
        let per: Vec<Vec<Vec<f64>>> = map_indexed(pool.size, |p| {
            let rows = pool.path_rows(p, kernel, times)?;
            let mut rng = RngSpec::new(pool.seed, p as u64).tagged("bank").rng();
            let picks = (0..per_path)
                .map(|_| {
                    let k = rng.random_range(first..=last) - rows.origin;
                    rows.rows
                        .iter()
                        .map(|r| usize::try_from(k).ok().and_then(|k| r.get(k)).copied().unwrap_or(0.0))
                        .collect()
                })
                .collect();
            Ok(picks)
        })
        .into_iter()
        .collect::<Result<_, LimitError>>()?;
        let width = (last - first + 1) as f64 * pool.grid_step();
        let entries: Vec<Vec<f64>> = per.into_iter().flatten().collect();
        let m = times.len();
        let mut second = vec![vec![0.0; m]; m];
        for e in &entries {
            for i in 0..m {
                for j in 0..=i {
                    second[i][j] += e[i] * e[j];
                }
            }
        }
        let n = entries.len() as f64;
        for i in 0..m {
            for j in 0..=i {
                second[i][j] /= n;
                second[j][i] = second[i][j];
            }
        }
        Ok(KernelBank {
            times: times.to_vec(),
            alpha,
            width,
            entries,
            chol: cholesky(&second),
        })
    }

    /// `(2W/α)^{1/α}`, making the series match `exp(−c(α) W E|θ·K|^α)`.
    pub fn series_scale(&self) -> f64 {
        (2.0 * self.width / self.alpha).powf(1.0 / self.alpha)
    }

    fn partial_sums<R: Rng>(&self, n_terms: &[usize], rng: &mut R) -> Vec<Vec<f64>> {
        let m = self.times.len();
        let s = self.series_scale();
        let mut acc = vec![0.0; m];
        let mut out = Vec::with_capacity(n_terms.len());
        let mut gamma = 0.0;
        let last = n_terms.iter().copied().max().unwrap_or(0);
        for i in 1..=last {
            let e: f64 = Exp1.sample(rng);
            gamma += e;
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let k = &self.entries[rng.random_range(0..self.entries.len())];
            let w = sign * gamma.powf(-1.0 / self.alpha) * s;
            for (a, v) in acc.iter_mut().zip(k) {
                *a += w * v;
            }
            if n_terms.contains(&i) {
                out.push(acc.clone());
            }
        }
        out
    }

    /// Gaussian stand-in for the terms beyond `n_terms`.
    fn remainder<R: Rng>(&self, n_terms: usize, rng: &mut R) -> Vec<f64> {
        let p = 2.0 / self.alpha;
        let var = (n_terms as f64).powf(1.0 - p) / (p - 1.0);
        let sd = self.series_scale() * var.sqrt();
        let z: Vec<f64> = (0..self.times.len()).map(|_| StandardNormal.sample(rng)).collect();
        self.chol
            .iter()
            .map(|row| sd * row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>())
            .collect()
    }
}

fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// One draw of the limit process at the bank times from `n_terms` series
/// terms plus a Gaussian remainder.
pub fn lepage_sample(spec: &LimitSpec, bank: &KernelBank, n_terms: usize, rng: &RngSpec) -> FunctionalSample {
    let mut r = rng.rng();
    let mut values = bank.partial_sums(&[n_terms], &mut r).remove(0);
    for (v, g) in values.iter_mut().zip(bank.remainder(n_terms, &mut r)) {
        *v += g;
    }
    FunctionalSample {
        regime: Regime::Limit { spec: *spec },
        t_scale: f64::INFINITY,
        seed: rng.seed,
        replica: rng.stream_id,
        times: bank.times.clone(),
        values,
        warning: None,
    }
}

/// Mean size of the change from `n_terms` to `2·n_terms` series terms,
/// relative to the mean size of the longer sum.
pub fn lepage_truncation_change(bank: &KernelBank, n_terms: usize, seed: u64, draws: usize) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (mut diff, mut size) = (0.0, 0.0);
    for d in 0..draws {
        let mut r = RngSpec::new(seed, d as u64).tagged("truncation").rng();
        let sums = bank.partial_sums(&[n_terms, 2 * n_terms], &mut r);
        let delta: Vec<f64> = sums[1].iter().zip(&sums[0]).map(|(a, b)| a - b).collect();
        diff += norm(&delta);
        size += norm(&sums[1]);
    }
    if size > 0.0 {
        diff / size
    } else {
        0.0
    }
}
