use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::RngSpec;

/// Chambers–Mallows–Stuck sampler of the symmetric law with characteristic
/// function `exp(-scale^β |θ|^β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSampler {
    beta: f64,
    inv_beta: f64,
    outer: f64,
    scale: f64,
}

impl StableSampler {
    pub fn new(beta: f64, scale: f64) -> Self {
        assert!(beta > 0.0 && beta <= 2.0, "β must lie in (0, 2]");
        StableSampler {
            beta,
            inv_beta: 1.0 / beta,
            outer: (1.0 - beta) / beta,
            scale,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.random();
        while u == 0.0 {
            u = rng.random();
        }
        let v = PI * (u - 0.5);
        let w: f64 = Exp1.sample(rng);
        let b = self.beta;
        // sin(βV) cos(V)^{-1/β} (cos((1-β)V)/W)^{(1-β)/β}, with one exponential
        let log_mod = -self.inv_beta * v.cos().ln() + self.outer * ((v - b * v).cos().ln() - w.ln());
        let x = (b * v).sin() * log_mod.exp();
        self.scale * x
    }
}

/// One draw from the stream `rng`.
pub fn sample_stable_increment(beta: f64, scale: f64, rng: &RngSpec) -> f64 {
    StableSampler::new(beta, scale).sample(&mut rng.rng())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_special_case() {
        // β = 1 reduces to tan(V): check the median of |X| is 1
        let s = StableSampler::new(1.0, 1.0);
        let mut r = RngSpec::new(11, 0).rng();
        let mut xs: Vec<f64> = (0..20001).map(|_| s.sample(&mut r).abs()).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[10000] - 1.0).abs() < 0.04);
    }

    #[test]
    fn gaussian_special_case() {
        // β = 2 gives N(0, 2)
        let s = StableSampler::new(2.0, 1.0);
        let mut r = RngSpec::new(12, 0).rng();
        let n = 50_000;
        let var: f64 = (0..n).map(|_| s.sample(&mut r).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 2.0).abs() < 0.06, "{var}");
    }
}
