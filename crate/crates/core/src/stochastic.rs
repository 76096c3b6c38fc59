//! Scalar Wiener paths on a dyadic grid and the multiplicative noise
//! coefficients.
//!
//! Fine increments are rounded to multiples of 2^-40. Every partial sum of
//! such numbers (magnitudes far below 2^12) is exactly representable, so
//! coarse increments are the exact sums of their fine increments whatever
//! the summation order, and refining the step never perturbs the path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

const QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;
const STREAM_W1: u64 = 1;
const STREAM_W2: u64 = 2;

/// Two independent Wiener paths sampled with step `k0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub k0: f64,
    pub t_final: f64,
    pub seed: u64,
    pub increments: [Vec<f64>; 2],
}

/// Exponent `j` with `k = 2^-j`, if `k` is a (positive or negative) power
/// of two.
pub fn dyadic_exponent(k: f64) -> Option<i32> {
    if !(k > 0.0) || !k.is_finite() {
        return None;
    }
    let j = -k.log2().round() as i32;
    (2f64.powi(-j) == k).then_some(j)
}

/// Number of steps `t / k` when it is an integer.
pub fn step_count(t: f64, k: f64) -> Option<usize> {
    let m = (t / k).round();
    (m >= 1.0 && (m * k - t).abs() <= 1e-12 * t.max(1.0)).then_some(m as usize)
}

/// Per-sample seed derivation.
pub fn sample_seed(base_seed: u64, sample_index: u64) -> u64 {
    base_seed ^ sample_index
}

fn draw(seed: u64, stream: u64, n: usize, k0: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let scale = k0.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            (z * scale / QUANTUM).round() * QUANTUM
        })
        .collect()
}

pub fn sample_path(seed: u64, t_final: f64, k0: f64) -> Result<BrownianPath> {
    if dyadic_exponent(k0).is_none() {
        return Err(Error::Brownian(format!("k0 = {k0} is not a power of two")));
    }
    let n = step_count(t_final, k0).ok_or_else(|| Error::Brownian(format!("T = {t_final} is not a multiple of k0 = {k0}")))?;
    Ok(BrownianPath {
        k0,
        t_final,
        seed,
        increments: [draw(seed, STREAM_W1, n, k0), draw(seed, STREAM_W2, n, k0)],
    })
}

impl BrownianPath {
    pub fn len(&self) -> usize {
        self.increments[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of fine steps per coarse step `k`.
    pub fn refinement(&self, k: f64) -> Result<usize> {
        let r = k / self.k0;
        let ri = r.round();
        if ri < 1.0 || ri * self.k0 != k || !(ri as usize).is_power_of_two() {
            return Err(Error::Brownian(format!("step {k} is not a dyadic multiple of k0 = {}", self.k0)));
        }
        Ok(ri as usize)
    }

    /// `W_i(t_{n+1}) - W_i(t_n)` on the grid of step `k`; `which` is 1 or 2.
    pub fn coarse_increment(&self, which: usize, n: usize, k: f64) -> Result<f64> {
        if !(1..=2).contains(&which) {
            return Err(Error::Brownian(format!("no Wiener process W{which}")));
        }
        let r = self.refinement(k)?;
        let (lo, hi) = (n * r, (n + 1) * r);
        if hi > self.len() {
            return Err(Error::Brownian(format!("interval {n} of step {k} exceeds T = {}", self.t_final)));
        }
        Ok(self.increments[which - 1][lo..hi].iter().sum())
    }
}

/// Diffusion coefficient `G(v)` of the multiplicative noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseCoefficient {
    Zero,
    /// `G(v) = v`.
    Linear,
    /// `G(v) = sigma v`.
    ScaledLinear(f64),
}

impl NoiseCoefficient {
    pub fn scale(&self) -> f64 {
        match *self {
            NoiseCoefficient::Zero => 0.0,
            NoiseCoefficient::Linear => 1.0,
            NoiseCoefficient::ScaledLinear(s) => s,
        }
    }

    /// Lipschitz / linear-growth constant.
    pub fn constant(&self) -> f64 {
        self.scale().abs().max(1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.scale() == 0.0
    }

    /// Coefficients of `G(v)` for a discrete `v`.
    pub fn apply(&self, state: &[f64]) -> Vec<f64> {
        let s = self.scale();
        state.iter().map(|v| s * v).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "zero" => Ok(NoiseCoefficient::Zero),
            "linear" => Ok(NoiseCoefficient::Linear),
            other => other
                .strip_prefix("scaled:")
                .and_then(|s| s.trim().parse::<f64>().ok())
                .map(NoiseCoefficient::ScaledLinear)
                .ok_or_else(|| Error::Config(format!("unknown noise coefficient '{other}'"))),
        }
    }
}

impl std::fmt::Display for NoiseCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseCoefficient::Zero => write!(f, "zero"),
            NoiseCoefficient::Linear => write!(f, "linear"),
            NoiseCoefficient::ScaledLinear(s) => write!(f, "scaled:{s}"),
        }
    }
}

/// Load vector `(G(v) dW, phi_i)` for all basis functions `phi_i`.
pub fn apply_noise(coeff: NoiseCoefficient, mass: &CsrMatrix, state: &[f64], dw: f64) -> Vec<f64> {
    let mut out = vec![0.0; mass.nrows()];
    if !coeff.is_zero() {
        mass.mul_vec_add(coeff.scale() * dw, state, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_dyadic_steps() {
        assert!(sample_path(1, 1.0, 0.3).is_err());
        assert!(sample_path(1, 1.1, 1.0 / 8.0).is_err());
        let p = sample_path(1, 1.0, 1.0 / 8.0).unwrap();
        assert!(p.coarse_increment(1, 0, 3.0 / 8.0).is_err());
        assert!(p.coarse_increment(1, 4, 0.25).is_err());
        assert!(p.coarse_increment(3, 0, 0.25).is_err());
    }

    #[test]
    fn deterministic_and_distinct_streams() {
        let a = sample_path(42, 1.0, 2f64.powi(-8)).unwrap();
        let b = sample_path(42, 1.0, 2f64.powi(-8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.increments[0], a.increments[1]);
        assert_ne!(a, sample_path(43, 1.0, 2f64.powi(-8)).unwrap());
    }

    #[test]
    fn coarse_increments_are_exact_sums() {
        let k0 = 2f64.powi(-11);
        let p = sample_path(7, 1.0, k0).unwrap();
        assert_eq!(p.coarse_increment(1, 5, k0).unwrap().to_bits(), p.increments[0][5].to_bits());
        assert_eq!(
            p.coarse_increment(2, 0, 2.0 * k0).unwrap().to_bits(),
            (p.increments[1][0] + p.increments[1][1]).to_bits()
        );
        let total = p.coarse_increment(1, 0, 1.0).unwrap();
        for j in 0..=11 {
            let k = 2f64.powi(-j);
            let m = (1.0 / k) as usize;
            let sum: f64 = (0..m).map(|n| p.coarse_increment(1, n, k).unwrap()).sum();
            assert_eq!(sum.to_bits(), total.to_bits(), "k = 2^-{j}");
            if j > 0 {
                for n in 0..m / 2 {
                    let coarse = p.coarse_increment(2, n, 2.0 * k).unwrap();
                    let fine = p.coarse_increment(2, 2 * n, k).unwrap() + p.coarse_increment(2, 2 * n + 1, k).unwrap();
                    assert_eq!(coarse.to_bits(), fine.to_bits());
                }
            }
        }
    }

    #[test]
    fn fine_increment_moments() {
        let k0 = 2f64.powi(-11);
        let mut pooled = Vec::new();
        let mut seed = 0;
        while pooled.len() < 100_000 {
            let p = sample_path(seed, 1.0, k0).unwrap();
            let var: f64 = p.increments[0].iter().map(|x| x * x).sum::<f64>() / p.len() as f64;
            assert!((0.8 * k0..=1.2 * k0).contains(&var));
            pooled.extend_from_slice(&p.increments[0]);
            pooled.extend_from_slice(&p.increments[1]);
            seed += 1;
        }
        let n = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / n;
        let var = pooled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 3.0 * (k0 / n).sqrt());
        assert!((0.97 * k0..=1.03 * k0).contains(&var));
    }

    #[test]
    fn noise_application() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]);
        let v = [1.0, -2.0];
        assert_eq!(apply_noise(NoiseCoefficient::Zero, &m, &v, 0.3), vec![0.0, 0.0]);
        assert_eq!(apply_noise(NoiseCoefficient::Linear, &m, &v, 0.0), vec![0.0, 0.0]);
        let one = apply_noise(NoiseCoefficient::ScaledLinear(1.0), &m, &v, 0.3);
        let two = apply_noise(NoiseCoefficient::ScaledLinear(2.0), &m, &v, 0.3);
        assert_eq!(two, one.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
        assert_eq!(NoiseCoefficient::parse("scaled:2.5").unwrap(), NoiseCoefficient::ScaledLinear(2.5));
        assert!(NoiseCoefficient::parse("quadratic").is_err());
        assert_eq!(NoiseCoefficient::Linear.constant(), 1.0);
    }
}
