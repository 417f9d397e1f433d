#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmt_thermal::numerics::{CMatrix, HermitianMatrix, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random complex matrix with entries uniform in the unit square around 0.
pub fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Random Hermitian matrix rescaled to operator norm `norm`.
pub fn random_hermitian(n: usize, norm: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = random_matrix(n, rng);
    let h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    let s = h.singular_values().max();
    if s == 0.0 {
        return h;
    }
    h * C64::new(norm / s, 0.0)
}

/// Random PSD matrix with operator norm `norm`.
pub fn random_psd(n: usize, norm: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = random_matrix(n, rng);
    let p = &a * a.adjoint();
    let s = p.singular_values().max();
    p * C64::new(norm / s, 0.0)
}

pub fn herm(m: CMatrix) -> HermitianMatrix {
    HermitianMatrix::new(m).unwrap()
}

pub fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn diag(m: &CMatrix) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, i)].re).collect()
}

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sd)
}
