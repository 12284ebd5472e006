#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakval::linalg::{CMatrix, CVector};
use weakval::numerics::C64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_hermitian<R: Rng>(n: usize, scale: f64, rng: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()) * C64::new(scale, 0.0)
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let norm = v.norm();
    v.unscale(norm)
}

/// Columns of a random unitary as an orthonormal basis.
pub fn random_basis<R: Rng>(n: usize, rng: &mut R) -> Vec<CVector> {
    let h = random_hermitian(n, 1.0, rng);
    let u = weakval::linalg::expm_hermitian(&h, 1.3);
    (0..n).map(|k| u.column(k).into_owned()).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
