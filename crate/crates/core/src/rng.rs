//! Deterministic random streams and complex Gaussian sampling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::linalg::{CMatrix, CVector};

/// The RNG used throughout the crate.
pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the independent stream owned by one Monte Carlo trial at one grid
/// point. Streams depend only on the triple, never on scheduling order.
pub fn stream_seed(seed: u64, grid_point: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ grid_point) ^ trial)
}

pub fn trial_rng(seed: u64, grid_point: u64, trial: u64) -> SimRng {
    seeded(stream_seed(seed, grid_point, trial))
}

/// One draw from CN(0, variance): each real component has variance `variance / 2`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (variance.sqrt() * FRAC_1_SQRT_2)
}

pub fn complex_normal_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng, 1.0))
}

/// Matrix of i.i.d. CN(0,1) entries, filled in column-major order.
pub fn complex_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let data: Vec<Complex64> = (0..rows * cols).map(|_| complex_normal(rng, 1.0)).collect();
    CMatrix::from_column_slice(rows, cols, &data)
}

/// Vector of unit-modulus entries with uniform phases.
pub fn unit_modulus_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> CVector {
    CVector::from_fn(len, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
}

pub fn unit_modulus_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let data: Vec<Complex64> = (0..rows * cols)
        .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
        .collect();
    CMatrix::from_column_slice(rows, cols, &data)
}
