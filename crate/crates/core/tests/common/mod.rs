#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.sample(StandardNormal))
}

/// `A A^T / m` for a `p x m` Gaussian `A`.
pub fn random_psd(rng: &mut ChaCha8Rng, p: usize, m: usize) -> Array2<f64> {
    let a = gaussian_matrix(rng, p, m);
    let s = a.dot(&a.t()) / m as f64;
    // exact symmetry
    (&s + &s.t()) / 2.0
}

pub fn unit(v: &Array1<f64>) -> Array1<f64> {
    v / v.dot(v).sqrt()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
