#![allow(dead_code)]

use optimal_rescaling::ingest::sample_gaussian;
use optimal_rescaling::{Matrix, PointSet, SymMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut TestRng) -> f64 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn random_vector(rng: &mut TestRng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| scale * normal(rng)).collect()
}

pub fn random_matrix(rng: &mut TestRng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| normal(rng)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// `A·Aᵀ + ridge·I` with Gaussian `A`.
pub fn random_spd(rng: &mut TestRng, dim: usize, ridge: f64) -> SymMatrix {
    let a = random_matrix(rng, dim, dim);
    let mut m = a.matmul(&a.transpose()).unwrap();
    for i in 0..dim {
        m[(i, i)] += ridge;
    }
    SymMatrix::from_matrix(m).unwrap()
}

/// Orthogonal matrix from Gram–Schmidt on a Gaussian matrix (Haar measure).
pub fn random_rotation(rng: &mut TestRng, dim: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = random_vector(rng, dim, 1.0);
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut q = Matrix::zeros(dim, dim);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..dim {
            q[(i, j)] = c[i];
        }
    }
    q
}

/// `Q·diag(d)·Qᵀ`.
pub fn with_spectrum(q: &Matrix, d: &[f64]) -> SymMatrix {
    let n = d.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = (0..n).map(|k| q[(i, k)] * d[k] * q[(j, k)]).sum();
        }
    }
    SymMatrix::from_matrix(m).unwrap()
}

pub fn random_dataset(rng: &mut TestRng, dim: usize, n: usize) -> PointSet {
    let mean = random_vector(rng, dim, 2.0);
    let cov = random_spd(rng, dim, 0.2);
    sample_gaussian(&mean, &cov, n, rng.gen()).unwrap()
}

pub fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}
