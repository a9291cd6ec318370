//! Seeded generators for synthetic inputs used by the self-test and by
//! property sweeps.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::scaling_sim::DiscreteWorld;

pub type SynthRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SynthRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut impl Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// `n × d` matrix with independent unit-norm Gaussian rows.
pub fn unit_rows(rng: &mut impl Rng, n: usize, d: usize) -> DMatrix<f64> {
    let mut m = gaussian_matrix(rng, n, d);
    for mut row in m.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }
    m
}

/// `d × r` matrix with orthonormal columns (`r <= d`).
pub fn orthonormal_columns(rng: &mut impl Rng, d: usize, r: usize) -> DMatrix<f64> {
    assert!(r <= d, "cannot fit {r} orthonormal columns in dimension {d}");
    gaussian_matrix(rng, d, r).qr().q().columns(0, r).into_owned()
}

/// Random orthogonal `d × d` matrix.
pub fn orthogonal(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    orthonormal_columns(rng, d, d)
}

/// Symmetric matrix `Q diag(λ) Qᵀ` with eigenvalues uniform on `[lo, hi]`.
pub fn spd_with_spectrum(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = orthogonal(rng, d);
    let eig = DVector::from_fn(d, |_, _| rng.random_range(lo..=hi));
    let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Rank-deficient PSD matrix `GGᵀ / r` from a `d × r` Gaussian factor.
pub fn low_rank_psd(rng: &mut impl Rng, d: usize, r: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, d, r);
    let m = &g * g.transpose() / r as f64;
    (&m + m.transpose()) * 0.5
}

/// Uniform draw from the probability simplex of dimension `n`.
pub fn simplex(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| Exp1.sample(rng));
    let s: f64 = v.sum();
    v / s
}

/// A world with Dirichlet(1) conditionals and skill marginal.
pub fn discrete_world(rng: &mut impl Rng, skills: usize, outcomes: usize) -> DiscreteWorld {
    let mut px = DMatrix::zeros(skills, outcomes);
    for i in 0..skills {
        let row = simplex(rng, outcomes);
        px.row_mut(i).copy_from(&row.transpose());
    }
    let py = simplex(rng, skills);
    DiscreteWorld::new(renormalize_rows(px), renormalize(py)).expect("simplex draws are valid")
}

/// Rescales so the entries sum to one to the last bit that matters.
fn renormalize(v: DVector<f64>) -> DVector<f64> {
    let s: f64 = v.sum();
    v / s
}

fn renormalize_rows(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in m.row_iter_mut() {
        let s: f64 = row.sum();
        row /= s;
    }
    m
}

/// Causal attention whose off-diagonal mass per row is exactly `off_mass`
/// (spread randomly over earlier positions); the first row is `[1]`.
pub fn causal_attention(rng: &mut impl Rng, n: usize, off_mass: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    a[(0, 0)] = 1.0;
    for i in 1..n {
        let w = simplex(rng, i);
        for j in 0..i {
            a[(i, j)] = off_mass * w[j];
        }
        a[(i, i)] = 1.0 - off_mass;
    }
    a
}

/// Causal attention with random softmax-like rows (positive everywhere below the diagonal).
pub fn random_causal_attention(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = simplex(rng, i + 1);
        for j in 0..=i {
            a[(i, j)] = w[j];
        }
    }
    a
}
