//! Log-determinant (rate-distortion) entropy of embedding matrices.
//!
//! For an `n × d` matrix `Z` with covariance `Σ_Z = ZᵀZ / n`, the estimate is
//! `(d + n)/2 · log det(I_d + d/ε² · Σ_Z)` in nats. Unit-norm rows bound it by
//! `(d + n)/2 · d · log(1 + 1/ε²)`, which gives the normalized entropy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on row norms for matrices that claim unit rows.
pub const UNIT_ROW_TOL: f64 = 1e-9;

pub const DEFAULT_EPSILON: f64 = 0.1;

/// An `n × d` matrix whose rows are token (or sentence) representations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: DMatrix<f64>,
    row_normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::domain(format!(
                "embedding matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite entry at flat index {pos}")));
        }
        let row_normalized = rows_are_unit(&values);
        Ok(EmbeddingMatrix {
            values,
            row_normalized,
        })
    }

    /// Builds the matrix and scales every row to unit l2 norm.
    pub fn normalized(values: DMatrix<f64>) -> Result<Self> {
        Self::new(values)?.normalize_rows()
    }

    pub fn normalize_rows(mut self) -> Result<Self> {
        for (i, mut row) in self.values.row_iter_mut().enumerate() {
            let norm = row.norm();
            if norm == 0.0 {
                return Err(Error::domain(format!("row {i} is zero and cannot be normalized")));
            }
            row /= norm;
        }
        self.row_normalized = true;
        Ok(self)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    /// True when every row has unit norm (within [`UNIT_ROW_TOL`]).
    pub fn row_normalized(&self) -> bool {
        self.row_normalized
    }

    /// `Σ_Z = ZᵀZ / n`.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.values.transpose() * &self.values / self.n() as f64
    }
}

fn rows_are_unit(m: &DMatrix<f64>) -> bool {
    m.row_iter().all(|r| (r.norm() - 1.0).abs() <= UNIT_ROW_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    pub epsilon: f64,
}

impl Default for EntropyParams {
    fn default() -> Self {
        EntropyParams {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl EntropyParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(EntropyParams { epsilon })
    }
}

/// Log-det entropy estimate in nats.
///
/// The spectrum of `Σ_Z` is taken from the smaller of `ZᵀZ` and `ZZᵀ`, which
/// share their nonzero eigenvalues; negative round-off is clamped to zero.
pub fn logdet_entropy(z: &EmbeddingMatrix, p: EntropyParams) -> f64 {
    let (n, d) = (z.n() as f64, z.d() as f64);
    let scale = d / (p.epsilon * p.epsilon) / n;
    let sum_log: f64 = linalg::gram_eigenvalues(z.values())
        .into_iter()
        .map(|lambda| (scale * lambda).ln_1p())
        .sum();
    0.5 * (d + n) * sum_log
}

/// Upper bound of [`logdet_entropy`] over matrices with unit-norm rows.
pub fn max_entropy(n: usize, d: usize, p: EntropyParams) -> f64 {
    let (n, d) = (n as f64, d as f64);
    0.5 * (d + n) * d * (1.0 / (p.epsilon * p.epsilon)).ln_1p()
}

/// Entropy divided by its unit-row maximum; requires unit-norm rows.
pub fn normalized_entropy(z: &EmbeddingMatrix, p: EntropyParams) -> Result<f64> {
    if !z.row_normalized() {
        return Err(Error::precondition(
            "normalized entropy requires every row to have unit l2 norm",
        ));
    }
    Ok(logdet_entropy(z, p) / max_entropy(z.n(), z.d(), p))
}

/// Normalized entropy of a matrix with `r` equal singular values in dimension `d`.
pub fn closed_form_subspace(r: usize, d: usize, p: EntropyParams) -> Result<f64> {
    if r == 0 || r > d {
        return Err(Error::domain(format!("need 1 <= r <= d, got r={r}, d={d}")));
    }
    let inv_eps2 = 1.0 / (p.epsilon * p.epsilon);
    let ratio = r as f64 / d as f64;
    Ok(ratio * (inv_eps2 / ratio).ln_1p() / inv_eps2.ln_1p())
}

/// Builds a unit-row matrix whose rows repeat the columns of `directions`
/// (assumed orthonormal, `d × r`) `repeats` times each, giving `Σ_Z = UUᵀ/r`.
pub fn subspace_embedding(directions: &DMatrix<f64>, repeats: usize) -> Result<EmbeddingMatrix> {
    let r = directions.ncols();
    let d = directions.nrows();
    if r == 0 || repeats == 0 {
        return Err(Error::domain("need at least one direction and one repeat"));
    }
    let mut rows = DMatrix::zeros(r * repeats, d);
    for (i, mut row) in rows.row_iter_mut().enumerate() {
        row.copy_from(&directions.column(i % r).transpose());
    }
    EmbeddingMatrix::normalized(rows)
}

/// Least-squares fit of `log y = log c + γ log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub coefficient: f64,
    /// Coefficient of determination in log space.
    pub r_squared: f64,
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::shape(format!(
            "xs has {} points but ys has {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::domain(format!("need at least 3 points, got {}", xs.len())));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("power-law fit needs positive finite values, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= f64::EPSILON * lx.iter().map(|x| x * x).sum::<f64>().max(1.0) {
        return Err(Error::Rank("all x values are equal; exponent is undetermined".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let e = y - intercept - exponent * x;
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(PowerLawFit {
        exponent,
        coefficient: intercept.exp(),
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eps(e: f64) -> EntropyParams {
        EntropyParams::new(e).unwrap()
    }

    #[test]
    fn zero_matrix_has_zero_entropy() {
        let z = EmbeddingMatrix::new(DMatrix::zeros(4, 3)).unwrap();
        assert_eq!(logdet_entropy(&z, eps(0.1)), 0.0);
    }

    #[test]
    fn identity_matches_hand_value() {
        let z = EmbeddingMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert_relative_eq!(logdet_entropy(&z, eps(0.1)), 9.0 * 101f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(max_entropy(3, 3, eps(0.1)), 9.0 * 101f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(normalized_entropy(&z, eps(0.37)).unwrap(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn max_entropy_scalar_case() {
        assert_relative_eq!(max_entropy(1, 1, eps(1.0)), 2f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn non_finite_and_empty_rejected() {
        let mut m = DMatrix::zeros(2, 2);
        m[(1, 1)] = f64::NAN;
        assert!(matches!(EmbeddingMatrix::new(m), Err(Error::Domain(_))));
        assert!(EmbeddingMatrix::new(DMatrix::zeros(0, 3)).is_err());
        assert!(EmbeddingMatrix::normalized(DMatrix::zeros(2, 2)).is_err());
        assert!(EntropyParams::new(0.0).is_err());
    }

    #[test]
    fn normalized_entropy_needs_unit_rows() {
        let z = EmbeddingMatrix::new(DMatrix::identity(3, 3) * 2.0).unwrap();
        assert!(matches!(normalized_entropy(&z, eps(0.1)), Err(Error::Precondition(_))));
    }

    #[test]
    fn repeated_row_is_rank_one_subspace() {
        let mut m = DMatrix::zeros(5, 4);
        for mut row in m.row_iter_mut() {
            row.copy_from_slice(&[0.5, 0.5, 0.5, 0.5]);
        }
        let z = EmbeddingMatrix::new(m).unwrap();
        let got = normalized_entropy(&z, eps(0.1)).unwrap();
        assert_relative_eq!(got, closed_form_subspace(1, 4, eps(0.1)).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(closed_form_subspace(64, 64, eps(0.1)).unwrap(), 1.0, max_relative = 1e-15);
        // 0.01·ln(1 + 10000)/ln(101)
        let expected = 0.01 * 10001f64.ln() / 101f64.ln();
        let got = closed_form_subspace(1, 100, eps(0.1)).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-14);
        assert!((got - 0.019957).abs() < 5e-7);
        assert!(closed_form_subspace(5, 4, eps(0.1)).is_err());
        assert!(closed_form_subspace(0, 4, eps(0.1)).is_err());
    }

    #[test]
    fn closed_form_monotone_in_r() {
        let p = eps(0.1);
        let vals: Vec<f64> = (1..=128).map(|r| closed_form_subspace(r, 128, p).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn power_law_fit_exact_cases() {
        let xs: Vec<f64> = (1..=10).map(|i| i as f64 * 1.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powf(-0.5)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.coefficient - 3.0).abs() < 1e-11);
    }

    #[test]
    fn power_law_fit_errors() {
        assert!(matches!(
            fit_power_law(&[1.0, 2.0, -1.0], &[1.0, 1.0, 1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fit_power_law(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::Rank(_))
        ));
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
