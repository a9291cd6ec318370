//! Gaussian-process information gain over a sequence of representations.
//!
//! Observations are `y_t = f(z_t) + ε_t` with `f ~ GP(0, k)`, `k(z, z') = zᵀz'`
//! on unit-norm `z`, and `ε_t ~ N(0, σ²)`. The state keeps the Cholesky factor
//! of `K_T + σ²I` and borders it in `O(T²)` per appended token.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// `σ = 0.01`.
pub const DEFAULT_SIGMA2: f64 = 1e-4;
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KernelState {
    dim: usize,
    sigma2: f64,
    reps: Vec<DVector<f64>>,
    /// Lower triangle of `K_T`, row `i` holding `k(z_i, z_j)` for `j <= i`.
    gram_rows: Vec<Vec<f64>>,
    /// Lower-triangular factor of `K_T + σ²I`, packed by rows.
    chol_rows: Vec<Vec<f64>>,
}

impl KernelState {
    pub fn new(dim: usize, sigma2: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("representation dimension must be >= 1"));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain(format!("sigma^2 must be > 0, got {sigma2}")));
        }
        Ok(KernelState {
            dim,
            sigma2,
            reps: Vec::new(),
            gram_rows: Vec::new(),
            chol_rows: Vec::new(),
        })
    }

    /// State holding every row of `z` (`T × d`) in order.
    pub fn from_rows(z: &DMatrix<f64>, sigma2: f64) -> Result<Self> {
        let mut ks = KernelState::new(z.ncols(), sigma2)?;
        for row in z.row_iter() {
            ks.push(&row.transpose())?;
        }
        Ok(ks)
    }

    /// State holding every column of `z` (`d × T`) in order.
    pub fn from_columns(z: &DMatrix<f64>, sigma2: f64) -> Result<Self> {
        let mut ks = KernelState::new(z.nrows(), sigma2)?;
        for col in z.column_iter() {
            ks.push(&col.into_owned())?;
        }
        Ok(ks)
    }

    /// Appends a representation, l2-normalizing it first.
    pub fn push(&mut self, z: &DVector<f64>) -> Result<()> {
        self.check_dim(z)?;
        let z = linalg::unit(z).ok_or_else(|| Error::domain("cannot normalize a zero representation"))?;
        let k = self.kernel_vector(&z);
        let w = self.forward_solve(&k);
        let pivot = 1.0 + self.sigma2 - w.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > 0.0) {
            return Err(Error::Numerical(format!(
                "Cholesky border pivot {pivot} is not positive"
            )));
        }
        let mut gram_row: Vec<f64> = k.iter().copied().collect();
        gram_row.push(z.dot(&z));
        let mut chol_row: Vec<f64> = w.iter().copied().collect();
        chol_row.push(pivot.sqrt());
        self.gram_rows.push(gram_row);
        self.chol_rows.push(chol_row);
        self.reps.push(z);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn reps(&self) -> &[DVector<f64>] {
        &self.reps
    }

    /// `Z_T` with the representations as columns (`d × T`).
    pub fn reps_matrix(&self) -> DMatrix<f64> {
        if self.reps.is_empty() {
            return DMatrix::zeros(self.dim, 0);
        }
        DMatrix::from_columns(&self.reps)
    }

    /// `K_T`.
    pub fn gram(&self) -> DMatrix<f64> {
        let t = self.len();
        DMatrix::from_fn(t, t, |i, j| {
            if j <= i {
                self.gram_rows[i][j]
            } else {
                self.gram_rows[j][i]
            }
        })
    }

    /// Lower-triangular `L` with `L Lᵀ = K_T + σ²I`.
    pub fn chol(&self) -> DMatrix<f64> {
        let t = self.len();
        DMatrix::from_fn(t, t, |i, j| if j <= i { self.chol_rows[i][j] } else { 0.0 })
    }

    /// `½ log det(I + σ⁻²K_T)` read off the maintained factor.
    pub fn log_det_gain(&self) -> f64 {
        let log_diag: f64 = self.chol_rows.iter().map(|r| r[r.len() - 1].ln()).sum();
        log_diag - 0.5 * self.len() as f64 * self.sigma2.ln()
    }

    fn check_dim(&self, z: &DVector<f64>) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::shape(format!(
                "representation has dimension {} but the state uses {}",
                z.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `k_T(z) = [z_1ᵀz, …, z_Tᵀz]`.
    fn kernel_vector(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.reps.iter().map(|r| r.dot(z)))
    }

    /// Solves `L w = b`.
    fn forward_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut w = DVector::zeros(b.len());
        for i in 0..b.len() {
            let row = &self.chol_rows[i];
            let mut acc = b[i];
            for j in 0..i {
                acc -= row[j] * w[j];
            }
            w[i] = acc / row[i];
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
    pub info_gain: f64,
}

fn check_unit(z: &DVector<f64>) -> Result<()> {
    let n = z.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::precondition(format!("query must have unit norm, got {n}")));
    }
    Ok(())
}

/// Posterior mean and variance at `z` after observing `y` at the stored points.
pub fn posterior(ks: &KernelState, y: &DVector<f64>, z: &DVector<f64>) -> Result<PosteriorSummary> {
    if y.len() != ks.len() {
        return Err(Error::shape(format!(
            "{} observations for {} representations",
            y.len(),
            ks.len()
        )));
    }
    ks.check_dim(z)?;
    check_unit(z)?;
    let w = ks.forward_solve(&ks.kernel_vector(z));
    let u = ks.forward_solve(y);
    Ok(PosteriorSummary {
        mean: w.dot(&u),
        variance: (z.dot(z) - w.dot(&w)).max(0.0),
        info_gain: information_gain(ks),
    })
}

/// Posterior variance `σ_T²(z)`; observations do not enter it.
pub fn posterior_variance(ks: &KernelState, z: &DVector<f64>) -> Result<f64> {
    ks.check_dim(z)?;
    check_unit(z)?;
    let w = ks.forward_solve(&ks.kernel_vector(z));
    Ok((z.dot(z) - w.dot(&w)).max(0.0))
}

/// `I(y_T; f) = ½ Σ log(1 + σ⁻²λ_i(K_T))`, spectrum clamped at zero.
pub fn information_gain(ks: &KernelState) -> f64 {
    if ks.is_empty() {
        return 0.0;
    }
    let inv = 1.0 / ks.sigma2;
    0.5 * linalg::gram_eigenvalues(&ks.reps_matrix())
        .into_iter()
        .map(|l| (inv * l).ln_1p())
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainIncrement {
    /// `½ log(1 + σ⁻² σ_T²(z))`, the exact change in information gain.
    pub increment: f64,
    /// `½ log((1 + σ⁻² − σ²) + σ² σ_T²(z))`, reported for comparison only.
    pub paper_increment: f64,
    pub posterior_variance: f64,
}

/// Change in information gain from appending `z_next`.
pub fn info_gain_increment(ks: &KernelState, z_next: &DVector<f64>) -> Result<GainIncrement> {
    let var = posterior_variance(ks, z_next)?;
    let s2 = ks.sigma2;
    Ok(GainIncrement {
        increment: 0.5 * (var / s2).ln_1p(),
        paper_increment: 0.5 * ((1.0 + 1.0 / s2 - s2) + s2 * var).ln(),
        posterior_variance: var,
    })
}

/// Ridge coefficients `β = (Z_TᵀZ_T + σ²I)⁻¹ Z_Tᵀ z_{T+1}` for `reps` with
/// representations as columns.
pub fn ridge_fit(reps: &DMatrix<f64>, target: &DVector<f64>, sigma2: f64) -> Result<DVector<f64>> {
    if reps.nrows() != target.len() {
        return Err(Error::shape(format!(
            "reps have dimension {} but target has {}",
            reps.nrows(),
            target.len()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::domain(format!("sigma^2 must be > 0, got {sigma2}")));
    }
    let t = reps.ncols();
    if t == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut g = reps.transpose() * reps;
    for i in 0..t {
        g[(i, i)] += sigma2;
    }
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge Gram is not positive definite".into()))?;
    Ok(chol.solve(&(reps.transpose() * target)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeVarianceCheck {
    /// Posterior variance at the target.
    pub lhs: f64,
    /// `⟨z, z − Z_T β_ridge⟩`.
    pub rhs: f64,
}

pub fn verify_ridge_variance_identity(
    reps: &DMatrix<f64>,
    target: &DVector<f64>,
    sigma2: f64,
) -> Result<RidgeVarianceCheck> {
    let ks = KernelState::from_columns(reps, sigma2)?;
    let lhs = posterior_variance(&ks, target)?;
    let beta = ridge_fit(reps, target, sigma2)?;
    let fitted = reps * beta;
    let rhs = target.dot(&(target - fitted));
    Ok(RidgeVarianceCheck { lhs, rhs })
}

/// `‖A‖²_F / ‖A‖²₂`.
pub fn stable_rank(a: &DMatrix<f64>) -> Result<f64> {
    let spec = linalg::spectral_norm(a);
    if spec == 0.0 {
        return Err(Error::domain("stable rank of a zero matrix is undefined"));
    }
    Ok(linalg::frobenius_sq(a) / (spec * spec))
}

/// `rank(Z_T) · log(1 + σ⁻² ‖Z_T‖²₂)`, an upper bound on the gain.
pub fn rank_gain_bound(ks: &KernelState) -> f64 {
    if ks.is_empty() {
        return 0.0;
    }
    let z = ks.reps_matrix();
    let spec = linalg::spectral_norm(&z);
    linalg::numerical_rank(&z) as f64 * (spec * spec / ks.sigma2).ln_1p()
}

/// Gain divided by its dimension bound `d · log(1 + σ⁻² T)`.
pub fn normalized_info_gain(ks: &KernelState, d: usize) -> Result<f64> {
    if ks.is_empty() {
        return Err(Error::domain("normalized gain needs at least one representation"));
    }
    if d == 0 {
        return Err(Error::domain("hidden dimension must be >= 1"));
    }
    Ok(information_gain(ks) / normalization(ks.len(), d, ks.sigma2))
}

fn normalization(t: usize, d: usize, sigma2: f64) -> f64 {
    d as f64 * (t as f64 / sigma2).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainStep {
    pub t: usize,
    pub info_gain: f64,
    pub normalized_gain: f64,
    pub increment: f64,
    pub paper_increment: f64,
    pub posterior_variance: f64,
}

/// Per-token gain curve over the rows of `z` (`T × d`). Row `t` reports the
/// gain of the first `t` tokens and the increment contributed by token `t`.
/// The running gain is read from the incremental factor so the curve costs
/// `O(T³)` overall.
pub fn gain_curve(z: &DMatrix<f64>, sigma2: f64) -> Result<Vec<GainStep>> {
    let mut ks = KernelState::new(z.ncols(), sigma2)?;
    let mut out = Vec::with_capacity(z.nrows());
    for row in z.row_iter() {
        let zt = linalg::unit(&row.transpose())
            .ok_or_else(|| Error::domain("cannot normalize a zero representation"))?;
        let inc = info_gain_increment(&ks, &zt)?;
        ks.push(&zt)?;
        let gain = ks.log_det_gain();
        out.push(GainStep {
            t: ks.len(),
            info_gain: gain,
            normalized_gain: gain / normalization(ks.len(), z.ncols(), sigma2),
            increment: inc.increment,
            paper_increment: inc.paper_increment,
            posterior_variance: inc.posterior_variance,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    }

    #[test]
    fn prior_before_any_observation() {
        let ks = KernelState::new(3, 0.5).unwrap();
        let p = posterior(&ks, &DVector::zeros(0), &e(3, 1)).unwrap();
        assert_eq!(p.mean, 0.0);
        assert_eq!(p.variance, 1.0);
        assert_eq!(p.info_gain, 0.0);
    }

    #[test]
    fn single_observation_closed_form() {
        let s2 = 0.3;
        let mut ks = KernelState::new(2, s2).unwrap();
        ks.push(&e(2, 0)).unwrap();
        let p = posterior(&ks, &DVector::from_vec(vec![2.0]), &e(2, 0)).unwrap();
        assert!((p.mean - 2.0 / (1.0 + s2)).abs() < 1e-15);
        assert!((p.variance - s2 / (1.0 + s2)).abs() < 1e-15);
        assert!((information_gain(&ks) - 0.5 * (1.0 / s2).ln_1p()).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_rows_gain() {
        let s2 = 1e-4;
        let ks = KernelState::from_rows(&DMatrix::identity(3, 3), s2).unwrap();
        let expected = 1.5 * (1.0 / s2).ln_1p();
        assert!((information_gain(&ks) - expected).abs() < 1e-12);
        assert!((ks.log_det_gain() - expected).abs() < 1e-12);
    }

    #[test]
    fn first_increment_is_single_point_gain() {
        let ks = KernelState::new(4, 1e-4).unwrap();
        let inc = info_gain_increment(&ks, &e(4, 2)).unwrap();
        assert!((inc.increment - 0.5 * 1e4f64.ln_1p()).abs() < 1e-15);
    }

    #[test]
    fn repeated_token_gain() {
        let mut last = f64::INFINITY;
        for s2 in [1e-2, 1e-4, 1e-6, 1e-8] {
            let mut ks = KernelState::new(3, s2).unwrap();
            ks.push(&e(3, 0)).unwrap();
            let g = info_gain_increment(&ks, &e(3, 0)).unwrap();
            assert!((g.posterior_variance - s2 / (1.0 + s2)).abs() < 1e-12);
            // var = 1 - 1/(1+σ²) loses about ε/σ² to cancellation
            assert!((g.increment - 0.5 * (1.0 / (1.0 + s2)).ln_1p()).abs() < 1e-15 / s2);
            assert!(g.posterior_variance < last);
            last = g.posterior_variance;
        }
    }

    #[test]
    fn dimension_and_norm_checks() {
        let ks = KernelState::new(3, 0.1).unwrap();
        assert!(matches!(posterior_variance(&ks, &e(2, 0)), Err(Error::Shape(_))));
        assert!(matches!(
            posterior_variance(&ks, &(e(3, 0) * 2.0)),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            posterior(&ks, &DVector::zeros(1), &e(3, 0)),
            Err(Error::Shape(_))
        ));
        let mut ks = ks;
        assert!(ks.push(&DVector::zeros(3)).is_err());
        assert!(KernelState::new(3, 0.0).is_err());
    }

    #[test]
    fn ridge_scalar_cases() {
        let s2 = 0.25;
        let z = e(3, 0);
        let reps = DMatrix::from_columns(&[z.clone()]);
        let beta = ridge_fit(&reps, &z, s2).unwrap();
        assert!((beta[0] - 1.0 / (1.0 + s2)).abs() < 1e-15);
        let beta = ridge_fit(&reps, &e(3, 1), s2).unwrap();
        assert_eq!(beta[0], 0.0);
        let chk = verify_ridge_variance_identity(&reps, &z, s2).unwrap();
        assert!((chk.lhs - s2 / (1.0 + s2)).abs() < 1e-15);
        assert!((chk.rhs - s2 / (1.0 + s2)).abs() < 1e-15);
    }

    #[test]
    fn ridge_identity_with_no_history() {
        let chk = verify_ridge_variance_identity(&DMatrix::zeros(3, 0), &e(3, 2), 0.1).unwrap();
        assert_eq!(chk.lhs, 1.0);
        assert_eq!(chk.rhs, 1.0);
    }

    #[test]
    fn stable_rank_cases() {
        assert!((stable_rank(&DMatrix::identity(5, 5)).unwrap() - 5.0).abs() < 1e-12);
        let u = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let v = DVector::from_vec(vec![0.5, 3.0]);
        assert!((stable_rank(&(u * v.transpose())).unwrap() - 1.0).abs() < 1e-12);
        assert!(stable_rank(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn normalized_gain_cases() {
        let s2 = 1e-4;
        let d = 6;
        let mut ks = KernelState::new(d, s2).unwrap();
        assert!(normalized_info_gain(&ks, d).is_err());
        ks.push(&e(d, 0)).unwrap();
        assert!((normalized_info_gain(&ks, d).unwrap() - 1.0 / (2.0 * d as f64)).abs() < 1e-14);
        let full = KernelState::from_rows(&DMatrix::identity(d, d), s2).unwrap();
        assert!(normalized_info_gain(&full, d).unwrap() < 1.0);
    }

    #[test]
    fn gain_curve_chain_rule() {
        let z = DMatrix::from_row_slice(4, 3, &[1., 0., 0., 0.6, 0.8, 0., 0., 0., 2., 1., 1., 1.]);
        let curve = gain_curve(&z, 1e-2).unwrap();
        let mut acc = 0.0;
        for step in &curve {
            acc += step.increment;
            assert!((acc - step.info_gain).abs() < 1e-12);
        }
        let ks = KernelState::from_rows(&z, 1e-2).unwrap();
        assert!((information_gain(&ks) - curve[3].info_gain).abs() < 1e-12);
    }
}
