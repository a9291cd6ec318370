//! Sentence-level geometry: vector summaries, covariance summaries and
//! distances between them, plus a deterministic PCA for plot coordinates.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_GAMMA: f64 = 100.0;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
/// Radicands above `-RADICAND_TOL` are clamped to zero.
pub const RADICAND_TOL: f64 = 1e-12;
/// Relative diagonal shift for metrics that need strict positive-definiteness.
pub const REGULARIZATION_SCALE: f64 = 1e-8;

/// A symmetric positive semi-definite matrix, possibly shifted by `δI`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    values: DMatrix<f64>,
    regularization: f64,
}

impl SpdMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() || values.nrows() == 0 {
            return Err(Error::shape(format!(
                "covariance must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("covariance has non-finite entries"));
        }
        let asym = (&values - values.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::domain(format!("matrix is not symmetric (max gap {asym:e})")));
        }
        let min_eig = linalg::sym_eigenvalues(&values)[0];
        if min_eig < -PSD_TOL {
            return Err(Error::domain(format!("matrix has negative eigenvalue {min_eig:e}")));
        }
        Ok(SpdMatrix {
            values: linalg::symmetrize(&values),
            regularization: 0.0,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Diagonal shift already applied to `values`.
    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    /// Adds `δ = 1e-8 · tr(A) / d` to the diagonal (once).
    pub fn regularized(&self) -> Self {
        if self.regularization > 0.0 {
            return self.clone();
        }
        let d = self.dim() as f64;
        let mut delta = REGULARIZATION_SCALE * self.values.trace() / d;
        if !(delta > 0.0) {
            delta = REGULARIZATION_SCALE;
        }
        let mut values = self.values.clone();
        for i in 0..self.dim() {
            values[(i, i)] += delta;
        }
        SpdMatrix {
            values,
            regularization: delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryMode {
    LastToken,
    Mean,
    Covariance,
}

impl FromStr for SummaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" | "last_token" => Ok(SummaryMode::LastToken),
            "mean" => Ok(SummaryMode::Mean),
            "cov" | "covariance" => Ok(SummaryMode::Covariance),
            other => Err(Error::Configuration(format!("unknown summary mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SentenceEmbedding {
    LastToken(DVector<f64>),
    Mean(DVector<f64>),
    Covariance(SpdMatrix),
}

impl SentenceEmbedding {
    pub fn mode(&self) -> SummaryMode {
        match self {
            SentenceEmbedding::LastToken(_) => SummaryMode::LastToken,
            SentenceEmbedding::Mean(_) => SummaryMode::Mean,
            SentenceEmbedding::Covariance(_) => SummaryMode::Covariance,
        }
    }

    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            SentenceEmbedding::LastToken(v) | SentenceEmbedding::Mean(v) => Some(v),
            SentenceEmbedding::Covariance(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&SpdMatrix> {
        match self {
            SentenceEmbedding::Covariance(m) => Some(m),
            _ => None,
        }
    }
}

/// Summarizes a sentence's token matrix. Covariance is the second moment
/// `ZᵀZ / n`, or the centered covariance when `center` is set.
pub fn summarize(z: &EmbeddingMatrix, mode: SummaryMode, center: bool) -> Result<SentenceEmbedding> {
    let values = z.values();
    let n = values.nrows();
    Ok(match mode {
        SummaryMode::LastToken => SentenceEmbedding::LastToken(values.row(n - 1).transpose()),
        SummaryMode::Mean => SentenceEmbedding::Mean(column_mean(values)),
        SummaryMode::Covariance => {
            let cov = if center {
                let mean = column_mean(values);
                let centered = DMatrix::from_fn(n, values.ncols(), |i, j| values[(i, j)] - mean[j]);
                centered.transpose() * &centered / n as f64
            } else {
                z.covariance()
            };
            SentenceEmbedding::Covariance(SpdMatrix::new(linalg::symmetrize(&cov))?)
        }
    })
}

fn column_mean(m: &DMatrix<f64>) -> DVector<f64> {
    m.row_mean().transpose()
}

fn same_dims(a: &SpdMatrix, b: &SpdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "matrices are {}x{} and {}x{}",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    Ok(())
}

fn root_of_radicand(r: f64) -> Result<f64> {
    if r < -RADICAND_TOL || r.is_nan() {
        return Err(Error::Numerical(format!("negative radicand {r:e}")));
    }
    Ok(r.max(0.0).sqrt())
}

fn strict_log_det(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    linalg::spd_log_det(m)
        .ok_or_else(|| Error::domain(format!("{what} is not strictly positive definite")))
}

/// `√(log det((A+B)/2) − (log det A + log det B)/2)`.
pub fn dist_logdet(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    same_dims(a, b)?;
    let mid = (a.values() + b.values()) * 0.5;
    let r = strict_log_det(&mid, "(A+B)/2")?
        - 0.5 * (strict_log_det(a.values(), "A")? + strict_log_det(b.values(), "B")?);
    root_of_radicand(r)
}

/// `Σ log(1 + γ λ_i(M))`.
fn log_det_shifted(m: &DMatrix<f64>, gamma: f64) -> f64 {
    linalg::sym_eigenvalues(m)
        .into_iter()
        .map(|l| (gamma * l).ln_1p())
        .sum()
}

/// `√(log det(I + γ(A+B)/2) − (log det(I+γA) + log det(I+γB))/2)`.
pub fn dist_js(a: &SpdMatrix, b: &SpdMatrix, gamma: f64) -> Result<f64> {
    root_of_radicand(js_radicand(a, b, gamma)?)
}

/// The squared JS distance before the square root.
pub fn js_radicand(a: &SpdMatrix, b: &SpdMatrix, gamma: f64) -> Result<f64> {
    same_dims(a, b)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::domain(format!("gamma must be > 0, got {gamma}")));
    }
    let mid = (a.values() + b.values()) * 0.5;
    Ok(log_det_shifted(&mid, gamma)
        - 0.5 * (log_det_shifted(a.values(), gamma) + log_det_shifted(b.values(), gamma)))
}

/// `‖log(B^{-1/2} A B^{-1/2})‖_F` via the generalized eigenvalues of `(A, B)`.
pub fn dist_riemann(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    same_dims(a, b)?;
    let chol = linalg::symmetrize(b.values())
        .cholesky()
        .ok_or_else(|| Error::domain("B is not strictly positive definite"))?;
    let l = chol.l();
    let l_inv_a = l
        .solve_lower_triangular(a.values())
        .ok_or_else(|| Error::domain("B factor is singular"))?;
    let whitened = l
        .solve_lower_triangular(&l_inv_a.transpose())
        .ok_or_else(|| Error::domain("B factor is singular"))?;
    let mut sum = 0.0;
    for mu in linalg::sym_eigenvalues(&whitened) {
        if !(mu > 0.0) {
            return Err(Error::domain("A is not strictly positive definite"));
        }
        sum += mu.ln().powi(2);
    }
    Ok(sum.sqrt())
}

fn spd_log(m: &SpdMatrix, what: &str) -> Result<DMatrix<f64>> {
    if linalg::sym_eigenvalues(m.values())[0] <= 0.0 {
        return Err(Error::domain(format!("{what} is not strictly positive definite")));
    }
    Ok(linalg::sym_apply(m.values(), f64::ln))
}

/// `‖log A − log B‖_F`.
pub fn dist_loge(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    same_dims(a, b)?;
    Ok((spd_log(a, "A")? - spd_log(b, "B")?).norm())
}

/// `‖A − B‖_F`.
pub fn dist_frobenius(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    same_dims(a, b)?;
    Ok((a.values() - b.values()).norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorCheck {
    /// `(γ, d_JS² / ((γ²/8)‖A−B‖²_F))` in input order.
    pub points: Vec<(f64, f64)>,
    /// `max |ratio − 1| / γ` over the two largest `γ`.
    pub rate_constant: f64,
}

/// Compares `d_JS²` with its leading Taylor term `(γ²/8)‖A − B‖²_F`.
pub fn verify_js_taylor(a: &SpdMatrix, b: &SpdMatrix, gammas: &[f64]) -> Result<TaylorCheck> {
    same_dims(a, b)?;
    let diff_sq = linalg::frobenius_sq(&(a.values() - b.values()));
    if diff_sq == 0.0 {
        return Err(Error::domain("A = B: the Taylor ratio is 0/0"));
    }
    if gammas.is_empty() {
        return Err(Error::domain("need at least one gamma"));
    }
    let norm = linalg::spectral_norm(a.values()).max(linalg::spectral_norm(b.values()));
    let mut points = Vec::with_capacity(gammas.len());
    for &g in gammas {
        if !(g > 0.0) || g * norm >= 1.0 {
            return Err(Error::precondition(format!(
                "gamma {g} must lie in (0, 1/{norm}) for the expansion"
            )));
        }
        let ratio = js_radicand(a, b, g)? / (g * g / 8.0 * diff_sq);
        points.push((g, ratio));
    }
    let mut by_gamma = points.clone();
    by_gamma.sort_by(|x, y| y.0.total_cmp(&x.0));
    let rate_constant = by_gamma
        .iter()
        .take(2)
        .map(|(g, r)| (r - 1.0).abs() / g)
        .fold(0.0, f64::max);
    Ok(TaylorCheck {
        points,
        rate_constant,
    })
}

/// Projects rows of `points` (`n × d`) onto the top-`k` principal axes.
///
/// Each axis is signed so its largest-magnitude loading is positive. Axes
/// beyond the rank of the centered data project to zero.
pub fn pca_project(points: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let (n, d) = points.shape();
    if n < 2 {
        return Err(Error::domain(format!("PCA needs at least 2 points, got {n}")));
    }
    if k > d {
        return Err(Error::domain(format!("k = {k} exceeds dimension {d}")));
    }
    let mean = column_mean(points);
    let centered = DMatrix::from_fn(n, d, |i, j| points[(i, j)] - mean[j]);
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let mut axes = DMatrix::zeros(d, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let mut axis = v_t.row(idx).transpose();
        let pivot = axis
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, &v)| if v.abs() > best.1.abs() { (i, v) } else { best });
        if pivot.1 < 0.0 {
            axis = -axis;
        }
        axes.set_column(col, &axis);
    }
    Ok(centered * axes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2,
    Logdet,
    Js,
    Riemann,
    Loge,
    Frobenius,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::L2 => "l2",
            Metric::Logdet => "logdet",
            Metric::Js => "js",
            Metric::Riemann => "riemann",
            Metric::Loge => "loge",
            Metric::Frobenius => "frobenius",
        }
    }

    fn needs_regularization(self) -> bool {
        matches!(self, Metric::Logdet | Metric::Riemann | Metric::Loge)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Metric::L2),
            "logdet" => Ok(Metric::Logdet),
            "js" => Ok(Metric::Js),
            "riemann" => Ok(Metric::Riemann),
            "loge" => Ok(Metric::Loge),
            "frobenius" => Ok(Metric::Frobenius),
            other => Err(Error::Configuration(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceParams {
    pub gamma: f64,
}

impl Default for DistanceParams {
    fn default() -> Self {
        DistanceParams {
            gamma: DEFAULT_GAMMA,
        }
    }
}

/// Pairwise distances in input order. `l2` applies to vector summaries, the
/// matrix metrics to covariance summaries. Log-det, Riemannian and
/// log-Euclidean inputs are regularized first.
pub fn distance_matrix(
    sentences: &[SentenceEmbedding],
    metric: Metric,
    params: DistanceParams,
) -> Result<DMatrix<f64>> {
    let n = sentences.len();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mode = sentences[0].mode();
    if sentences.iter().any(|s| s.mode() != mode) {
        return Err(Error::Configuration("all sentences must use the same summary mode".into()));
    }
    let vector_metric = metric == Metric::L2;
    if vector_metric != (mode != SummaryMode::Covariance) {
        return Err(Error::Configuration(format!(
            "metric `{metric}` does not apply to {mode:?} summaries"
        )));
    }
    let matrices: Vec<SpdMatrix> = if vector_metric {
        Vec::new()
    } else {
        sentences
            .iter()
            .map(|s| {
                let m = s.as_matrix().expect("covariance mode checked above");
                if metric.needs_regularization() {
                    m.regularized()
                } else {
                    m.clone()
                }
            })
            .collect()
    };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| {
            if vector_metric {
                let (a, b) = (sentences[i].as_vector().unwrap(), sentences[j].as_vector().unwrap());
                if a.len() != b.len() {
                    return Err(Error::shape("sentence vectors differ in dimension"));
                }
                Ok((a - b).norm())
            } else {
                let (a, b) = (&matrices[i], &matrices[j]);
                match metric {
                    Metric::Logdet => dist_logdet(a, b),
                    Metric::Js => dist_js(a, b, params.gamma),
                    Metric::Riemann => dist_riemann(a, b),
                    Metric::Loge => dist_loge(a, b),
                    Metric::Frobenius => dist_frobenius(a, b),
                    Metric::L2 => unreachable!(),
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = DMatrix::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub within_mean: f64,
    pub cross_mean: f64,
    /// `within_mean / cross_mean`; below one means groups are separated.
    pub ratio: f64,
}

/// Mean within-group versus mean cross-group distance.
pub fn group_separation(dist: &DMatrix<f64>, groups: &[usize]) -> Result<Separation> {
    let n = dist.nrows();
    if groups.len() != n || !dist.is_square() {
        return Err(Error::shape(format!(
            "{} group labels for a {}x{} distance matrix",
            groups.len(),
            dist.nrows(),
            dist.ncols()
        )));
    }
    let (mut within, mut nw, mut cross, mut nc) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            if groups[i] == groups[j] {
                within += dist[(i, j)];
                nw += 1;
            } else {
                cross += dist[(i, j)];
                nc += 1;
            }
        }
    }
    if nw == 0 || nc == 0 {
        return Err(Error::domain("need at least one within-group and one cross-group pair"));
    }
    let (within_mean, cross_mean) = (within / nw as f64, cross / nc as f64);
    Ok(Separation {
        within_mean,
        cross_mean,
        ratio: within_mean / cross_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(d: usize, vals: &[f64]) -> SpdMatrix {
        SpdMatrix::new(DMatrix::from_row_slice(d, d, vals)).unwrap()
    }

    fn scalar(v: f64) -> SpdMatrix {
        spd(1, &[v])
    }

    #[test]
    fn summaries_of_single_and_opposite_rows() {
        let z = EmbeddingMatrix::new(DMatrix::from_row_slice(1, 2, &[0.6, 0.8])).unwrap();
        let last = summarize(&z, SummaryMode::LastToken, false).unwrap();
        let mean = summarize(&z, SummaryMode::Mean, false).unwrap();
        assert_eq!(last.as_vector(), mean.as_vector());
        let cov = summarize(&z, SummaryMode::Covariance, false).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.36, 0.48, 0.48, 0.64]);
        assert!((cov.as_matrix().unwrap().values() - &expected).amax() < 1e-15);

        let z = EmbeddingMatrix::new(DMatrix::from_row_slice(2, 2, &[0.6, 0.8, -0.6, -0.8])).unwrap();
        let mean = summarize(&z, SummaryMode::Mean, false).unwrap();
        assert_eq!(mean.as_vector().unwrap().norm(), 0.0);
        let cov = summarize(&z, SummaryMode::Covariance, false).unwrap();
        assert!((cov.as_matrix().unwrap().values() - &expected).amax() < 1e-15);
        let centered = summarize(&z, SummaryMode::Covariance, true).unwrap();
        assert!((centered.as_matrix().unwrap().values() - &expected).amax() < 1e-15);
    }

    #[test]
    fn logdet_scalar_case() {
        let got = dist_logdet(&scalar(1.0), &scalar(9.0)).unwrap();
        assert!((got - (5f64.ln() - 3f64.ln()).sqrt()).abs() < 1e-15);
        assert_eq!(dist_logdet(&scalar(2.0), &scalar(2.0)).unwrap(), 0.0);
        assert!(matches!(dist_logdet(&scalar(0.0), &scalar(1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn js_scalar_case() {
        let got = dist_js(&scalar(1.0), &scalar(3.0), 1.0).unwrap();
        let expected = (3f64 / 8f64.sqrt()).ln().sqrt();
        assert!((got - expected).abs() < 1e-15);
        assert!(dist_js(&scalar(0.0), &scalar(0.0), 100.0).unwrap() == 0.0);
    }

    #[test]
    fn riemann_and_loge_scalar_multiples() {
        let d = 3;
        let c = 2.5;
        let a = SpdMatrix::new(DMatrix::identity(d, d) * c).unwrap();
        let b = SpdMatrix::new(DMatrix::identity(d, d)).unwrap();
        assert!((dist_riemann(&a, &b).unwrap() - (d as f64).sqrt() * c.ln()).abs() < 1e-14);
        let e = SpdMatrix::new(DMatrix::identity(d, d) * std::f64::consts::E).unwrap();
        assert!((dist_loge(&e, &b).unwrap() - (d as f64).sqrt()).abs() < 1e-14);
        assert!(dist_riemann(&scalar(0.0), &scalar(1.0)).is_err());
        assert!(dist_loge(&scalar(0.0), &scalar(1.0)).is_err());
    }

    #[test]
    fn frobenius_unit_difference() {
        let a = spd(2, &[2.0, 0.0, 0.0, 1.0]);
        let b = spd(2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(dist_frobenius(&a, &b).unwrap(), 1.0);
        assert!(matches!(dist_frobenius(&a, &scalar(1.0)), Err(Error::Shape(_))));
    }

    #[test]
    fn spd_validation() {
        assert!(SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])).is_err());
        assert!(SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(SpdMatrix::new(DMatrix::zeros(2, 3)).is_err());
        let r = spd(2, &[2.0, 0.0, 0.0, 0.0]).regularized();
        assert!((r.regularization() - 1e-8).abs() < 1e-22);
        assert_eq!(r.regularized().regularization(), r.regularization());
    }

    #[test]
    fn taylor_scalar_leading_term() {
        // d = 1, A = 2, B = 1: d_JS² = log(1 + 3γ/2) − (log(1 + 2γ) + log(1 + γ))/2
        let chk = verify_js_taylor(&scalar(2.0), &scalar(1.0), &[1e-2, 1e-3, 1e-4]).unwrap();
        for &(g, ratio) in &chk.points {
            let exact = (1.5 * g).ln_1p() - 0.5 * ((2.0 * g).ln_1p() + g.ln_1p());
            assert!((ratio - exact / (g * g / 8.0)).abs() < 1e-6);
        }
        assert!((chk.points[2].1 - 1.0).abs() < 1e-3);
        assert!(verify_js_taylor(&scalar(2.0), &scalar(2.0), &[1e-3]).is_err());
        assert!(verify_js_taylor(&scalar(2.0), &scalar(1.0), &[0.6]).is_err());
    }

    #[test]
    fn pca_collinear_points() {
        let dir = DVector::from_vec(vec![1.0, -2.0, 2.0]) / 3.0;
        let ts = [0.0, 1.0, -0.5, 4.0];
        let pts = DMatrix::from_fn(4, 3, |i, j| ts[i] * dir[j] + 1.0);
        let proj = pca_project(&pts, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let orig = (pts.row(i) - pts.row(j)).norm();
                assert!(((proj[(i, 0)] - proj[(j, 0)]).abs() - orig).abs() < 1e-12);
            }
        }
        assert!(pca_project(&pts, 4).is_err());
        assert!(pca_project(&pts.rows(0, 1).into_owned(), 1).is_err());
    }

    #[test]
    fn pca_sign_convention() {
        let pts = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, -1.0, 0.1, -2.0, -0.1]);
        let a = pca_project(&pts, 1).unwrap();
        let b = pca_project(&(-pts), 1).unwrap();
        // flipping the data flips the projections, not the axis
        assert!((a + b).amax() < 1e-12);
    }

    #[test]
    fn distance_matrix_shapes_and_errors() {
        let v = |x: f64| SentenceEmbedding::Mean(DVector::from_vec(vec![x, 0.0]));
        let m = distance_matrix(&[v(1.0)], Metric::L2, DistanceParams::default()).unwrap();
        assert_eq!(m, DMatrix::zeros(1, 1));
        let m = distance_matrix(&[v(1.0), v(3.0), v(1.0)], Metric::L2, DistanceParams::default()).unwrap();
        assert_eq!(m[(0, 2)], 0.0);
        assert_eq!(m[(0, 1)], 2.0);
        assert!(matches!(
            distance_matrix(&[v(1.0)], Metric::Js, DistanceParams::default()),
            Err(Error::Configuration(_))
        ));
        let c = SentenceEmbedding::Covariance(scalar(1.0));
        assert!(matches!(
            distance_matrix(&[c.clone()], Metric::L2, DistanceParams::default()),
            Err(Error::Configuration(_))
        ));
        assert!(distance_matrix(&[c, v(1.0)], Metric::Js, DistanceParams::default()).is_err());
    }

    #[test]
    fn separation_ratio() {
        let d = DMatrix::from_row_slice(4, 4, &[0., 1., 4., 4., 1., 0., 4., 4., 4., 4., 0., 1., 4., 4., 1., 0.]);
        let s = group_separation(&d, &[0, 0, 1, 1]).unwrap();
        assert_eq!(s.ratio, 0.25);
        assert!(group_separation(&d, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("cov".parse::<SummaryMode>().unwrap(), SummaryMode::Covariance);
        assert_eq!("riemann".parse::<Metric>().unwrap(), Metric::Riemann);
        assert!("cosine".parse::<Metric>().is_err());
    }
}
