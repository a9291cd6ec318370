//! Picking informative context tokens: Lasso regression of the last token on
//! the preceding ones, head-averaged attention, and the attention-unrolling
//! decomposition that links the two.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_io::TokenSidecar;

pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_THRESHOLD: f64 = 0.01;
pub const KKT_TOL: f64 = 1e-6;
pub const ROW_SUM_TOL: f64 = 1e-6;
pub const UNROLL_TOL: f64 = 1e-5;

const MAX_SWEEPS: usize = 100_000;
const STEP_TOL: f64 = 1e-10;
const POLISH_EVERY: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub beta: DVector<f64>,
    pub sweeps: usize,
    pub kkt_residual: f64,
    /// Objective after each sweep, starting with the value at `β = 0`.
    pub objective_history: Vec<f64>,
}

/// Minimizes `‖z − Zβ‖² + λ‖β‖₁` by cyclic coordinate descent in Gram space.
///
/// `reps` holds the regressors as columns (`d × T`).
pub fn lasso_fit(reps: &DMatrix<f64>, target: &DVector<f64>, lambda: f64) -> Result<LassoFit> {
    if reps.nrows() != target.len() {
        return Err(Error::shape(format!(
            "reps have dimension {} but target has {}",
            reps.nrows(),
            target.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let t = reps.ncols();
    let gram = reps.transpose() * reps;
    let corr = reps.transpose() * target;
    let zz = target.dot(target);
    let objective = |beta: &DVector<f64>, g_beta: &DVector<f64>| {
        zz - 2.0 * corr.dot(beta) + beta.dot(g_beta) + lambda * beta.abs().sum()
    };

    let mut beta = DVector::zeros(t);
    // running G β
    let mut g_beta = DVector::zeros(t);
    let mut history = vec![zz];
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_step = 0.0f64;
        for j in 0..t {
            let gjj = gram[(j, j)];
            let old = beta[j];
            let new = if gjj > 0.0 {
                let rho = corr[j] - (g_beta[j] - gjj * old);
                soft_threshold(rho, 0.5 * lambda) / gjj
            } else {
                0.0
            };
            let step = new - old;
            if step != 0.0 {
                beta[j] = new;
                g_beta.axpy(step, &gram.column(j), 1.0);
                max_step = max_step.max(step.abs());
            }
        }
        let f = objective(&beta, &g_beta);
        let prev = *history.last().expect("history starts non-empty");
        if f > prev + 1e-12 * (1.0 + prev.abs()) {
            return Err(Error::Internal(format!(
                "lasso objective increased from {prev} to {f} at sweep {sweeps}"
            )));
        }
        history.push(f);
        if max_step < STEP_TOL {
            break;
        }
        // Coordinate descent crawls on near-collinear columns; once the support
        // settles, solve the restricted problem exactly.
        if sweeps % POLISH_EVERY == 0 && kkt(&gram, &corr, &beta, lambda) > KKT_TOL {
            if let Some(b) = polish(&gram, &corr, &beta, lambda) {
                let gb = &gram * &b;
                let f_new = objective(&b, &gb);
                if f_new <= f {
                    beta = b;
                    g_beta = gb;
                    history.push(f_new);
                    if kkt(&gram, &corr, &beta, lambda) <= KKT_TOL {
                        break;
                    }
                }
            }
        }
    }
    let kkt_residual = kkt(&gram, &corr, &beta, lambda);
    if sweeps >= MAX_SWEEPS && kkt_residual > KKT_TOL {
        return Err(Error::Convergence {
            sweeps,
            kkt_residual,
        });
    }
    Ok(LassoFit {
        beta,
        sweeps,
        kkt_residual,
        objective_history: history,
    })
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Drops columns from the support while they are linearly dependent (moving
/// along a null direction never raises the objective), then solves for the
/// exact minimizer on the face fixed by the remaining signs. Returns `None`
/// when that minimizer leaves the face.
fn polish(
    gram: &DMatrix<f64>,
    corr: &DVector<f64>,
    beta: &DVector<f64>,
    lambda: f64,
) -> Option<DVector<f64>> {
    let mut b = beta.clone();
    let tol = 1e-12 * gram.amax().max(1.0);
    loop {
        let support: Vec<usize> = (0..b.len()).filter(|&j| b[j] != 0.0).collect();
        if support.is_empty() {
            return None;
        }
        let k = support.len();
        let g_ss = DMatrix::from_fn(k, k, |x, y| gram[(support[x], support[y])]);
        let eig = g_ss.clone().symmetric_eigen();
        let (imin, &lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty support");
        if lmin > tol {
            let rhs = DVector::from_fn(k, |x, _| corr[support[x]] - 0.5 * lambda * b[support[x]].signum());
            let sol = g_ss.cholesky()?.solve(&rhs);
            let mut out = DVector::zeros(b.len());
            for (x, &j) in support.iter().enumerate() {
                if sol[x] == 0.0 || sol[x].signum() != b[j].signum() {
                    return None;
                }
                out[j] = sol[x];
            }
            return Some(out);
        }
        let mut v = eig.eigenvectors.column(imin).into_owned();
        if support.iter().enumerate().map(|(x, &j)| b[j].signum() * v[x]).sum::<f64>() < 0.0 {
            v.neg_mut();
        }
        let hit = support
            .iter()
            .enumerate()
            .filter(|&(x, &j)| v[x] != 0.0 && b[j] / v[x] > 0.0)
            .map(|(x, &j)| (x, j, b[j] / v[x]))
            .min_by(|p, q| p.2.total_cmp(&q.2));
        let Some((_, jhit, tau)) = hit else {
            return None;
        };
        for (x, &j) in support.iter().enumerate() {
            b[j] -= tau * v[x];
        }
        b[jhit] = 0.0;
    }
}

/// Largest violation of the Lasso optimality conditions.
fn kkt(gram: &DMatrix<f64>, corr: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    let grad = (gram * beta - corr) * 2.0;
    grad.iter()
        .zip(beta.iter())
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g + lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// KKT residual of an arbitrary `β` for the problem `(reps, target, λ)`.
pub fn lasso_kkt_residual(reps: &DMatrix<f64>, target: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    kkt(&(reps.transpose() * reps), &(reps.transpose() * target), beta, lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub threshold: f64,
}

/// Positions whose weight exceeds `threshold` in magnitude, ascending.
pub fn select_by_threshold(weights: &[f64], threshold: f64) -> Result<SelectionResult> {
    if !(threshold >= 0.0) {
        return Err(Error::domain(format!("threshold must be >= 0, got {threshold}")));
    }
    let (indices, scores) = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| w.abs() > threshold)
        .map(|(i, &w)| (i, w))
        .unzip();
    Ok(SelectionResult {
        indices,
        scores,
        threshold,
    })
}

/// Causal, row-stochastic attention weights of one layer, one matrix per head.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTensor {
    heads: Vec<DMatrix<f64>>,
    layer_index: usize,
}

impl AttentionTensor {
    pub fn new(heads: Vec<DMatrix<f64>>, layer_index: usize) -> Result<Self> {
        let first = heads
            .first()
            .ok_or_else(|| Error::domain("attention needs at least one head"))?;
        let n = first.nrows();
        for (h, m) in heads.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::shape(format!(
                    "head {h} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            validate_causal_stochastic(m).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("head {h}: {msg}")),
                other => other,
            })?;
        }
        Ok(AttentionTensor { heads, layer_index })
    }

    pub fn heads(&self) -> &[DMatrix<f64>] {
        &self.heads
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn seq_len(&self) -> usize {
        self.heads[0].nrows()
    }
}

fn validate_causal_stochastic(m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let mut sum = 0.0;
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !(v >= 0.0) {
                return Err(Error::domain(format!("negative weight {v} at ({i}, {j})")));
            }
            if j > i && v != 0.0 {
                return Err(Error::domain(format!("non-causal weight {v} at ({i}, {j})")));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::domain(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Mean over heads.
pub fn average_attention(att: &AttentionTensor) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(att.seq_len(), att.seq_len());
    for h in &att.heads {
        acc += h;
    }
    acc / att.heads.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unrolling {
    /// `λ_{T+1,T+1} v_{T+1} + Σ_j (λ_{T+1,j} / λ_{j,j}) z_j`.
    pub approx: DVector<f64>,
    /// `‖z_{T+1} − approx‖₂`.
    pub residual_norm: f64,
    /// `−Σ_j λ_{T+1,j} Σ_{k<j} (λ_{j,k} / λ_{j,j}) v_k`; `approx + correction = z_{T+1}`.
    pub correction: DVector<f64>,
}

/// Substitutes each context token's attention decomposition into the last one.
///
/// `att_avg` is `(T+1) × (T+1)`; `values` and `reps` hold `v_i` and `z_i` as
/// rows. The inputs must satisfy `z_i = Σ_{j≤i} λ_{i,j} v_j` (to 1e-5).
pub fn attention_unroll_residual(
    att_avg: &DMatrix<f64>,
    values: &DMatrix<f64>,
    reps: &DMatrix<f64>,
) -> Result<Unrolling> {
    let n = att_avg.nrows();
    if n == 0 || att_avg.ncols() != n || values.nrows() != n || reps.nrows() != n {
        return Err(Error::shape(format!(
            "attention {}x{}, values {} rows, reps {} rows",
            att_avg.nrows(),
            att_avg.ncols(),
            values.nrows(),
            reps.nrows()
        )));
    }
    if values.ncols() != reps.ncols() {
        return Err(Error::shape(format!(
            "value dimension {} differs from representation dimension {}",
            values.ncols(),
            reps.ncols()
        )));
    }
    let forward = att_avg.lower_triangle() * values;
    for i in 0..n {
        let gap = (forward.row(i) - reps.row(i)).norm();
        if gap > UNROLL_TOL * reps.row(i).norm().max(1.0) {
            return Err(Error::precondition(format!(
                "z_{i} differs from its attention mix of values by {gap:e}"
            )));
        }
    }
    let last = n - 1;
    let mut approx = values.row(last).transpose() * att_avg[(last, last)];
    let mut correction = DVector::zeros(values.ncols());
    for j in 0..last {
        let w = att_avg[(last, j)];
        if w == 0.0 {
            continue;
        }
        let diag = att_avg[(j, j)];
        if diag == 0.0 {
            return Err(Error::domain(format!(
                "degenerate diagonal: token {j} has zero self-attention"
            )));
        }
        approx += reps.row(j).transpose() * (w / diag);
        for k in 0..j {
            let l = att_avg[(j, k)];
            if l != 0.0 {
                correction -= values.row(k).transpose() * (w * l / diag);
            }
        }
    }
    let residual_norm = (reps.row(last).transpose() - &approx).norm();
    Ok(Unrolling {
        approx,
        residual_norm,
        correction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub index: usize,
    pub token: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub query_index: usize,
    pub query_token: String,
    pub lasso: Vec<Pick>,
    pub attention: Vec<Pick>,
    pub overlap: Vec<usize>,
    pub jaccard: f64,
}

impl SelectionReport {
    /// One-line summary, e.g.
    /// `For token [No]: attention picks [Is], [.], [?]. Lasso picks [Yes], [Yes].`
    pub fn to_text(&self) -> String {
        let fmt = |picks: &[Pick]| {
            if picks.is_empty() {
                "nothing".to_owned()
            } else {
                picks
                    .iter()
                    .map(|p| format!("[{}]", p.token.trim()))
                    .collect::<Vec<_>>()
                    .join(", ")
            }
        };
        format!(
            "For token [{}]: attention picks {}. Lasso picks {}.",
            self.query_token.trim(),
            fmt(&self.attention),
            fmt(&self.lasso)
        )
    }
}

/// Pairs both selections with their token strings and measures agreement.
/// Two empty selections count as identical (Jaccard 1).
pub fn compare_selections(
    lasso_sel: &SelectionResult,
    attn_sel: &SelectionResult,
    tokens: &TokenSidecar,
    query: usize,
) -> Result<SelectionReport> {
    let lookup = |i: usize| {
        tokens.tokens.get(i).cloned().ok_or_else(|| {
            Error::Consistency(format!(
                "index {i} is outside the {}-token sidecar",
                tokens.len()
            ))
        })
    };
    let picks = |sel: &SelectionResult| {
        sel.indices
            .iter()
            .zip(&sel.scores)
            .map(|(&index, &score)| {
                Ok(Pick {
                    index,
                    token: lookup(index)?,
                    score,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    let lasso = picks(lasso_sel)?;
    let attention = picks(attn_sel)?;
    let query_token = lookup(query)?;
    let overlap: Vec<usize> = lasso_sel
        .indices
        .iter()
        .copied()
        .filter(|i| attn_sel.indices.contains(i))
        .collect();
    let union = lasso_sel.indices.len() + attn_sel.indices.len() - overlap.len();
    let jaccard = if union == 0 {
        1.0
    } else {
        overlap.len() as f64 / union as f64
    };
    Ok(SelectionReport {
        query_index: query,
        query_token,
        lasso,
        attention,
        overlap,
        jaccard,
    })
}
