//! Skill-graph simulator for conditional-entropy scaling laws.
//!
//! Skills are ranked by degree; skill `k` has probability
//! `k^{-(α+1)} / Z_α`. A model that has comprehended the `n` easiest skills has
//! conditional entropy `C` on them and `B` on the rest. All quantities below
//! are exact finite sums over the `M` skills; the integral approximations only
//! show up as the asymptotic exponents the tests recover.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{fit_power_law, PowerLawFit};
use crate::error::{Error, Result};
use crate::powersum::power_sum;

/// Distribution sums must hit one within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Largest skill count [`skill_distribution`] will materialize.
pub const MAX_MATERIALIZED_SKILLS: u64 = 100_000_000;

const ALPHA_LO: f64 = 1e-6;
const ALPHA_HI: f64 = 10.0;
const ALPHA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillWorld {
    /// Total number of skills `M`.
    pub m: u64,
    /// Tail exponent `α`.
    pub alpha: f64,
    /// Conditional entropy before a skill is comprehended (nats).
    pub b: f64,
    /// Conditional entropy after comprehension (nats).
    pub c: f64,
    /// Entropy reduction per flop.
    pub delta: f64,
    /// Parameters needed per skill.
    pub neurons_per_skill: u64,
    /// Slope `A` of the per-skill KL term in dataset size.
    pub a_const: f64,
    /// Exponent `γ` in `Z_α ∝ D^γ`.
    pub gamma_d: f64,
}

impl Default for SkillWorld {
    fn default() -> Self {
        SkillWorld {
            m: 1_000_000,
            alpha: 0.5,
            b: 10.0,
            c: 1.0,
            delta: 1.0,
            neurons_per_skill: 1,
            a_const: 1.0,
            gamma_d: 0.3,
        }
    }
}

impl SkillWorld {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::domain(format!("need M >= 2 skills, got {}", self.m)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.c >= 0.0 && self.c < self.b && self.b.is_finite()) {
            return Err(Error::domain(format!(
                "need 0 <= C < B, got B={}, C={}",
                self.b, self.c
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::domain(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.neurons_per_skill < 1 {
            return Err(Error::domain("neurons_per_skill must be >= 1"));
        }
        if !(self.a_const >= 0.0 && self.a_const.is_finite()) {
            return Err(Error::domain(format!("A must be >= 0, got {}", self.a_const)));
        }
        if !self.gamma_d.is_finite() {
            return Err(Error::domain("gamma_d must be finite"));
        }
        Ok(())
    }

    /// Normalizer `Z_α = Σ_{k=1}^{M} k^{-(α+1)}`.
    pub fn normalizer(&self) -> f64 {
        normalizer(self.alpha, self.m)
    }

    /// `p_skill(y_k)` for a 1-based rank `k`.
    pub fn skill_probability(&self, k: u64) -> f64 {
        (k as f64).powf(-(self.alpha + 1.0)) / self.normalizer()
    }
}

fn normalizer(alpha: f64, m: u64) -> f64 {
    power_sum(alpha + 1.0, 1, m)
}

/// Skill probabilities `p_1 > p_2 > … > p_M`.
pub fn skill_distribution(w: &SkillWorld) -> Result<Vec<f64>> {
    w.validate()?;
    if w.m > MAX_MATERIALIZED_SKILLS {
        return Err(Error::domain(format!(
            "M = {} is too large to materialize (limit {MAX_MATERIALIZED_SKILLS})",
            w.m
        )));
    }
    let z = w.normalizer();
    let s = w.alpha + 1.0;
    Ok((1..=w.m).map(|k| (k as f64).powf(-s) / z).collect())
}

/// `H(X|Y)` after the `n` easiest skills are comprehended.
pub fn conditional_entropy_after(w: &SkillWorld, n: u64) -> Result<f64> {
    w.validate()?;
    if n > w.m {
        return Err(Error::domain(format!("n = {n} exceeds M = {}", w.m)));
    }
    if n == 0 {
        return Ok(w.b);
    }
    if n == w.m {
        return Ok(w.c);
    }
    let tail = power_sum(w.alpha + 1.0, n + 1, w.m) / w.normalizer();
    Ok(w.c + (w.b - w.c) * tail)
}

/// Fits `H(n) − C` against `n`; the exponent approaches `−α`.
pub fn verify_skill_power_law(w: &SkillWorld, ns: &[u64]) -> Result<PowerLawFit> {
    w.validate()?;
    if let Some(&bad) = ns.iter().find(|&&n| n == 0 || n >= w.m) {
        return Err(Error::domain(format!("skill counts must lie in [1, M), got {bad}")));
    }
    let ys = ns
        .par_iter()
        .map(|&n| conditional_entropy_after(w, n).map(|h| h - w.c))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    fit_power_law(&xs, &ys)
}

/// `(N, H)` pairs for models of `N` parameters, each holding `⌊N / r⌋` skills.
pub fn entropy_vs_parameters(w: &SkillWorld, param_counts: &[u64]) -> Result<Vec<(u64, f64)>> {
    w.validate()?;
    param_counts
        .par_iter()
        .map(|&params| {
            if params < w.neurons_per_skill {
                return Err(Error::domain(format!(
                    "N = {params} is below r = {} parameters per skill",
                    w.neurons_per_skill
                )));
            }
            let n = (params / w.neurons_per_skill).min(w.m);
            Ok((params, conditional_entropy_after(w, n)?))
        })
        .collect()
}

/// Flops needed to comprehend the `n` easiest skills:
/// `Σ_{i≤n} (B − C) / (p_i Δ)`.
pub fn flops_to_comprehend(w: &SkillWorld, n: u64) -> Result<f64> {
    w.validate()?;
    if n == 0 || n > w.m {
        return Err(Error::domain(format!("n must lie in [1, M = {}], got {n}", w.m)));
    }
    let per_inverse_prob = power_sum(-(w.alpha + 1.0), 1, n);
    Ok((w.b - w.c) / w.delta * w.normalizer() * per_inverse_prob)
}

/// Largest `n` whose comprehension cost fits in `budget` flops (0 if none).
pub fn skills_within_budget(w: &SkillWorld, budget: f64) -> Result<u64> {
    w.validate()?;
    if !(budget >= 0.0) {
        return Err(Error::domain(format!("flop budget must be >= 0, got {budget}")));
    }
    let (mut lo, mut hi) = (0u64, w.m);
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if flops_to_comprehend(w, mid)? <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

/// `(S, H)` pairs: entropy after spending `S` flops on sequential learning.
pub fn entropy_vs_flops(w: &SkillWorld, budgets: &[f64]) -> Result<Vec<(f64, f64)>> {
    budgets
        .par_iter()
        .map(|&s| {
            let n = skills_within_budget(w, s)?;
            Ok((s, conditional_entropy_after(w, n)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetPoint {
    pub size: f64,
    /// Tail exponent solving `Z_α = D^γ`.
    pub alpha: f64,
    pub entropy: f64,
}

/// Solves `Z_α = target` for `α ∈ [1e-6, 10]` by bisection (`Z_α` decreases in `α`).
pub fn solve_alpha_for_normalizer(target: f64, m: u64) -> Result<f64> {
    let (z_hi, z_lo) = (normalizer(ALPHA_LO, m), normalizer(ALPHA_HI, m));
    if !(target <= z_hi && target >= z_lo) {
        return Err(Error::Solver(format!(
            "no alpha in [{ALPHA_LO}, {ALPHA_HI}] gives Z_alpha = {target} with M = {m} \
             (reachable range [{z_lo}, {z_hi}])"
        )));
    }
    let (mut lo, mut hi) = (ALPHA_LO, ALPHA_HI);
    while hi - lo > ALPHA_TOL {
        let mid = 0.5 * (lo + hi);
        if normalizer(mid, m) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Marginal entropy `H(X) = C + A·D·Σ p_i²` at dataset size `D`, with the skill
/// exponent set by `Z_α = D^{γ_D}`.
pub fn entropy_vs_dataset(w: &SkillWorld, d_sizes: &[f64]) -> Result<Vec<DatasetPoint>> {
    w.validate()?;
    d_sizes
        .par_iter()
        .map(|&size| {
            if !(size > 0.0 && size.is_finite()) {
                return Err(Error::domain(format!("dataset size must be positive, got {size}")));
            }
            let alpha = solve_alpha_for_normalizer(size.powf(w.gamma_d), w.m)?;
            let z = normalizer(alpha, w.m);
            let sum_sq = power_sum(2.0 * (alpha + 1.0), 1, w.m) / (z * z);
            Ok(DatasetPoint {
                size,
                alpha,
                entropy: w.c + w.a_const * size * sum_sq,
            })
        })
        .collect()
}

/// `Σ_k p_k²` for the world's own `α`.
pub fn skill_collision_probability(w: &SkillWorld) -> Result<f64> {
    w.validate()?;
    let z = w.normalizer();
    Ok(power_sum(2.0 * (w.alpha + 1.0), 1, w.m) / (z * z))
}

/// A finite world: conditionals `p(x|y)` (rows) and skill marginal `p(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteWorld {
    px_given_y: DMatrix<f64>,
    py: DVector<f64>,
}

impl DiscreteWorld {
    pub fn new(px_given_y: DMatrix<f64>, py: DVector<f64>) -> Result<Self> {
        if px_given_y.nrows() != py.len() || px_given_y.nrows() == 0 || px_given_y.ncols() == 0 {
            return Err(Error::shape(format!(
                "conditionals are {}x{} but p(y) has {} entries",
                px_given_y.nrows(),
                px_given_y.ncols(),
                py.len()
            )));
        }
        if px_given_y.iter().chain(py.iter()).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain("probabilities must be finite and non-negative"));
        }
        for (i, row) in px_given_y.row_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::domain(format!("row {i} of p(x|y) sums to {s}")));
            }
        }
        let s = py.sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::domain(format!("p(y) sums to {s}")));
        }
        Ok(DiscreteWorld { px_given_y, py })
    }

    pub fn px_given_y(&self) -> &DMatrix<f64> {
        &self.px_given_y
    }

    pub fn py(&self) -> &DVector<f64> {
        &self.py
    }

    pub fn num_skills(&self) -> usize {
        self.py.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.px_given_y.ncols()
    }

    /// `p(x) = Σ_y p(y) p(x|y)`.
    pub fn marginal(&self) -> DVector<f64> {
        self.px_given_y.tr_mul(&self.py)
    }

    /// `H(X | Y = y)` for every skill.
    pub fn row_entropies(&self) -> Vec<f64> {
        self.px_given_y.row_iter().map(|r| shannon(r.iter().copied())).collect()
    }

    /// Relabels skills through an injective map `f` into `target_size` labels.
    /// Labels outside the image get zero mass and a uniform conditional.
    pub fn relabel(&self, f: &[usize], target_size: usize) -> Result<Self> {
        if f.len() != self.num_skills() {
            return Err(Error::shape(format!(
                "map has {} entries for {} skills",
                f.len(),
                self.num_skills()
            )));
        }
        let mut seen = vec![false; target_size];
        for &t in f {
            if t >= target_size || std::mem::replace(&mut seen[t], true) {
                return Err(Error::precondition(format!(
                    "prompting map must be injective into {target_size} labels"
                )));
            }
        }
        let nx = self.num_outcomes();
        let mut px = DMatrix::from_element(target_size, nx, 1.0 / nx as f64);
        let mut py = DVector::zeros(target_size);
        for (y, &t) in f.iter().enumerate() {
            px.row_mut(t).copy_from(&self.px_given_y.row(y));
            py[t] = self.py[y];
        }
        DiscreteWorld::new(px, py)
    }
}

/// `−Σ p log p` with `0 log 0 = 0`.
fn shannon(p: impl Iterator<Item = f64>) -> f64 {
    -p.filter(|&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// `H(X|Y) = −Σ_y p(y) Σ_x p(x|y) log p(x|y)`.
///
/// Terms are added in sorted order, so relabelling skills cannot change the
/// rounding.
pub fn discrete_conditional_entropy(dw: &DiscreteWorld) -> f64 {
    let mut terms: Vec<f64> = dw.py.iter().zip(dw.row_entropies()).map(|(p, h)| p * h).collect();
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

pub fn marginal_entropy(dw: &DiscreteWorld) -> f64 {
    shannon(dw.marginal().iter().copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlDecomposition {
    /// `H(X) − H(X|Y)`.
    pub lhs: f64,
    /// `Σ_y p(y) KL(p(·|y) ‖ p(·))`.
    pub rhs: f64,
}

pub fn verify_kl_decomposition(dw: &DiscreteWorld) -> Result<KlDecomposition> {
    let px = dw.marginal();
    let lhs = marginal_entropy(dw) - discrete_conditional_entropy(dw);
    let mut rhs = 0.0;
    for (y, row) in dw.px_given_y.row_iter().enumerate() {
        let kl: f64 = row
            .iter()
            .zip(px.iter())
            .filter(|(&q, _)| q > 0.0)
            .map(|(&q, &p)| q * (q / p).ln())
            .sum();
        rhs += dw.py[y] * kl;
    }
    if lhs.is_nan() || rhs.is_nan() {
        return Err(Error::Internal("NaN in KL decomposition".into()));
    }
    Ok(KlDecomposition { lhs, rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextLabel {
    Irrelevant,
    Good,
    Bad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextEffect {
    pub h_before: f64,
    pub h_after: f64,
}

/// Conditional entropy before and after prompting with a context.
///
/// `contexted` holds `p(x | context, y)`. Labels are checked against the rows:
/// irrelevant rows must be unchanged, good rows strictly sharper, bad rows
/// strictly flatter. Good and bad skills must carry positive mass.
pub fn context_effect(
    dw: &DiscreteWorld,
    contexted: &DiscreteWorld,
    labels: &[ContextLabel],
) -> Result<ContextEffect> {
    if labels.len() != dw.num_skills()
        || contexted.px_given_y.shape() != dw.px_given_y.shape()
        || contexted.py != dw.py
    {
        return Err(Error::precondition(format!(
            "labels ({}) and worlds ({:?} vs {:?}) must describe the same skills with the same p(y)",
            labels.len(),
            dw.px_given_y.shape(),
            contexted.px_given_y.shape()
        )));
    }
    let before = dw.row_entropies();
    let after = contexted.row_entropies();
    for (y, label) in labels.iter().enumerate() {
        let ok = match label {
            ContextLabel::Irrelevant => dw.px_given_y.row(y) == contexted.px_given_y.row(y),
            ContextLabel::Good => after[y] < before[y] && dw.py[y] > 0.0,
            ContextLabel::Bad => after[y] > before[y] && dw.py[y] > 0.0,
        };
        if !ok {
            return Err(Error::precondition(format!(
                "skill {y} labelled {label:?} but H(X|y) goes {} -> {} with p(y) = {}",
                before[y], after[y], dw.py[y]
            )));
        }
    }
    Ok(ContextEffect {
        h_before: discrete_conditional_entropy(dw),
        h_after: discrete_conditional_entropy(contexted),
    })
}

/// Log-spaced integer grid on `[from, to]`, deduplicated and ascending.
pub fn log_grid_u64(from: u64, to: u64, points: usize) -> Vec<u64> {
    let mut out: Vec<u64> = log_grid(from as f64, to as f64, points)
        .into_iter()
        .map(|v| v.round() as u64)
        .collect();
    out.dedup();
    out
}

/// `points` log-spaced reals from `from` to `to` inclusive.
pub fn log_grid(from: f64, to: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![from];
    }
    let (a, b) = (from.ln(), to.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}
