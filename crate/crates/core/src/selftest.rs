//! A quick invariant suite runnable from the command line.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::covdist::{self, SpdMatrix};
use crate::entropy::{self, EmbeddingMatrix, EntropyParams};
use crate::error::Result;
use crate::infogain::{self, KernelState};
use crate::scaling_sim::{self, ContextLabel, DiscreteWorld, SkillWorld};
use crate::synth;
use crate::tensor_io::{DType, TensorFile};
use crate::token_select;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs every check with inputs drawn from `seed`.
pub fn run(seed: u64) -> Vec<Check> {
    let mut rng = synth::rng(seed);
    vec![
        check("tensor_round_trip", tensor_round_trip(&mut rng)),
        check("entropy_closed_form", entropy_closed_form(&mut rng)),
        check("entropy_rotation_invariance", entropy_rotation(&mut rng)),
        check("skill_power_law", skill_power_law()),
        check("kl_decomposition", kl_decomposition(&mut rng)),
        check("context_prompting", context_prompting(&mut rng)),
        check("info_gain_chain_rule", chain_rule(&mut rng)),
        check("ridge_variance_identity", ridge_identity(&mut rng)),
        check("lasso_kkt", lasso_kkt(&mut rng)),
        check("attention_unrolling", unrolling(&mut rng)),
        check("distance_axioms", distance_axioms(&mut rng)),
        check("js_taylor", js_taylor(&mut rng)),
    ]
}

fn tensor_round_trip(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let m = synth::gaussian_matrix(rng, 5, 7);
    let t = TensorFile::new(DType::F64, vec![5, 7], TensorFile::from_matrix(&m).data)?;
    let back = TensorFile::from_bytes(&t.to_bytes()?)?;
    Ok((back == t, "5x7 f64 tensor".into()))
}

fn entropy_closed_form(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let p = EntropyParams::default();
    let mut worst = 0.0f64;
    for r in [1, 8, 32, 64] {
        let dirs = synth::orthonormal_columns(rng, 64, r);
        let z = entropy::subspace_embedding(&dirs, 128 / r)?;
        let gap = (entropy::normalized_entropy(&z, p)? - entropy::closed_form_subspace(r, 64, p)?).abs();
        worst = worst.max(gap);
    }
    Ok((worst <= 1e-9, format!("max gap {worst:e}")))
}

fn entropy_rotation(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let z = synth::gaussian_matrix(rng, 9, 6);
    let q = synth::orthogonal(rng, 6);
    let p = EntropyParams::default();
    let a = entropy::logdet_entropy(&EmbeddingMatrix::new(z.clone())?, p);
    let b = entropy::logdet_entropy(&EmbeddingMatrix::new(z * q)?, p);
    let rel = (a - b).abs() / a;
    Ok((rel <= 1e-8, format!("relative gap {rel:e}")))
}

fn skill_power_law() -> Result<(bool, String)> {
    let w = SkillWorld::default();
    let fit = scaling_sim::verify_skill_power_law(&w, &scaling_sim::log_grid_u64(3, 300, 25))?;
    let rel = (fit.exponent + w.alpha).abs() / w.alpha;
    Ok((rel <= 0.05, format!("exponent {:.4} vs {}", fit.exponent, -w.alpha)))
}

fn kl_decomposition(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (ny, nx) = (rng.random_range(1..6), rng.random_range(2..8));
        let k = scaling_sim::verify_kl_decomposition(&synth::discrete_world(rng, ny, nx))?;
        worst = worst.max((k.lhs - k.rhs).abs());
    }
    Ok((worst <= 1e-12, format!("max gap {worst:e}")))
}

fn context_prompting(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let mut all = true;
    for _ in 0..20 {
        let w = synth::discrete_world(rng, 4, 5);
        let mut px = w.px_given_y().clone();
        let mut labels = vec![ContextLabel::Irrelevant; 4];
        let good = rng.random_range(0..4);
        px.row_mut(good).copy_from(&DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]).transpose());
        labels[good] = ContextLabel::Good;
        let ctx = DiscreteWorld::new(px, w.py().clone())?;
        let eff = scaling_sim::context_effect(&w, &ctx, &labels)?;
        all &= eff.h_after < eff.h_before;
    }
    Ok((all, "20 worlds with one sharpened skill".into()))
}

fn chain_rule(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (t, d) = (rng.random_range(1..16), rng.random_range(1..12));
        let z = synth::unit_rows(rng, t, d);
        let mut ks = KernelState::new(d, infogain::DEFAULT_SIGMA2)?;
        for row in z.row_iter() {
            let zt = row.transpose();
            let before = infogain::information_gain(&ks);
            let inc = infogain::info_gain_increment(&ks, &zt)?.increment;
            ks.push(&zt)?;
            worst = worst.max((infogain::information_gain(&ks) - before - inc).abs());
        }
    }
    Ok((worst <= 1e-8, format!("max gap {worst:e}")))
}

fn ridge_identity(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (t, d) = (rng.random_range(0..12), rng.random_range(1..10));
        let z = synth::unit_rows(rng, t + 1, d).transpose();
        let reps = z.columns(0, t).into_owned();
        let target = z.column(t).into_owned();
        let chk = infogain::verify_ridge_variance_identity(&reps, &target, infogain::DEFAULT_SIGMA2)?;
        worst = worst.max((chk.lhs - chk.rhs).abs());
    }
    Ok((worst <= 1e-8, format!("max gap {worst:e}")))
}

fn lasso_kkt(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (d, t) = (rng.random_range(2..20), rng.random_range(1..12));
        let reps = synth::gaussian_matrix(rng, d, t);
        let target = synth::gaussian_vector(rng, d);
        let lambda = 10f64.powf(rng.random_range(-4.0..0.0));
        worst = worst.max(token_select::lasso_fit(&reps, &target, lambda)?.kkt_residual);
    }
    Ok((worst <= token_select::KKT_TOL, format!("max KKT residual {worst:e}")))
}

fn unrolling(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let att = synth::causal_attention(rng, 8, 0.1);
    let values = synth::gaussian_matrix(rng, 8, 5);
    let reps = &att * &values;
    let u = token_select::attention_unroll_residual(&att, &values, &reps)?;
    let gap = (&u.approx + &u.correction - reps.row(7).transpose()).norm();
    Ok((gap <= 1e-10, format!("reconstruction gap {gap:e}")))
}

fn distance_axioms(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let a = SpdMatrix::new(synth::spd_with_spectrum(rng, 4, 0.1, 1.0))?;
    let b = SpdMatrix::new(synth::spd_with_spectrum(rng, 4, 0.1, 1.0))?;
    let dists: [fn(&SpdMatrix, &SpdMatrix) -> Result<f64>; 5] = [
        covdist::dist_logdet,
        |x, y| covdist::dist_js(x, y, covdist::DEFAULT_GAMMA),
        covdist::dist_riemann,
        covdist::dist_loge,
        covdist::dist_frobenius,
    ];
    let mut worst = 0.0f64;
    for f in dists {
        worst = worst.max(f(&a, &a)?).max((f(&a, &b)? - f(&b, &a)?).abs());
    }
    Ok((worst <= 1e-10, format!("max identity/symmetry gap {worst:e}")))
}

fn js_taylor(rng: &mut synth::SynthRng) -> Result<(bool, String)> {
    let a = SpdMatrix::new(synth::spd_with_spectrum(rng, 4, 0.1, 1.0))?;
    let b = SpdMatrix::new(synth::spd_with_spectrum(rng, 4, 0.1, 1.0))?;
    let chk = covdist::verify_js_taylor(&a, &b, &[1e-2, 1e-3, 1e-4])?;
    let gaps: Vec<f64> = chk.points.iter().map(|(_, r)| (r - 1.0).abs()).collect();
    let ok = gaps[0] <= 1e-1 && gaps[1] <= 1e-2 && gaps[2] <= 1e-3 && gaps[0] > gaps[1] && gaps[1] > gaps[2];
    Ok((ok, format!("|ratio-1| = {gaps:?}")))
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run(7) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
