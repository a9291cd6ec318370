use embed_infolab::covdist::{self, SpdMatrix};
use embed_infolab::entropy::{self, EmbeddingMatrix, EntropyParams};
use embed_infolab::infogain::{self, KernelState};
use embed_infolab::scaling_sim::{self, SkillWorld};
use embed_infolab::synth;
use embed_infolab::tensor_io::{DType, TensorFile};
use embed_infolab::token_select;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn shape_and_data() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    prop::collection::vec(1usize..5, 1..=4).prop_flat_map(|shape| {
        let n: usize = shape.iter().product();
        (Just(shape), prop::collection::vec(prop::num::f64::ANY, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_bytes_round_trip((shape, data) in shape_and_data()) {
        let t = TensorFile::new(DType::F64, shape, data).unwrap();
        let bytes = t.to_bytes().unwrap();
        let back = TensorFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.shape.clone(), t.shape.clone());
        let same = back.data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn f32_tensor_round_trip((shape, data) in shape_and_data()) {
        let data: Vec<f64> = data.into_iter().map(|v| v as f32 as f64).collect();
        let t = TensorFile::new(DType::F32, shape, data).unwrap();
        let bytes = t.to_bytes().unwrap();
        let back = TensorFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn entropy_is_rotation_invariant(seed in any::<u64>(), n in 1usize..12, d in 1usize..10) {
        let mut rng = synth::rng(seed);
        let z = synth::gaussian_matrix(&mut rng, n, d);
        let q = synth::orthogonal(&mut rng, d);
        let p = EntropyParams::default();
        let a = entropy::logdet_entropy(&EmbeddingMatrix::new(z.clone()).unwrap(), p);
        let b = entropy::logdet_entropy(&EmbeddingMatrix::new(z * q).unwrap(), p);
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
    }

    #[test]
    fn normalized_entropy_is_bounded(seed in any::<u64>(), n in 1usize..20, d in 1usize..12, eps in 0.01f64..2.0) {
        let mut rng = synth::rng(seed);
        let z = EmbeddingMatrix::new(synth::unit_rows(&mut rng, n, d)).unwrap();
        let h = entropy::normalized_entropy(&z, EntropyParams::new(eps).unwrap()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&h));
    }

    #[test]
    fn power_law_fit_is_exact(exponent in -3.0f64..3.0, coef in 0.01f64..100.0) {
        let xs = scaling_sim::log_grid(1.0, 1e4, 9);
        let ys: Vec<f64> = xs.iter().map(|x| coef * x.powf(exponent)).collect();
        let fit = entropy::fit_power_law(&xs, &ys).unwrap();
        prop_assert!((fit.exponent - exponent).abs() < 1e-10);
        prop_assert!((fit.coefficient - coef).abs() < 1e-10 * coef);
    }

    #[test]
    fn skill_world_monotonicity(alpha in 0.05f64..3.0, m in 2u64..3000) {
        let w = SkillWorld { m, alpha, ..SkillWorld::default() };
        let p = scaling_sim::skill_distribution(&w).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.windows(2).all(|x| x[1] < x[0]));
        prop_assert_eq!(scaling_sim::conditional_entropy_after(&w, 0).unwrap(), w.b);
        prop_assert_eq!(scaling_sim::conditional_entropy_after(&w, m).unwrap(), w.c);
        let hs: Vec<f64> = (0..=m.min(200)).map(|n| scaling_sim::conditional_entropy_after(&w, n).unwrap()).collect();
        prop_assert!(hs.windows(2).all(|x| x[1] <= x[0]));
        let fl: Vec<f64> = (1..=m.min(200)).map(|n| scaling_sim::flops_to_comprehend(&w, n).unwrap()).collect();
        prop_assert!(fl.windows(2).all(|x| x[1] > x[0]));
        // superlinear: per-skill cost grows
        prop_assert!(fl.windows(2).enumerate().all(|(i, x)| x[1] / (i + 2) as f64 > x[0] / (i + 1) as f64));
    }

    #[test]
    fn kl_decomposition_holds(seed in any::<u64>(), ny in 1usize..10, nx in 1usize..10) {
        let mut rng = synth::rng(seed);
        let w = synth::discrete_world(&mut rng, ny, nx);
        let k = scaling_sim::verify_kl_decomposition(&w).unwrap();
        prop_assert!((k.lhs - k.rhs).abs() <= 1e-12);
    }

    #[test]
    fn relabelling_keeps_conditional_entropy(seed in any::<u64>(), ny in 1usize..8, nx in 1usize..8, extra in 0usize..4) {
        let mut rng = synth::rng(seed);
        let w = synth::discrete_world(&mut rng, ny, nx);
        let mut targets: Vec<usize> = (0..ny + extra).collect();
        targets.shuffle(&mut rng);
        targets.truncate(ny);
        let r = w.relabel(&targets, ny + extra).unwrap();
        let (a, b) = (scaling_sim::discrete_conditional_entropy(&w), scaling_sim::discrete_conditional_entropy(&r));
        prop_assert!((a - b).abs() <= 1e-15, "{} vs {}", a, b);
    }

    #[test]
    fn gain_chain_rule_and_variance(seed in any::<u64>(), t in 1usize..20, d in 1usize..16) {
        let mut rng = synth::rng(seed);
        let z = synth::unit_rows(&mut rng, t, d);
        let query = synth::unit_rows(&mut rng, 1, d).row(0).transpose();
        let mut ks = KernelState::new(d, infogain::DEFAULT_SIGMA2).unwrap();
        let mut total = 0.0;
        let mut last_var = infogain::posterior_variance(&ks, &query).unwrap();
        prop_assert!((last_var - 1.0).abs() < 1e-12);
        for row in z.row_iter() {
            let zt = row.transpose();
            total += infogain::info_gain_increment(&ks, &zt).unwrap().increment;
            ks.push(&zt).unwrap();
            let var = infogain::posterior_variance(&ks, &query).unwrap();
            prop_assert!((0.0..=1.0).contains(&var));
            prop_assert!(var <= last_var + 1e-9);
            last_var = var;
        }
        prop_assert!((infogain::information_gain(&ks) - total).abs() <= 1e-8);
        prop_assert!(infogain::information_gain(&ks) <= infogain::rank_gain_bound(&ks) * (1.0 + 1e-12));
    }

    #[test]
    fn lasso_path_shrinks(seed in any::<u64>(), d in 2usize..25, t in 1usize..10) {
        let mut rng = synth::rng(seed);
        let reps = synth::gaussian_matrix(&mut rng, d, t);
        let target = synth::gaussian_vector(&mut rng, d);
        let mut last = f64::INFINITY;
        for lambda in scaling_sim::log_grid(1e-4, 10.0, 8) {
            let fit = token_select::lasso_fit(&reps, &target, lambda).unwrap();
            prop_assert!(fit.kkt_residual <= token_select::KKT_TOL);
            prop_assert!(fit.objective_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
            let l1 = fit.beta.abs().sum();
            // ties allowed up to solver tolerance
            prop_assert!(l1 <= last + 1e-6);
            last = l1;
        }
    }

    #[test]
    fn unrolling_is_exact(seed in any::<u64>(), n in 1usize..12, d in 1usize..8, mass in 0.0f64..0.5) {
        let mut rng = synth::rng(seed);
        let att = synth::causal_attention(&mut rng, n, mass);
        let values = synth::gaussian_matrix(&mut rng, n, d);
        let reps = &att * &values;
        let u = token_select::attention_unroll_residual(&att, &values, &reps).unwrap();
        let z = reps.row(n - 1).transpose();
        prop_assert!((&u.approx + &u.correction - &z).norm() <= 1e-10);
        prop_assert!((u.residual_norm - (&z - &u.approx).norm()).abs() <= 1e-12);
    }

    #[test]
    fn distance_axioms(seed in any::<u64>(), d in 1usize..7) {
        let mut rng = synth::rng(seed);
        let mut draw = || SpdMatrix::new(synth::spd_with_spectrum(&mut rng, d, 0.05, 5.0)).unwrap();
        let (a, b, c) = (draw(), draw(), draw());
        for f in [covdist::dist_logdet, covdist::dist_riemann, covdist::dist_loge, covdist::dist_frobenius] {
            prop_assert!(f(&a, &a).unwrap().abs() <= 1e-10);
            prop_assert!((f(&a, &b).unwrap() - f(&b, &a).unwrap()).abs() <= 1e-10);
            prop_assert!(f(&a, &b).unwrap() >= 0.0);
        }
        prop_assert!(covdist::dist_js(&a, &a, 100.0).unwrap().abs() <= 1e-10);
        prop_assert!(covdist::js_radicand(&a, &b, 100.0).unwrap() >= -1e-12);
        for f in [covdist::dist_riemann, covdist::dist_loge] {
            prop_assert!(f(&a, &c).unwrap() <= f(&a, &b).unwrap() + f(&b, &c).unwrap() + 1e-9);
        }
    }

    #[test]
    fn riemann_affine_invariance(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = synth::rng(seed);
        let a = SpdMatrix::new(synth::spd_with_spectrum(&mut rng, d, 0.1, 2.0)).unwrap();
        let b = SpdMatrix::new(synth::spd_with_spectrum(&mut rng, d, 0.1, 2.0)).unwrap();
        let m = synth::gaussian_matrix(&mut rng, d, d) * 0.3 + DMatrix::identity(d, d);
        let congr = |s: &SpdMatrix| {
            let t = m.transpose() * s.values() * &m;
            SpdMatrix::new((&t + t.transpose()) * 0.5).unwrap()
        };
        let before = covdist::dist_riemann(&a, &b).unwrap();
        let after = covdist::dist_riemann(&congr(&a), &congr(&b)).unwrap();
        prop_assert!((before - after).abs() <= 1e-8);
    }

    #[test]
    fn full_pca_is_an_isometry(seed in any::<u64>(), n in 2usize..12, d in 1usize..6) {
        let mut rng = synth::rng(seed);
        let pts = synth::gaussian_matrix(&mut rng, n, d);
        let proj = covdist::pca_project(&pts, d).unwrap();
        for i in 0..n {
            for j in 0..n {
                let a = (pts.row(i) - pts.row(j)).norm();
                let b = (proj.row(i) - proj.row(j)).norm();
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}
