use std::sync::Arc;

use proptest::prelude::*;

use fusioncs::certificate::{golfing_build, gram_conditions, GolfingSchedule};
use fusioncs::experiments::{fmt_f64, power_law_signal, sparse_signal, wilson_interval};
use fusioncs::rng::seeded;
use fusioncs::solver::{block_soft_threshold, solve_l1_equality};
use fusioncs::{BlockForm, BlockSupport, BlockVector, FusionFrame, MatrixKind, MeasurementEnsemble, SolverConfig};

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..10, 2usize..7).prop_flat_map(|(n, d)| (Just(n), Just(d), 1..=d))
}

fn flat(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn restricted_norm_chain((n, d, k) in dims(), seed in 0u64..1000, mask in any::<u16>()) {
        let f = FusionFrame::random(n, d, k, seed).unwrap();
        let idx: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        prop_assume!(!idx.is_empty());
        let s = idx.len() as f64;
        let r = f.incoherence().restricted_norms(&BlockSupport::new(idx).unwrap()).unwrap();
        let lam = f.incoherence().lambda_max();
        prop_assert!(r.two_inf_s <= r.inf_s + 1e-12);
        prop_assert!(r.inf_s <= lam * s + 1e-12);
        prop_assert!(r.inf_ss <= r.inf_s + 1e-12);
        prop_assert!(r.spec_ss <= r.inf_ss + 1e-12);
        prop_assert!(lam <= 1.0 + 1e-12);
    }

    #[test]
    fn operators_agree_on_h((n, d, k) in dims(), m in 1usize..6, seed in 0u64..1000, normalized: bool) {
        let f = Arc::new(FusionFrame::random(n, d, k, seed).unwrap());
        let e = MeasurementEnsemble::draw(MatrixKind::Gaussian, m, f.clone(), seed + 1, normalized).unwrap();
        let mut rng = seeded(seed);
        let (x, _) = sparse_signal(&f, n / 2, &mut rng);
        let yp = e.apply_ap(&x).unwrap();
        prop_assert!(yp.distance(&e.apply_ai(&x).unwrap()).unwrap() <= 1e-10);
        let h = e.apply_ai(&x).unwrap();
        let lhs = yp.dot(&h).unwrap();
        let rhs = x.dot(&e.adjoint_ap(&h).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn soft_threshold_shrinks_block_norms(v in flat(12), tau in 0.0f64..4.0) {
        let mut out = v.clone();
        block_soft_threshold(&mut out, 3, tau);
        for (a, b) in v.chunks(3).zip(out.chunks(3)) {
            let na = a.iter().map(|t| t * t).sum::<f64>().sqrt();
            let nb = b.iter().map(|t| t * t).sum::<f64>().sqrt();
            prop_assert!((nb - (na - tau).max(0.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn wilson_interval_brackets_rate(trials in 1usize..500, frac in 0.0f64..=1.0) {
        let successes = ((trials as f64) * frac).floor() as usize;
        let (lo, hi) = wilson_interval(successes, trials);
        let p = successes as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn csv_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn power_law_signals_are_unit_norm(q in 0.05f64..3.0, seed in 0u64..1000) {
        let f = FusionFrame::random(20, 4, 2, seed).unwrap();
        let x = power_law_signal(&f, q, &mut seeded(seed));
        prop_assert!((x.norm_l2() - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn golfing_identities_and_inverse_bound(seed in 0u64..1000, s in 1usize..4, m in 8usize..60) {
        let f = Arc::new(FusionFrame::random(16, 5, 2, seed).unwrap());
        let (x, sup) = sparse_signal(&f, s, &mut seeded(seed + 7));
        let e = MeasurementEnsemble::draw(MatrixKind::Bernoulli, m, f, seed + 9, true).unwrap();
        let cert = golfing_build(&e, &x, &GolfingSchedule::default_for(m, 16, s).unwrap()).unwrap();
        prop_assert!(cert.identity_residual <= 1e-9);
        prop_assert!(cert.recursion_residual <= 1e-9);
        let g = gram_conditions(&e, &sup).unwrap();
        if g.deviation < 1.0 {
            prop_assert!(g.inv_norm <= 1.0 / (1.0 - g.deviation) + 1e-9);
        }
    }

    #[test]
    fn solver_is_scale_equivariant(seed in 0u64..1000, alpha in 0.01f64..100.0) {
        let f = Arc::new(FusionFrame::random(10, 4, 2, seed).unwrap());
        let (x, _) = sparse_signal(&f, 2, &mut seeded(seed));
        let e = MeasurementEnsemble::draw(MatrixKind::Gaussian, 3, f, seed + 1, false).unwrap();
        let y = e.apply_ap(&x).unwrap();
        let cfg = SolverConfig::default();
        let a = solve_l1_equality(&e, &y, &cfg).unwrap().x_hat;
        let b = solve_l1_equality(&e, &y.scale(alpha), &cfg).unwrap().x_hat;
        let scaled: BlockVector = a.scale(alpha);
        prop_assert!(scaled.distance(&b).unwrap() <= 1e-9 * alpha.max(1.0));
        prop_assert_eq!(b.form(), BlockForm::Ambient);
    }
}
