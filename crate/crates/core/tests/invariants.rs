use excursion_core::asymptotics::{self, JointTailWindow, WindowKind};
use excursion_core::class_analysis;
use excursion_core::estimators::{self, ISConfig, LatticeCaps, Method, Probes, Sampler, SigmaProbe};
use excursion_core::models::PowerTail;
use excursion_core::{Execution, IncrementModel, SimConfig};
use proptest::prelude::*;

#[test]
fn naive_lattice_agrees_with_dp_across_seeds() {
    let xs = [0.0, 1.0, 3.0, 4.0, 10.0];
    let probes = Probes {
        area: xs.to_vec(),
        ..Probes::default()
    };
    let mut hits = 0;
    let mut total = 0;
    for p in [0.2, 0.3, 0.4] {
        let model = IncrementModel::lattice(p).unwrap();
        let dp = estimators::dp_exact_lattice(p, 10.0, LatticeCaps::auto(10.0)).unwrap();
        for seed in 0..12 {
            let s = estimators::run_probes(&model, &SimConfig::new(seed), 1_000_000, &probes, &Sampler::Naive).unwrap();
            for (i, &x) in xs.iter().enumerate() {
                let est = s.estimate(&s.area[i], Method::Naive);
                total += 1;
                if est.within_stderr(dp.area_tail(x).unwrap(), 4.0) {
                    hits += 1;
                }
            }
        }
    }
    assert!(hits as f64 >= 0.95 * total as f64, "{hits}/{total}");
}

#[test]
fn importance_and_naive_agree_for_pareto() {
    let model = IncrementModel::pareto(3.0, 1.0).unwrap();
    for x in [20.0, 60.0] {
        let naive = estimators::naive_mc_area_tail(&model, x, 2_000_000, &SimConfig::new(1)).unwrap();
        let is = estimators::is_mixture_area_tail(
            &model,
            x,
            500_000,
            &SimConfig::new(2),
            &ISConfig::for_area_level(&model, x),
        )
        .unwrap();
        let tol = 4.0 * naive.stderr.hypot(is.stderr);
        assert!((naive.p_hat - is.p_hat).abs() < tol, "x={x}: {naive:?} {is:?}");
        // Per-sample variance is smaller under the mixture.
        assert!(is.stderr * (is.n as f64).sqrt() < naive.stderr * (naive.n as f64).sqrt());
    }
}

#[test]
fn coupled_estimates_are_monotone_and_nested() {
    let model = IncrementModel::weibull(0.3, 1.0).unwrap();
    let xs = vec![1.0, 5.0, 20.0, 80.0, 300.0];
    let probes = Probes {
        area: xs.clone(),
        joint: xs.iter().map(|&x| (x, 3.0)).collect(),
        tau: vec![1.0, 2.0, 5.0, 20.0],
        max: vec![0.5, 2.0, 10.0],
        ..Probes::default()
    };
    for sampler in [Sampler::Naive, Sampler::Mixture(ISConfig::for_area_level(&model, 80.0))] {
        let s = estimators::run_probes(&model, &SimConfig::new(3), 200_000, &probes, &sampler).unwrap();
        for v in [&s.area, &s.tau, &s.max] {
            assert!(v.windows(2).all(|w| w[1].sum <= w[0].sum));
        }
        for (joint, area) in s.joint.iter().zip(&s.area) {
            assert!(joint.sum <= area.sum);
        }
    }
}

#[test]
fn sigma_law_normalises_with_remainder() {
    let model = IncrementModel::pareto(3.0, 1.0).unwrap();
    let law = estimators::sigma_y_conditional_law(&model, 4.0, 5, 300_000, &SimConfig::new(4)).unwrap();
    let mass: f64 = law.empirical.iter().sum();
    assert!(mass <= 1.0 + 1e-12);
    assert!((1.0 - mass - law.empirical_beyond).abs() < 1e-12);
    let reference: f64 = law.reference.iter().sum();
    assert!((1.0 - reference - law.reference_beyond).abs() < 1e-12);
}

#[test]
fn pass_is_identical_across_execution_modes() {
    let model = IncrementModel::lognormal(1.0, 1.0).unwrap();
    let probes = Probes {
        area: vec![10.0, 100.0],
        tau: vec![3.0],
        max: vec![4.0],
        sigma: Some(SigmaProbe { level: 4.0, k_max: 6 }),
        tau_survival_len: 6,
        ..Probes::default()
    };
    let run = |e| {
        let cfg = SimConfig::new(9).with_execution(e);
        estimators::run_probes(&model, &cfg, 20_000, &probes, &Sampler::Naive).unwrap()
    };
    assert_eq!(run(Execution::Parallel), run(Execution::Sequential));
}

#[test]
fn wald_identity_holds_in_distribution() {
    for model in [
        IncrementModel::pareto(3.0, 1.0).unwrap(),
        IncrementModel::weibull(0.3, 0.5).unwrap(),
    ] {
        let e = estimators::estimate_e_tau(&model, 400_000, &SimConfig::new(5)).unwrap();
        assert!(e.wald_gap.abs() < 4.0 * e.wald_gap_stderr, "{e:?}");
        assert!((e.mean - e.wald_mean).abs() < 4.0 * e.stderr.hypot(e.wald_stderr));
    }
}

#[test]
fn lattice_e_tau_matches_dp() {
    let model = IncrementModel::lattice(0.3).unwrap();
    let e = estimators::estimate_e_tau(&model, 1_000_000, &SimConfig::new(6)).unwrap();
    assert!((e.mean - 1.75).abs() < 4.0 * e.stderr);
}

#[test]
fn joint_window_flags_levels() {
    let model = IncrementModel::pareto(3.0, 1.0).unwrap();
    let w = JointTailWindow {
        kind: WindowKind::RegvarA,
        epsilon: 0.3,
        r: 1.0,
    };
    let inside = estimators::joint_tail(&model, 50.0, 5.0, 100_000, &SimConfig::new(1), &w).unwrap();
    let outside = estimators::joint_tail(&model, 50.0, 20.0, 100_000, &SimConfig::new(1), &w).unwrap();
    assert!(inside.in_window && !outside.in_window);
    assert!(outside.estimate.p_hat <= inside.estimate.p_hat);
}

#[test]
fn s_star_ratio_converges_for_both_tail_types() {
    let grid = [1e2, 1e3, 1e4];
    let weibull = IncrementModel::weibull(0.3, 1.0).unwrap();
    let reports = [
        class_analysis::s_star_report(&weibull.unshifted(), &grid).unwrap(),
        class_analysis::s_star_report(&PowerTail { alpha: 3.0, drift_a: 1.0 }, &grid).unwrap(),
    ];
    for r in &reports {
        assert!(r.rel_dev.windows(2).all(|w| w[1].abs() < w[0].abs()), "{r:?}");
        assert!(r.rel_dev[2].abs() < 0.1, "{r:?}");
    }
}

#[test]
fn insensitivity_bound_for_builtin_families() {
    for model in [
        IncrementModel::weibull(0.3, 1.0).unwrap(),
        IncrementModel::weibull(0.7, 1.0).unwrap(),
        IncrementModel::pareto(3.0, 1.0).unwrap(),
        IncrementModel::lognormal(1.0, 1.0).unwrap(),
    ] {
        let g = model.g.unwrap();
        for x in [g.x_min * 2.0, 1e4, 1e8] {
            for rho in [1e-3, 0.05, 0.3] {
                let r = class_analysis::insensitivity_modulus(&g, x, rho).unwrap();
                assert!(r.modulus_upper <= r.bound_upper * (1.0 + 1e-6), "{model:?} {r:?}");
                if let (Some(m), Some(b)) = (r.modulus_two_sided, r.bound_two_sided) {
                    assert!(m <= b * (1.0 + 1e-6));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn conjecture_identity(beta in 0.05f64..0.95, a in 0.05f64..5.0, x in 1e-3f64..1e9, e_tau in 1.0f64..10.0) {
        let model = IncrementModel::weibull(beta, a).unwrap();
        prop_assert_eq!(
            asymptotics::conjecture_rhs(&model, e_tau, x).to_bits(),
            asymptotics::area_tail_prediction(&model, e_tau, x).to_bits()
        );
    }

    #[test]
    fn lemma31_bound_nonincreasing_in_x(n in 1u64..200, y in 1.0f64..1e4, x in 1.0f64..1e5, dx in 0.0f64..1e4) {
        let model = IncrementModel::weibull(0.3, 1.0).unwrap();
        let lo = asymptotics::lemma31_bound(&model, n, x, y).unwrap();
        let hi = asymptotics::lemma31_bound(&model, n, x + dx, y).unwrap();
        prop_assert!(hi.value <= lo.value);
        prop_assert!(lo.value >= 0.0);
        prop_assert_eq!((lo.params.x, lo.params.y, lo.params.n), (x, y, Some(n)));
    }

    #[test]
    fn dp_exact_estimates_have_zero_stderr(p in 0.05f64..0.45, x in 0.0f64..30.0) {
        let dp = estimators::dp_exact_lattice(p, x, LatticeCaps::auto(x)).unwrap();
        let e = dp.estimate(x).unwrap();
        prop_assert_eq!(e.stderr, 0.0);
        prop_assert!(e.ci95.0 <= e.p_hat && e.p_hat <= e.ci95.1);
    }

    #[test]
    fn intervals_contain_point_estimates(seed in 0u64..50, x in 0.5f64..40.0) {
        let model = IncrementModel::pareto(3.0, 1.0).unwrap();
        let e = estimators::naive_mc_area_tail(&model, x, 2_000, &SimConfig::new(seed)).unwrap();
        prop_assert!(e.ci95.0 <= e.p_hat && e.p_hat <= e.ci95.1);
        prop_assert!(e.stderr >= 0.0);
    }
}
