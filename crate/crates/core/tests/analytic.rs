use mmia::analytic::*;
use mmia::SystemParams;

mod oracles;
use oracles::{correlated_slots_mc, laplace_los_mc};

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[test]
fn laplace_transforms_are_normalized_and_decreasing() {
    let p = SystemParams::table1();
    for l in [
        laplace_los(0.0, &p, &spec()).unwrap().value,
        laplace_nlos(0.0, &p, &spec()).unwrap().value,
        laplace_two_tier(
            0.0,
            &SystemParams {
                epsilon: 0.1,
                ..p.clone()
            },
            &spec(),
        )
        .unwrap()
        .value,
    ] {
        assert!((l - 1.0).abs() < 1e-12);
    }
    let mut prev = 1.0;
    for s in [1e-2, 1.0, 1e2, 1e4, 1e6] {
        let l = laplace_los(s, &p, &spec()).unwrap().value;
        assert!(l < prev && l > 0.0, "s={s}: {l}");
        prev = l;
    }
    assert!(laplace_los(-1.0, &p, &spec()).is_err());
}

#[test]
fn laplace_los_matches_point_process_sampling() {
    let p = SystemParams::table1().with_lambda(1e-3);
    for s in [10.0, 1e3, 1e5] {
        let exact = laplace_los(s, &p, &spec()).unwrap().value;
        let (mc, se) = laplace_los_mc(s, &p, 40_000, 11);
        assert!((exact - mc).abs() < 4.0 * se + 1e-4, "s={s}: {exact} vs {mc} ± {se}");
    }
}

#[test]
fn failure_probability_decreases_with_density_and_budget() {
    let base = SystemParams::table1();
    let mut prev = 1.0;
    for lambda in [1e-5, 1e-4, 1e-3] {
        let f = failure_prob_los(&base.clone().with_lambda(lambda), 12, &spec())
            .unwrap()
            .value;
        assert!(f < prev);
        prev = f;
    }
    let f6 = failure_prob_los(&base, 6, &spec()).unwrap().value;
    let f12 = failure_prob_los(&base, 12, &spec()).unwrap().value;
    assert!(f12 < f6);
    assert_eq!(failure_prob_los(&base, 0, &spec()).unwrap().value, 1.0);
}

#[test]
fn failure_is_the_complement_power_of_one_slot() {
    let p = SystemParams::table1();
    let ps = p_success_los(&p, &spec()).unwrap().value;
    let f = failure_prob_los(&p, 7, &spec()).unwrap().value;
    assert!((f - (1.0 - ps).powi(7)).abs() < 1e-12);
}

#[test]
fn tighter_tolerance_moves_the_value_within_the_reported_error() {
    let p = SystemParams::table1();
    let coarse = p_success_los(&p, &spec()).unwrap();
    let fine_spec = QuadratureSpec {
        abs_tol: spec().abs_tol * 0.5,
        rel_tol: spec().rel_tol * 0.5,
        ..spec()
    };
    let fine = p_success_los(&p, &fine_spec).unwrap();
    assert!((coarse.value - fine.value).abs() <= coarse.error_estimate + fine.error_estimate + 1e-12);
}

#[test]
fn sidelobe_model_without_sidelobes_is_the_los_model() {
    for lambda in [1e-5, 1e-4, 1e-3] {
        let p = SystemParams::table1().with_lambda(lambda);
        let los = p_success_los(&p, &spec()).unwrap().value;
        let main = p_success_mainlobe(&p, &spec()).unwrap().value;
        assert!((los - main).abs() < 1e-8, "λ={lambda}: {los} {main}");
        let l1 = laplace_los(50.0, &p, &spec()).unwrap().value;
        let l2 = laplace_two_tier(50.0 / p.bs_pattern().mainlobe_gain(), &p, &spec())
            .unwrap()
            .value;
        assert!((l1 - l2).abs() < 1e-10);
    }
}

#[test]
fn nlos_with_los_exponent_removes_blockage() {
    // Blocked and unblocked interferers are then indistinguishable, so the
    // mixed transform equals the unblocked one.
    let mut p = SystemParams::table1();
    p.alpha_nlos = p.alpha_los;
    let unblocked = SystemParams { beta: 0.0, ..p.clone() };
    for s in [1e3, 1e6, 1e9] {
        let a = laplace_nlos(s, &p, &spec()).unwrap().value;
        let b = laplace_nlos(s, &unblocked, &spec()).unwrap().value;
        assert!((a - b).abs() < 1e-9, "s={s}: {a} {b}");
    }
}

#[test]
fn nlos_with_infinite_exponent_is_the_los_model() {
    let p = SystemParams::table1().los_only();
    let a = failure_prob_nlos(&p, 12, &spec()).unwrap().value;
    let b = failure_prob_los(&p, 12, &spec()).unwrap().value;
    assert!((a - b).abs() < 1e-8);
}

fn sidelobe_params() -> SystemParams {
    SystemParams {
        epsilon: 0.1,
        ..SystemParams::table1().with_lambda(1e-3)
    }
}

#[test]
fn selection_identities() {
    let p = sidelobe_params();
    let r = 15.0;
    let p1 = p_joint_sidelobe(1, r, &p, &spec()).unwrap().value;
    let p2 = p_joint_sidelobe(2, r, &p, &spec()).unwrap().value;
    let q1 = q_selection(1, r, &p, &spec()).unwrap().value;
    let q2 = q_selection(2, r, &p, &spec()).unwrap().value;
    assert!((q1 - p1).abs() < 1e-10);
    assert!((q2 - (2.0 * p1 - p2)).abs() < 1e-9);
    // Slots are positively correlated through the shared positions.
    assert!(p2 >= p1 * p1);
    let mut prev = 0.0;
    for n in 1..=8 {
        let q = q_selection(n, r, &p, &spec()).unwrap().value;
        assert!(q >= prev - 1e-12 && q <= 1.0);
        prev = q;
    }
    assert!(q_selection(0, r, &p, &spec()).is_err());
    assert!(q_selection(
        2,
        r,
        &SystemParams {
            epsilon: 0.0,
            ..p.clone()
        },
        &spec()
    )
    .is_err());
}

#[test]
fn inclusion_exclusion_matches_correlated_slot_sampling() {
    let p = sidelobe_params();
    let trials = 60_000;
    for (r, seed) in [(8.0, 1), (15.0, 2)] {
        let (q_mc, p_mc) = correlated_slots_mc(&p, r, 6, trials, seed);
        for n in 1..=6 {
            let q = q_selection(n, r, &p, &spec()).unwrap();
            let pj = p_joint_sidelobe(n, r, &p, &spec()).unwrap();
            let se = |x: f64| (x * (1.0 - x) / trials as f64).sqrt();
            assert!(
                (q.value - q_mc[n - 1]).abs() < 3.0 * se(q.value) + q.error_estimate + 1e-3,
                "Q r={r} n={n}: {} vs {}",
                q.value,
                q_mc[n - 1]
            );
            assert!(
                (pj.value - p_mc[n - 1]).abs() < 3.0 * se(pj.value) + pj.error_estimate + 1e-3,
                "P r={r} n={n}: {} vs {}",
                pj.value,
                p_mc[n - 1]
            );
        }
    }
}

#[test]
fn estimator_agrees_with_the_exact_sum() {
    let p = sidelobe_params();
    let exact_opts = SidelobeOptions::default();
    let estimated_opts = SidelobeOptions {
        exact_limit: 0,
        estimator_samples: 4000,
        ..exact_opts
    };
    for (n, r) in [(5, 10.0), (11, 20.0)] {
        let exact = q_selection_with(n, r, &p, &spec(), &exact_opts).unwrap();
        let est = q_selection_with(n, r, &p, &spec(), &estimated_opts).unwrap();
        assert!(!exact.estimator_backed && est.estimator_backed);
        assert!(
            (exact.value - est.value).abs() < est.error_estimate + exact.error_estimate + 2e-3,
            "n={n}: {} vs {} ± {}",
            exact.value,
            est.value,
            est.error_estimate
        );
    }
}

#[test]
fn sidelobes_only_help_when_interference_is_light() {
    let p = SystemParams {
        epsilon: 0.05,
        ..SystemParams::table1().with_lambda(1e-5)
    };
    let with = failure_prob_sidelobe(&p, 12, &spec(), &SidelobeOptions::default())
        .unwrap()
        .value;
    let without = failure_prob_los(
        &SystemParams {
            epsilon: 0.0,
            ..p.clone()
        },
        12,
        &spec(),
    )
    .unwrap()
    .value;
    assert!(with < without);
}

#[test]
fn invalid_parameters_are_rejected() {
    let mut p = SystemParams::table1();
    p.alpha_los = 2.0;
    assert!(p_success_los(&p, &spec()).is_err());
    let mut p = SystemParams::table1();
    p.n_bs = 0;
    assert!(failure_prob_los(&p, 12, &spec()).is_err());
}
