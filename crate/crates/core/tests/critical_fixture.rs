mod common;

use proptest::prelude::*;
use swlyap::critical::*;
use swlyap::system::{linalg, simulate, transition_matrix};
use swlyap::verify::{verify_sampled, Verdict, VerifyTolerance};

#[test]
fn calibrated_pair_fixture() {
    let p = common::pair();
    assert!((p.k - common::K_CRIT).abs() < 1e-8, "k = {}", p.k);
    assert!((p.t1 - common::T1).abs() < 1e-6 && (p.t2 - common::T1).abs() < 1e-6);
    assert!((p.rho - 1.0).abs() <= 1e-8);
    assert!((p.eigenvalue + 1.0).abs() <= 1e-8);
    assert!((p.x0.norm() - 1.0).abs() < 1e-15);
    for m in [&p.m1, &p.m2] {
        assert!(linalg::is_hurwitz(m));
        for x in swlyap::synth::sphere_sequence(2, 64) {
            assert!(angular_velocity(m, &x) < 0.0);
        }
    }
}

#[test]
fn closes_after_two_periods() {
    let p = common::pair();
    let law = periodic_law(p);
    let set = p.modes();
    let t = p.period();
    assert_eq!(law.period(), p.t1 + p.t2);
    let half = transition_matrix(&law, &set, t).unwrap() * &p.x0;
    let full = transition_matrix(&law, &set, 2.0 * t).unwrap() * &p.x0;
    assert!((half + &p.x0).norm() <= 1e-6);
    assert!((full - &p.x0).norm() <= 1e-6);
    let traj = simulate(&law, &set, &p.x0, 0.01, 2.0 * t).unwrap();
    assert!((traj.last_state() - &p.x0).norm() <= 1e-6);
    assert_eq!(law.switch_times(2.0 * t).len(), 4);
}

#[test]
fn not_attractive() {
    let p = common::pair();
    let law = periodic_law(p);
    let set = p.modes();
    for k in 1..=20 {
        let x = transition_matrix(&law, &set, 2.0 * k as f64 * p.period()).unwrap() * &p.x0;
        assert!((x.norm() - 1.0).abs() <= 1e-4, "period {k}: {}", x.norm());
    }
}

#[test]
fn transversal_in_k() {
    let p = common::pair();
    let radius = |k: f64| {
        let (m1, m2) = make_pair(&FamilyParameter::new(k, p.alpha).unwrap());
        worst_case_product(&m1, &m2, DEFAULT_T_MAX, DEFAULT_GRID).unwrap().rho
    };
    assert!(radius(p.k * (1.0 - 1e-3)) < 1.0);
    assert!(radius(p.k * (1.0 + 1e-3)) > 1.0);
    let (lo, hi) = find_bracket(0.1).unwrap();
    assert!(radius(lo) < 1.0 && radius(hi) > 1.0);
    assert!(radius(lo + 0.2 * (p.k - lo)) < 1.0);
    assert!(matches!(calibrate_critical(0.1, Some((1.0, 1.1)), 1e-6), Err(swlyap::Error::Bracket { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn spectral_identity(eps in 0.0f64..0.5) {
        let p = common::pair();
        let set = epsilon_family(p, eps).unwrap();
        let shifted = period_map(set.matrix(0), set.matrix(1), p.t1, p.t2).unwrap();
        let (re0, _) = linalg::eigenvalues_2x2(&p.period_map());
        let (re1, _) = linalg::eigenvalues_2x2(&shifted);
        let f = (-eps * p.period()).exp();
        for (a, b) in re0.iter().zip(&re1) {
            prop_assert!((a * f - b).abs() <= 1e-10);
        }
        prop_assert!(set.matrices().all(linalg::is_hurwitz));
    }
}

#[test]
fn epsilon_family_examples() {
    let p = common::pair();
    assert_eq!(epsilon_family(p, 0.0).unwrap(), p.modes());
    assert!(epsilon_family(p, -0.1).is_err());
    for eps in [0.01, 0.05, 0.2] {
        let set = epsilon_family(p, eps).unwrap();
        let rho = linalg::spectral_radius(&period_map(set.matrix(0), set.matrix(1), p.t1, p.t2).unwrap());
        assert!((rho - (-eps * p.period()).exp()).abs() <= 1e-10);
        let law = periodic_law(p);
        let traj = simulate(&law, &set, &p.x0, 0.05, 2.0 * p.period()).unwrap();
        let factor = traj.last_state().norm();
        assert!((factor - (-2.0 * eps * p.period()).exp()).abs() <= 1e-6);
    }
}

#[test]
fn json_round_trip() {
    let p = common::pair();
    let back = CriticalPair::from_json(&p.to_json()).unwrap();
    assert_eq!(&back, p);
    let doc: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
    for key in ["m1", "m2", "t1", "t2", "x0", "rho"] {
        assert!(doc.get(key).is_some());
    }
    assert!(CriticalPair::from_json(r#"{"m1": [[0,1],[1,0]], "m2": [[-1,0],[0,-1]], "t1": 1, "t2": 1, "x0": [1,0], "rho": 1}"#).is_err());
}

#[test]
fn embedding_in_three_dimensions() {
    let p = common::pair();
    let cfg = EmbedConfig::for_pair(p);
    let e = embed_critical_nd(p, 3, 3, 0.0, &cfg).unwrap();
    assert_eq!(e.set.len(), 5);
    assert!(e.nu.is_finite() && e.nu > 0.0);
    for m in e.embedded.matrices() {
        assert_eq!(m[(2, 0)], 0.0);
        assert_eq!(m[(2, 1)], 0.0);
        assert_eq!(m[(0, 2)], 0.0);
        assert_eq!(m[(1, 2)], 0.0);
    }
    let tol = VerifyTolerance::new(0.0, e.norm.rate_slack()).unwrap();
    let rep = verify_sampled(&e.norm, &e.set, 4096, &tol).unwrap();
    assert_ne!(rep.verdict, Verdict::Violated, "margin {}", rep.margin);
    let half = e.embedded.union(&swlyap::system::shift_set(&e.rotations, 0.5 * e.nu)).unwrap();
    let rep = verify_sampled(&e.norm, &half, 4096, &tol).unwrap();
    assert_eq!(rep.verdict, Verdict::Violated);
    assert!(rep.witness.unwrap().mode >= 2);
}
