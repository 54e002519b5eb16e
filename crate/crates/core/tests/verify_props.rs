mod common;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use swlyap::canonical::{strictify_via_shift, NormConfig, SampledNorm};
use swlyap::critical::{epsilon_family, CriticalPair};
use swlyap::lab::PiecesScanConfig;
use swlyap::rng;
use swlyap::synth::*;
use swlyap::system::{simulate, MatrixSet, SwitchingLaw};
use swlyap::verify::*;

/// Strictified norm for `𝓜^ε` with `η = ε/2`, as the piece-count scan uses.
fn strict_norm(pair: &CriticalPair, eps: f64) -> SampledNorm {
    let cfg = PiecesScanConfig::default().norm_config(pair, 256);
    strictify_via_shift(&epsilon_family(pair, eps).unwrap(), 0.5 * eps, None, &cfg).unwrap()
}

fn w512() -> &'static PolyhedralForm {
    static W: OnceLock<PolyhedralForm> = OnceLock::new();
    W.get_or_init(|| synthesize_polyhedral(&strict_norm(common::pair(), 0.05), 512).unwrap())
}

#[test]
fn ball_of_critical_synthesis() {
    let p = common::pair();
    let h = p.t1 / 32.0;
    let v = SampledNorm::build(&p.modes(), None, &NormConfig::with_steps(h, (4.0 * p.period() / h).ceil() as usize)).unwrap();
    let w = synthesize_polyhedral(&v, 64).unwrap();
    let ball = unit_ball_2d(&w).unwrap();
    assert!(ball.vertices.len() <= 2 * 64);
    for vert in &ball.vertices {
        assert!((w.eval(&vert.point) - 1.0).abs() <= 1e-10);
        for l in &w.vectors {
            assert!((l[0] * vert.point[0] + l[1] * vert.point[1]).abs() <= 1.0 + 1e-10);
        }
    }
}

#[test]
fn endpoint_sufficiency() {
    let set = epsilon_family(common::pair(), 0.05).unwrap();
    let ball = unit_ball_2d(w512()).unwrap();
    for v in &ball.vertices {
        let (a, b) = (ball.covector(v.active.0), ball.covector(v.active.1));
        for m in set.matrices() {
            let mv = m * &v.point;
            let ends = (-a.dot(&mv)).min(-b.dot(&mv));
            let sampled = (0..=10)
                .map(|k| {
                    let s = k as f64 / 10.0;
                    -(a * (1.0 - s) + b * s).dot(&mv)
                })
                .fold(f64::INFINITY, f64::min);
            assert!((sampled - ends).abs() <= 1e-12);
        }
    }
}

#[test]
fn exact_and_sampled_agree() {
    let p = common::pair();
    for (eps, n) in [(0.2, 64), (0.1, 128), (0.05, 512)] {
        let set = epsilon_family(p, eps).unwrap();
        let w = synthesize_polyhedral(&strict_norm(p, eps), n).unwrap();
        let exact = verify_polyhedral_2d(&w, &set, &VerifyTolerance::default()).unwrap();
        assert_eq!(exact.verdict, Verdict::Strict, "eps {eps}");
        let sampled = verify_sampled(&CandidateFunction::Polyhedral(w), &set, 4096, &VerifyTolerance::default()).unwrap();
        let rel = (sampled.margin - exact.margin).abs() / exact.margin;
        assert!(rel <= 0.05, "eps {eps}: exact {} sampled {}", exact.margin, sampled.margin);
        // Samples are a subset of the checks the exact test dominates.
        assert!(sampled.margin >= exact.margin - 1e-12);
    }
}

#[test]
fn strict_verdict_implies_decay() {
    let set = epsilon_family(common::pair(), 0.05).unwrap();
    let rep = verify_polyhedral_2d(w512(), &set, &VerifyTolerance::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Strict);
    let w = CandidateFunction::Polyhedral(w512().clone());
    let mut r = rng::seeded(2024);
    let horizon = 60.0;
    let mut worst_rate = f64::INFINITY;
    for _ in 0..100 {
        let law = SwitchingLaw::random(&mut r, 2, horizon, 0.05, 2.0).unwrap();
        let x0 = rng::unit_vector(&mut r, 2);
        let traj = simulate(&law, &set, &x0, 0.1, horizon).unwrap();
        assert!(check_monotone_along(&w, &traj, 0.0).is_monotone());
        worst_rate = worst_rate.min(-(traj.last_state().norm() / x0.norm()).ln() / horizon);
    }
    assert!(worst_rate > 0.0);
    // The exact margin bounds the decay of W itself.
    assert!(worst_rate >= 0.5 * rep.margin);
}

#[test]
fn smooth_candidate_from_verified_polytope() {
    let set = epsilon_family(common::pair(), 0.05).unwrap();
    let z = CandidateFunction::EvenPower(EvenPowerSum::new(w512().vectors.clone(), 32, false).unwrap());
    let rep = verify_sampled(&z, &set, 4096, &VerifyTolerance::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Strict);
    assert!(!rep.certified);
}

#[test]
fn converse_probe() {
    let p = common::pair();
    let rotation = MatrixSet::from_matrices(vec![common::mat(2, &[0.0, 1.0, -1.0, 0.0])]).unwrap();
    let square = PolyhedralForm::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let marginal = synthesize_polyhedral(&strict_norm(p, 0.0), 128).unwrap();
    let cases: Vec<(PolyhedralForm, MatrixSet)> = vec![(square, rotation), (marginal, p.modes())];
    let mut r = rng::seeded(99);
    for (w, set) in cases {
        let f = CandidateFunction::Polyhedral(w.clone());
        let mut increased = false;
        for _ in 0..50 {
            let law = SwitchingLaw::random(&mut r, set.len(), 20.0, 0.05, 2.0).unwrap();
            let traj = simulate(&law, &set, &rng::unit_vector(&mut r, 2), 0.05, 20.0).unwrap();
            increased |= !check_monotone_along(&f, &traj, 1e-9).is_monotone();
        }
        assert!(increased);
        assert_ne!(verify_polyhedral_2d(&w, &set, &VerifyTolerance::default()).unwrap().verdict, Verdict::Strict);
        assert_ne!(verify_sampled(&f, &set, 8192, &VerifyTolerance::default()).unwrap().verdict, Verdict::Strict);
    }
}

#[test]
fn marginal_monotone_along_orbit() {
    // V̂ of the marginal pair along its periodic orbit: no increase beyond
    // the approximation error and almost no decrease over one period.
    let p = common::pair();
    let h = p.t1 / 32.0;
    let v = SampledNorm::build(&p.modes(), None, &NormConfig::with_steps(h, (4.0 * p.period() / h).ceil() as usize)).unwrap();
    let traj = simulate(&swlyap::critical::periodic_law(p), &p.modes(), &p.x0, 0.01, p.period()).unwrap();
    match check_monotone_along(&v, &traj, v.delta_approx) {
        Monotonicity::Monotone { initial, final_value, .. } => {
            assert!((initial - final_value).abs() <= v.delta_approx * initial)
        }
        m => panic!("{m:?}"),
    }
}

#[test]
fn random_trajectories_decrease_enough() {
    let set = epsilon_family(common::pair(), 0.05).unwrap();
    let w = CandidateFunction::Polyhedral(w512().clone());
    let mut r = rng::seeded(31);
    for _ in 0..30 {
        let horizon = 20.0;
        let law = SwitchingLaw::random(&mut r, 2, horizon, 0.05, 2.0).unwrap();
        let x0: DVector<f64> = rng::unit_vector(&mut r, 2);
        let traj = simulate(&law, &set, &x0, 0.1, horizon).unwrap();
        match check_monotone_along(&w, &traj, 0.0) {
            Monotonicity::Monotone { initial, final_value, .. } => {
                assert!(initial - final_value >= (1.0 - (-0.05f64 * horizon).exp()) * initial / 2.0)
            }
            m => panic!("{m:?}"),
        }
    }
}

#[test]
fn so_shift_is_tight() {
    let e = SampledNorm::euclidean(3);
    let rot = swlyap::system::so_ball_sample(3, 6, 1).unwrap();
    let nu = stabilizing_shift(&e, &rot, 0.0, 512).unwrap();
    assert!(nu.abs() < 1e-12);
    let ident = MatrixSet::from_matrices(vec![DMatrix::identity(3, 3)]).unwrap();
    assert!((stabilizing_shift(&e, &ident, 0.1, 512).unwrap() - 1.1).abs() < 1e-12);
}
