mod common;

use std::sync::OnceLock;

use swlyap::critical::epsilon_family;
use swlyap::lab::*;
use swlyap::synth::{sphere_sequence, CandidateFunction, PolynomialTerm};
use swlyap::system::MatrixSet;
use swlyap::verify::{verify_sampled, Verdict, VerifyTolerance};

const EPS: [f64; 5] = [0.5, 0.2, 0.1, 0.05, 0.02];

fn degree_table() -> &'static [DegreeRow] {
    static T: OnceLock<Vec<DegreeRow>> = OnceLock::new();
    T.get_or_init(|| min_degree_scan(common::pair(), &EPS, &DegreeScanConfig::default()).unwrap())
}

/// Independent re-check: evaluates the polynomial and its gradient directly.
fn recheck(p: &PolynomialForm, set: &MatrixSet, samples: usize, delta: f64) -> f64 {
    let mut worst = f64::INFINITY;
    for x in sphere_sequence(2, samples) {
        worst = worst.min(p.eval(&x) - 1.0);
        for m in set.matrices() {
            worst = worst.min(-delta - p.gradient(&x).dot(&(m * &x)));
        }
    }
    worst
}

#[test]
fn degree_fixture() {
    let got: Vec<Option<u32>> = degree_table().iter().map(|r| r.d_min).collect();
    assert_eq!(got, vec![Some(1), Some(1), Some(1), Some(2), Some(2)]);
    assert!(degree_table().iter().all(|r| r.status == ScanStatus::Ok));
}

#[test]
fn witnesses_hold() {
    let cfg = DegreeScanConfig::default();
    for row in degree_table() {
        let set = epsilon_family(common::pair(), row.epsilon).unwrap();
        let p = row.witness.as_ref().unwrap();
        assert_eq!(p.degree(), 2 * row.d_min.unwrap());
        // Rows are normalized by their largest coefficient, at most one in
        // magnitude times the bound; compare on the raw scale.
        let scale = p.terms.iter().map(|t: &PolynomialTerm| t.coefficient.abs()).fold(1.0, f64::max);
        assert!(recheck(p, &set, row.samples, cfg.delta) >= -1e-9 * scale);
        let lp = build_feasibility_lp(&set, p.degree(), row.samples, cfg.delta, cfg.bound, 1.0).unwrap();
        let c: Vec<f64> = lp.basis.iter().map(|a| p.coefficient(a)).collect();
        assert!(lp.min_slack(&c) >= WITNESS_SLACK);
    }
}

#[test]
fn witnesses_pass_sampled_verification() {
    for row in degree_table() {
        let set = epsilon_family(common::pair(), row.epsilon).unwrap();
        let f = CandidateFunction::Polynomial(row.witness.clone().unwrap());
        let rep = verify_sampled(&f, &set, 4 * row.samples, &VerifyTolerance::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Strict, "epsilon {}: margin {}", row.epsilon, rep.margin);
    }
}

#[test]
fn marginal_set_has_no_bounded_degree_certificate() {
    let set = common::pair().modes();
    for d in 1..=10 {
        for samples in [128, 256] {
            let out = solve_lp(&build_feasibility_lp(&set, 2 * d, samples, 1e-3, 1e6, 1.0).unwrap());
            assert_eq!(out.status, LpStatus::Infeasible, "degree {} at {samples}", 2 * d);
            assert!(out.residual > INFEASIBLE_RESIDUAL);
        }
    }
}

#[test]
fn solves_are_deterministic() {
    let set = epsilon_family(common::pair(), 0.05).unwrap();
    let lp = build_feasibility_lp(&set, 4, 128, 1e-3, 1e6, 1.0).unwrap();
    let a = solve_lp(&lp);
    let b = solve_lp(&lp);
    assert_eq!(a, b);
    assert_eq!(a.status, LpStatus::Feasible);
    let csv_a: Vec<String> = degree_table().iter().map(DegreeRow::csv_row).collect();
    let again = min_degree_scan(common::pair(), &EPS, &DegreeScanConfig::default()).unwrap();
    let csv_b: Vec<String> = again.iter().map(DegreeRow::csv_row).collect();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn contraction_quadratic() {
    let set = MatrixSet::from_matrices(vec![-nalgebra::DMatrix::identity(2, 2)]).unwrap();
    let lp = build_feasibility_lp(&set, 2, 64, 1e-3, 1e6, 1.0).unwrap();
    let out = solve_lp(&lp);
    assert_eq!(out.status, LpStatus::Feasible);
    let p = out.polynomial(&lp).unwrap();
    // Any witness is positive on the samples and decreasing along −Id.
    for x in sphere_sequence(2, 64) {
        assert!(p.eval(&x) >= 1.0 - 1e-9);
        assert!(-2.0 * p.eval(&x) <= -1e-3 + 1e-9);
    }
}

#[test]
fn constancy_probe_examples() {
    let p = common::pair();
    let set = p.modes();
    let tol = 1e-6;
    let lp = build_feasibility_lp(&set, 4, 128, 0.0, 1e6, 0.0).unwrap();
    let out = solve_lp(&lp);
    assert_eq!(out.status, LpStatus::Feasible);
    let c = out.polynomial(&lp).unwrap();
    assert!(constancy_probe(&c, p, 0.01).unwrap() <= 10.0 * tol);
    let x1sq = PolynomialForm::new(2, vec![PolynomialTerm { exponents: MultiIndex(vec![2, 0]), coefficient: 1.0 }]).unwrap();
    assert!(constancy_probe(&x1sq, p, 0.01).unwrap() > 0.1);
}

#[test]
fn pieces_fixture() {
    let rows = min_pieces_scan(common::pair(), &[0.2, 0.1, 0.05, 0.0], &PiecesScanConfig::default()).unwrap();
    let got: Vec<Option<usize>> = rows.iter().map(|r| r.n_min).collect();
    assert_eq!(got, vec![Some(32), Some(64), Some(256), None]);
    assert!(rows[..3].iter().all(|r| r.margin > 0.0));
    assert!(rows[3].margin <= 0.0);
}

#[test]
fn scan_csv_shape() {
    let header_cols = DegreeRow::CSV_HEADER.split(',').count();
    for r in degree_table() {
        assert_eq!(r.csv_row().split(',').count(), header_cols);
    }
}
