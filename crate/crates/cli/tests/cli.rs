use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use swlyap::critical::CriticalPair;
use swlyap::synth::CandidateFunction;
use swlyap::system::MatrixSet;
use swlyap::verify::{Verdict, VerificationReport};
use swlyap_cli::{exit, polyline_points};
use tempfile::TempDir;

fn swlyap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swlyap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const SPIRAL: &str = r#"{"n": 2, "modes": [[-0.1, 1.0, -1.0, -0.1]]}"#;
const SQUARE: &str = r#"{"kind": "polyhedral", "vectors": [[1.0, 0.0], [0.0, 1.0]]}"#;

/// One default `critical` run shared by the tests that need the pair.
fn critical_dir() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let out = swlyap(&["critical", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
        dir
    })
    .path()
}

#[test]
fn critical_default_is_calibrated() {
    let dir = critical_dir();
    let pair = CriticalPair::from_json(&read(dir, "critical.json")).unwrap();
    assert!((pair.rho - 1.0).abs() <= 1e-6, "rho = {}", pair.rho);
    assert!((pair.eigenvalue + 1.0).abs() <= 1e-6);
    let traj = read(dir, "trajectory.csv");
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,mode,norm"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    // Two periods of the worst-case orbit return to the start.
    let (first, last) = (&rows[0], rows.last().unwrap());
    assert!((first[1] - last[1]).abs() < 1e-5 && (first[2] - last[2]).abs() < 1e-5);
}

#[test]
fn render_square_level_set() {
    let dir = TempDir::new().unwrap();
    let cand = write(dir.path(), "square.json", SQUARE);
    let out = swlyap(&["render", "--candidate", cand.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let svg = read(dir.path(), "levelset.svg");
    let rings = polyline_points(&svg, "level");
    assert_eq!(rings.len(), 1);
    let ring = &rings[0];
    assert_eq!(ring.len(), 721);
    assert_eq!(ring[0], ring[720], "level set polyline is closed");
    let c = 256.0;
    let half = ring.iter().map(|(x, y)| (x - c).abs().max((y - c).abs()));
    let (lo, hi) = half.fold((f64::INFINITY, 0.0f64), |(lo, hi), h| (lo.min(h), hi.max(h)));
    assert!(hi - lo < 1e-3, "not a square: {lo}..{hi}");
    // Corners are reached.
    assert!(ring.iter().any(|(x, y)| ((x - c).abs() - hi).abs() < 1e-3 && ((y - c).abs() - hi).abs() < 1e-3));
}

#[test]
fn render_overlays_need_seed_and_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let cand = write(dir.path(), "square.json", SQUARE);
    let sys = write(dir.path(), "spiral.json", SPIRAL);
    let (c, s) = (cand.to_str().unwrap(), sys.to_str().unwrap());
    let out = swlyap(&["render", "--candidate", c, "--system", s, "--out", d]);
    assert_eq!(code(&out), exit::PARSE);
    let args = ["render", "--candidate", c, "--system", s, "--seed", "3", "--trajectories", "3", "--out", d];
    assert_eq!(code(&swlyap(&args)), exit::OK);
    let first = read(dir.path(), "levelset.svg");
    assert_eq!(polyline_points(&first, "trajectory").len(), 3);
    assert_eq!(code(&swlyap(&args)), exit::OK);
    assert_eq!(first, read(dir.path(), "levelset.svg"));
}

#[test]
fn tampered_candidate_is_violated() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let sys = write(dir.path(), "spiral.json", SPIRAL);
    let cand = write(dir.path(), "square.json", SQUARE);
    let out = swlyap(&["verify", "--system", sys.to_str().unwrap(), "--candidate", cand.to_str().unwrap(), "--out", d]);
    assert_eq!(code(&out), exit::VIOLATED);
    let report = VerificationReport::from_json(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report.verdict, Verdict::Violated);
    let w = report.witness.expect("violation carries a witness");
    assert!(w.value > 0.0);
    let csv = read(dir.path(), "report.csv");
    assert!(csv.lines().nth(1).unwrap().starts_with("violated,"));
}

#[test]
fn synth_then_verify_round_trips() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let sys = write(dir.path(), "spiral.json", SPIRAL);
    let s = sys.to_str().unwrap();
    let out = swlyap(&["synth", "--system", s, "--pieces", "64", "--shift", "0.05", "--out", d]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let cand = CandidateFunction::from_json(&read(dir.path(), "candidate.json")).unwrap();
    assert!(matches!(cand, CandidateFunction::Polyhedral(ref w) if w.pieces() == 64));
    assert_eq!(CandidateFunction::from_json(&cand.to_json()).unwrap(), cand);
    swlyap::canonical::SampledNorm::from_json(&read(dir.path(), "norm.json")).unwrap();
    let gap = read(dir.path(), "gap.csv");
    assert!(gap.starts_with("count,gap,argmax_x1,argmax_x2\n64,"));

    let c = dir.path().join("candidate.json");
    let out = swlyap(&["verify", "--system", s, "--candidate", c.to_str().unwrap(), "--out", d]);
    assert_eq!(code(&out), exit::OK);
    let json = read(dir.path(), "report.json");
    let report = VerificationReport::from_json(&json).unwrap();
    assert_eq!(report.verdict, Verdict::Strict);
    assert_eq!(report.to_json(), json);

    for family in ["even-power", "polynomial"] {
        let out = swlyap(&["synth", "--system", s, "--pieces", "32", "--family", family, "--degree", "4", "--out", d]);
        assert_eq!(code(&out), exit::OK, "{family}");
        CandidateFunction::from_json(&read(dir.path(), "candidate.json")).unwrap();
    }
}

#[test]
fn critical_json_round_trips() {
    let json = read(critical_dir(), "critical.json");
    let pair = CriticalPair::from_json(&json).unwrap();
    assert_eq!(CriticalPair::from_json(&pair.to_json()).unwrap(), pair);
    MatrixSet::from_json(&pair.modes().to_json()).unwrap();
}

#[test]
fn scan_csv_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let pair = critical_dir().join("critical.json");
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let args = [
            "scan", "--system", pair.to_str().unwrap(), "--epsilons", "0.5,0.2", "--dmax", "2",
            "--out", out_dir.to_str().unwrap(), "--threads", "2",
        ];
        let out = swlyap(&args);
        assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(out_dir.join("degree_scan.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epsilon,d_min,degree,status,samples,delta,B,pivots"));
    assert!(lines.next().unwrap().starts_with("0.5,1,2,ok,"));
    let w = CandidateFunction::from_json(&read(&dir.path().join("a"), "witness_eps_0.5.json")).unwrap();
    assert!(matches!(w, CandidateFunction::Polynomial(_)));
    assert!(read(&dir.path().join("a"), "degree_scan.timing").starts_with("runtime_seconds="));
}

#[test]
fn error_classes_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"n\": 2, \"modes\": ");
    let sys = write(dir.path(), "spiral.json", SPIRAL);
    let cand3 = write(dir.path(), "cube.json", r#"{"kind": "polyhedral", "vectors": [[1.0, 0.0, 0.0]]}"#);
    let square = write(dir.path(), "square.json", SQUARE);

    let parse = swlyap(&["verify", "--system", bad.to_str().unwrap(), "--candidate", square.to_str().unwrap(), "--out", d]);
    assert_eq!(code(&parse), exit::PARSE);
    let dim = swlyap(&["verify", "--system", sys.to_str().unwrap(), "--candidate", cand3.to_str().unwrap(), "--out", d]);
    assert_eq!(code(&dim), exit::DIMENSION);
    let pair = write(dir.path(), "pair.json", r#"{"n": 2, "modes": [[-0.1, 1.0, -1.0, -0.1], [-0.1, 2.0, -0.5, -0.1]]}"#);
    let budget = swlyap(&["synth", "--system", pair.to_str().unwrap(), "--budget", "1", "--out", d]);
    assert_eq!(code(&budget), exit::BUDGET, "{}", String::from_utf8_lossy(&budget.stderr));
    assert_eq!(code(&swlyap(&["synth", "--system"])), exit::PARSE);
    assert_eq!(code(&swlyap(&["critical", "--tol", "-1", "--out", d])), exit::PARSE);
}
