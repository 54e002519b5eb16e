//! Command-line front end: argument model, dispatch and artifact writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use swlyap::canonical::{strictify_via_shift, NormConfig, SampledNorm};
use swlyap::critical::{calibrate_critical, periodic_law, CriticalPair, DEFAULT_ALPHA};
use swlyap::lab::{min_degree_scan, min_pieces_scan, DegreeRow, DegreeScanConfig, PiecesRow, PiecesScanConfig, ScanStatus};
use swlyap::rng;
use swlyap::synth::{
    smooth_to_even_powers, synthesize_polyhedral, to_polynomial, uniform_gap, Candidate, CandidateFunction,
};
use swlyap::system::{simulate, MatrixSet, SwitchingLaw};
use swlyap::verify::{verify_polyhedral_2d, verify_sampled, Verdict, VerificationReport, VerifyTolerance};

pub mod svg;

/// Exit codes shared by every subcommand.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const DIMENSION: i32 = 3;
    pub const BUDGET: i32 = 4;
    pub const VIOLATED: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] swlyap::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(swlyap::Error::Parse(_)) | CliError::Usage(_) => exit::PARSE,
            CliError::Lib(swlyap::Error::Dimension(_)) => exit::DIMENSION,
            CliError::Lib(swlyap::Error::BudgetExceeded { .. }) => exit::BUDGET,
            _ => exit::OTHER,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// What a successful run concluded; artifacts are on disk either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Violated,
    BudgetExceeded,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Ok => exit::OK,
            Outcome::Violated => exit::VIOLATED,
            Outcome::BudgetExceeded => exit::BUDGET,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "swlyap", version, about = "Common Lyapunov functions for switched linear systems")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads; defaults to RAYON_NUM_THREADS, then the core count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the sampled canonical norm of a system and a candidate from it.
    Synth(SynthArgs),
    /// Check a candidate against a system.
    Verify(VerifyArgs),
    /// Calibrate the critical planar pair.
    Critical(CriticalArgs),
    /// Minimal degree or piece count over an epsilon sweep.
    Scan(ScanArgs),
    /// SVG of a planar level set with trajectory overlays.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Polyhedral,
    EvenPower,
    Polynomial,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// System JSON `{n, modes, labels}`.
    #[arg(long)]
    pub system: PathBuf,
    /// Generator horizon.
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    /// Dwell grid.
    #[arg(long, default_value_t = 0.1)]
    pub dwell: f64,
    /// Cap on kept generators.
    #[arg(long, default_value_t = 20_000)]
    pub budget: usize,
    /// Probe directions for generator pruning.
    #[arg(long, default_value_t = 256)]
    pub probes: usize,
    /// Number of polyhedral pieces.
    #[arg(long, default_value_t = 256)]
    pub pieces: usize,
    /// Build the norm of the system shifted by this rate.
    #[arg(long, default_value_t = 0.0)]
    pub shift: f64,
    #[arg(long, value_enum, default_value_t = Family::Polyhedral)]
    pub family: Family,
    /// Half-degree `d` for the smooth families.
    #[arg(long, default_value_t = 8)]
    pub degree: u32,
    /// Sphere samples for the gap report.
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyMethod {
    /// Exact vertex test for planar polyhedral candidates, sampled otherwise.
    Auto,
    Exact,
    Sampled,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Candidate JSON.
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long, value_enum, default_value_t = VerifyMethod::Auto)]
    pub method: VerifyMethod,
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    /// Margin above which the verdict is strict.
    #[arg(long, default_value_t = 0.0)]
    pub strict_tol: f64,
    /// Violation allowance below zero for a nonstrict verdict.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct CriticalArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Calibration tolerance on the spectral radius.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Trajectory length in periods.
    #[arg(long, default_value_t = 2.0)]
    pub horizon: f64,
    /// Trajectory sample spacing; defaults to a period / 200.
    #[arg(long)]
    pub dwell: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanKind {
    Degree,
    Pieces,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Critical pair JSON from `critical`; calibrated afresh when omitted.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScanKind::Degree)]
    pub kind: ScanKind,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.2, 0.1, 0.05, 0.02])]
    pub epsilons: Vec<f64>,
    /// Largest half-degree tried.
    #[arg(long, default_value_t = 10)]
    pub dmax: u32,
    /// Largest piece count tried.
    #[arg(long, default_value_t = 1024)]
    pub nmax: usize,
    /// LP sphere samples (degree) or probe directions (pieces).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    #[arg(long, default_value_t = 1e6)]
    pub bound: f64,
    /// Pivot budget per LP (degree) or generator budget (pieces).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Generator horizon in periods (pieces).
    #[arg(long, default_value_t = 4.0)]
    pub horizon: f64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Candidate JSON; must be planar.
    #[arg(long)]
    pub candidate: PathBuf,
    /// System JSON for trajectory overlays.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Number of random-switching overlays.
    #[arg(long, default_value_t = 4)]
    pub trajectories: usize,
    /// Overlay length.
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    /// Longest dwell of the random laws.
    #[arg(long, default_value_t = 1.0)]
    pub dwell: f64,
    /// Required whenever overlays are drawn.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Range checks that clap cannot express.
    pub fn validate(&self) -> CliResult<()> {
        fn positive(name: &str, v: f64) -> CliResult<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
            }
        }
        fn nonzero(name: &str, v: usize) -> CliResult<()> {
            if v > 0 {
                Ok(())
            } else {
                Err(CliError::Usage(format!("--{name} must be at least 1")))
            }
        }
        if let Some(t) = self.threads {
            nonzero("threads", t)?;
        }
        match &self.command {
            Command::Synth(a) => {
                positive("dwell", a.dwell)?;
                positive("horizon", a.horizon)?;
                nonzero("budget", a.budget)?;
                nonzero("probes", a.probes)?;
                nonzero("pieces", a.pieces)?;
                nonzero("samples", a.samples)?;
                if !(a.shift >= 0.0 && a.shift.is_finite()) {
                    return Err(CliError::Usage(format!("--shift must be >= 0, got {}", a.shift)));
                }
                if a.degree == 0 {
                    return Err(CliError::Usage("--degree must be at least 1".into()));
                }
            }
            Command::Verify(a) => {
                nonzero("samples", a.samples)?;
                if !(a.strict_tol >= 0.0 && a.tolerance >= 0.0) {
                    return Err(CliError::Usage("tolerances must be >= 0".into()));
                }
            }
            Command::Critical(a) => {
                positive("alpha", a.alpha)?;
                positive("tol", a.tol)?;
                positive("horizon", a.horizon)?;
                if let Some(d) = a.dwell {
                    positive("dwell", d)?;
                }
            }
            Command::Scan(a) => {
                if a.epsilons.is_empty() || a.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
                    return Err(CliError::Usage("--epsilons must be a nonempty list of reals >= 0".into()));
                }
                positive("delta", a.delta)?;
                positive("bound", a.bound)?;
                positive("horizon", a.horizon)?;
                if a.dmax == 0 {
                    return Err(CliError::Usage("--dmax must be at least 1".into()));
                }
                nonzero("nmax", a.nmax)?;
                if let Some(s) = a.samples {
                    nonzero("samples", s)?;
                }
                if let Some(b) = a.budget {
                    nonzero("budget", b)?;
                }
            }
            Command::Render(a) => {
                positive("horizon", a.horizon)?;
                positive("dwell", a.dwell)?;
                if a.system.is_some() && a.trajectories > 0 && a.seed.is_none() {
                    return Err(CliError::Usage("--seed is required for trajectory overlays".into()));
                }
            }
        }
        Ok(())
    }
}

/// Validates `cfg`, executes it and writes its artifacts under `cfg.out`.
pub fn run(cfg: &RunConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(|source| CliError::Io {
        path: cfg.out.clone(),
        source,
    })?;
    let work = || match &cfg.command {
        Command::Synth(a) => synth(a, &cfg.out),
        Command::Verify(a) => verify(a, &cfg.out),
        Command::Critical(a) => critical(a, &cfg.out),
        Command::Scan(a) => scan(a, &cfg.out),
        Command::Render(a) => render(a, &cfg.out),
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

pub fn load_system(path: &Path) -> CliResult<MatrixSet> {
    Ok(MatrixSet::from_json(&read(path)?)?)
}

pub fn load_candidate(path: &Path) -> CliResult<CandidateFunction> {
    Ok(CandidateFunction::from_json(&read(path)?)?)
}

fn synth(a: &SynthArgs, out: &Path) -> CliResult<Outcome> {
    let set = load_system(&a.system)?;
    // Snap the horizon onto the dwell grid.
    let steps = (a.horizon / a.dwell).round().max(1.0) as usize;
    let norm_cfg = NormConfig {
        budget: a.budget,
        probes: a.probes,
        ..NormConfig::with_steps(a.dwell, steps)
    };
    let norm = if a.shift > 0.0 {
        strictify_via_shift(&set, a.shift, None, &norm_cfg)?
    } else {
        SampledNorm::build(&set, None, &norm_cfg)?
    };
    write(out, "norm.json", &norm.to_json())?;

    let w = synthesize_polyhedral(&norm, a.pieces)?;
    let (candidate, gauge) = match a.family {
        Family::Polyhedral => {
            let f = CandidateFunction::Polyhedral(w);
            (f.clone(), f)
        }
        Family::EvenPower => {
            let f = CandidateFunction::EvenPower(smooth_to_even_powers(&w, a.degree)?);
            (f.clone(), f)
        }
        Family::Polynomial => {
            let raw = swlyap::synth::EvenPowerSum::new(w.vectors.clone(), a.degree, false)?;
            let p = CandidateFunction::Polynomial(to_polynomial(&raw, 1_000_000)?);
            let root = CandidateFunction::Power {
                base: Box::new(p.clone()),
                exponent: 1.0 / (2 * a.degree) as f64,
            };
            (p, root)
        }
    };
    candidate.validate()?;
    write(out, "candidate.json", &candidate.to_json())?;

    let gap = uniform_gap(&norm, &gauge, a.samples)?;
    let mut csv = String::from("count,gap");
    for i in 0..gap.argmax.len() {
        let _ = write!(csv, ",argmax_x{}", i + 1);
    }
    let _ = write!(csv, "\n{},{:e}", a.pieces, gap.gap);
    for v in gap.argmax.iter() {
        let _ = write!(csv, ",{v:e}");
    }
    csv.push('\n');
    write(out, "gap.csv", &csv)?;
    Ok(Outcome::Ok)
}

fn verify(a: &VerifyArgs, out: &Path) -> CliResult<Outcome> {
    let set = load_system(&a.system)?;
    let f = load_candidate(&a.candidate)?;
    if let Some(n) = f.dim() {
        if n != set.dim() {
            return Err(swlyap::Error::Dimension(format!("candidate has n = {n}, system has n = {}", set.dim())).into());
        }
    }
    let tol = VerifyTolerance::new(a.strict_tol, a.tolerance)?;
    let report = match (&f, a.method) {
        (CandidateFunction::Polyhedral(w), VerifyMethod::Auto) if set.dim() == 2 => verify_polyhedral_2d(w, &set, &tol)?,
        (CandidateFunction::Polyhedral(w), VerifyMethod::Exact) => verify_polyhedral_2d(w, &set, &tol)?,
        (_, VerifyMethod::Exact) => {
            return Err(CliError::Usage("exact verification needs a planar polyhedral candidate".into()));
        }
        _ => verify_sampled(&f, &set, a.samples, &tol)?,
    };
    write(out, "report.json", &report.to_json())?;
    write(
        out,
        "report.csv",
        &format!("{}\n{}\n", VerificationReport::csv_header(set.dim()), report.csv_row()),
    )?;
    Ok(if report.verdict == Verdict::Violated {
        Outcome::Violated
    } else {
        Outcome::Ok
    })
}

fn critical(a: &CriticalArgs, out: &Path) -> CliResult<Outcome> {
    let pair = calibrate_critical(a.alpha, None, a.tol)?;
    write(out, "critical.json", &pair.to_json())?;
    let period = pair.period();
    let step = a.dwell.unwrap_or(period / 200.0);
    let traj = simulate(&periodic_law(&pair), &pair.modes(), &pair.x0, step, a.horizon * period)?;
    let mut csv = String::from("t,x1,x2,mode,norm\n");
    for ((t, x), m) in traj.times.iter().zip(&traj.states).zip(&traj.modes) {
        let _ = writeln!(csv, "{t:e},{:e},{:e},{m},{:e}", x[0], x[1], x.norm());
    }
    write(out, "trajectory.csv", &csv)?;
    Ok(Outcome::Ok)
}

fn load_pair(path: Option<&Path>) -> CliResult<CriticalPair> {
    match path {
        Some(p) => Ok(CriticalPair::from_json(&read(p)?)?),
        None => Ok(calibrate_critical(DEFAULT_ALPHA, None, 1e-8)?),
    }
}

fn scan(a: &ScanArgs, out: &Path) -> CliResult<Outcome> {
    let pair = load_pair(a.system.as_deref())?;
    let start = Instant::now();
    let (csv, statuses) = match a.kind {
        ScanKind::Degree => {
            let d = DegreeScanConfig::default();
            let cfg = DegreeScanConfig {
                d_max: a.dmax,
                delta: a.delta,
                bound: a.bound,
                samples: a.samples.unwrap_or(d.samples),
                pivot_budget: a.budget.unwrap_or(d.pivot_budget),
                ..d
            };
            let rows = min_degree_scan(&pair, &a.epsilons, &cfg)?;
            for r in &rows {
                if let Some(p) = &r.witness {
                    let f = CandidateFunction::Polynomial(p.clone());
                    write(out, &format!("witness_eps_{}.json", r.epsilon), &f.to_json())?;
                }
            }
            let mut csv = format!("{}\n", DegreeRow::CSV_HEADER);
            for r in &rows {
                let _ = writeln!(csv, "{}", r.csv_row());
            }
            (csv, rows.iter().map(|r| r.status).collect::<Vec<_>>())
        }
        ScanKind::Pieces => {
            let d = PiecesScanConfig::default();
            let cfg = PiecesScanConfig {
                n_max: a.nmax,
                horizon_periods: a.horizon,
                probes: a.samples.unwrap_or(d.probes),
                budget: a.budget.unwrap_or(d.budget),
                ..d
            };
            let rows = min_pieces_scan(&pair, &a.epsilons, &cfg)?;
            let mut csv = format!("{}\n", PiecesRow::CSV_HEADER);
            for r in &rows {
                let _ = writeln!(csv, "{}", r.csv_row());
            }
            (csv, rows.iter().map(|r| r.status).collect::<Vec<_>>())
        }
    };
    let name = match a.kind {
        ScanKind::Degree => "degree_scan",
        ScanKind::Pieces => "pieces_scan",
    };
    write(out, &format!("{name}.csv"), &csv)?;
    // Wall time lives outside the CSV so the table stays byte-reproducible.
    write(
        out,
        &format!("{name}.timing"),
        &format!("runtime_seconds={:.3}\n", start.elapsed().as_secs_f64()),
    )?;
    Ok(if statuses.contains(&ScanStatus::BudgetExceeded) {
        Outcome::BudgetExceeded
    } else {
        Outcome::Ok
    })
}

fn render(a: &RenderArgs, out: &Path) -> CliResult<Outcome> {
    let f = load_candidate(&a.candidate)?;
    if f.dim().is_some_and(|n| n != 2) {
        return Err(swlyap::Error::Dimension("render needs a planar candidate".into()).into());
    }
    let level = svg::level_set(&f, svg::LEVEL_SAMPLES)?;
    let mut overlays = Vec::new();
    if let Some(path) = &a.system {
        let set = load_system(path)?;
        if set.dim() != 2 {
            return Err(swlyap::Error::Dimension(format!("render needs a planar system, got n = {}", set.dim())).into());
        }
        let seed = a.seed.unwrap_or_default();
        for k in 0..a.trajectories {
            let mut r = rng::seeded_stream(seed, k as u64);
            let law = SwitchingLaw::random(&mut r, set.len(), a.horizon, 0.1 * a.dwell, a.dwell)?;
            // Start each overlay on the level set.
            let x0 = level[(k * level.len()) / a.trajectories.max(1) % level.len()].clone();
            let traj = simulate(&law, &set, &x0, a.horizon / 400.0, a.horizon)?;
            overlays.push(traj.states);
        }
    }
    write(out, "levelset.svg", &svg::document(&level, &overlays))?;
    Ok(Outcome::Ok)
}

/// Parses `points="x,y x,y …"` of every `<polyline>` with the given class.
pub fn polyline_points(svg: &str, class: &str) -> Vec<Vec<(f64, f64)>> {
    let marker = format!("class=\"{class}\"");
    svg.lines()
        .filter(|l| l.contains("<polyline") && l.contains(&marker))
        .filter_map(|l| {
            let start = l.find("points=\"")? + 8;
            let end = start + l[start..].find('"')?;
            Some(
                l[start..end]
                    .split_whitespace()
                    .filter_map(|p| {
                        let (x, y) = p.split_once(',')?;
                        Some((x.parse().ok()?, y.parse().ok()?))
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Radius of `{F = 1}` along the unit direction `u`.
pub fn level_radius(f: &dyn Candidate, u: &DVector<f64>) -> f64 {
    f.value(u).powf(-1.0 / f.homogeneity_degree())
}
