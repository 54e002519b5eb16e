//! Sampled LP feasibility of homogeneous even-degree polynomial certificates
//! and the minimum-degree / minimum-piece-count scans near the critical pair.
//!
//! Sampled infeasibility is evidence, not proof: the rows are necessary
//! conditions on the samples only. Feasible witnesses are re-checked against
//! every row outside the solver.

mod simplex;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::canonical::{strictify_via_shift, NormConfig};
use crate::critical::{epsilon_family, periodic_law, CriticalPair};
use crate::error::{Error, Result};
use crate::par;
use crate::synth::{sphere_sequence, synthesize_polyhedral};
use crate::system::{simulate, MatrixSet};
use crate::verify::{verify_polyhedral_2d, VerifyTolerance};

pub use crate::synth::{monomial_basis, monomial_count, MultiIndex, PolynomialForm};

/// Phase-1 residuals above this mean infeasible.
pub const INFEASIBLE_RESIDUAL: f64 = 1e-7;
/// Minimum slack a witness must keep on every (normalized) row.
pub const WITNESS_SLACK: f64 = -1e-9;
/// Nonzero right-hand sides are tightened by this (in normalized units)
/// before solving, so rounding in the tableau cannot push the witness over.
const TIGHTEN: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Positivity,
    Decrease,
    Other,
}

/// `coeffsᵀc ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub kind: RowKind,
}

/// Rows linear in the coefficient vector `c`, with the box `|c_j| ≤ bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityLP {
    pub rows: Vec<LpRow>,
    pub vars: usize,
    pub bound: f64,
    /// Monomials the variables stand for (empty for hand-built LPs).
    pub basis: Vec<MultiIndex>,
    pub n: usize,
    pub samples: usize,
    pub delta: f64,
    pub pivot_budget: usize,
}

pub const DEFAULT_PIVOT_BUDGET: usize = 200_000;

impl FeasibilityLP {
    pub fn from_rows(vars: usize, rows: Vec<LpRow>, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::Contract(format!("coefficient bound {bound} must be > 0")));
        }
        if rows.iter().any(|r| r.coeffs.len() != vars) {
            return Err(Error::Dimension("row length differs from variable count".into()));
        }
        if rows.iter().any(|r| !r.rhs.is_finite() || r.coeffs.iter().any(|v| !v.is_finite())) {
            return Err(Error::NumericDomain("non-finite LP entry".into()));
        }
        Ok(Self {
            rows,
            vars,
            bound,
            basis: Vec::new(),
            n: 0,
            samples: 0,
            delta: 0.0,
            pivot_budget: DEFAULT_PIVOT_BUDGET,
        })
    }

    pub fn count(&self, kind: RowKind) -> usize {
        self.rows.iter().filter(|r| r.kind == kind).count()
    }

    /// Smallest normalized slack `(rhs − aᵀc)/max|a|` over all rows,
    /// including the box.
    pub fn min_slack(&self, c: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| {
            let scale = r.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let ac: f64 = r.coeffs.iter().zip(c).map(|(a, x)| a * x).sum();
            if r.coeffs.iter().all(|v| *v == 0.0) {
                r.rhs
            } else {
                (r.rhs - ac) / scale
            }
        });
        let boxed = c.iter().map(|x| self.bound - x.abs());
        rows.chain(boxed).fold(f64::INFINITY, f64::min)
    }
}

/// Rows `p_c(x_s) ≥ positivity` and `∇p_c(x_s)ᵀM x_s ≤ −δ` for every sphere
/// sample and mode, over homogeneous polynomials of degree `degree`.
pub fn build_feasibility_lp(
    set: &MatrixSet,
    degree: u32,
    samples: usize,
    delta: f64,
    bound: f64,
    positivity: f64,
) -> Result<FeasibilityLP> {
    if degree == 0 || degree % 2 != 0 {
        return Err(Error::Contract(format!("degree {degree} must be even and >= 2")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Contract(format!("delta {delta} must be >= 0")));
    }
    if samples == 0 {
        return Err(Error::Contract("sample count must be >= 1".into()));
    }
    let n = set.dim();
    let basis = monomial_basis(n, degree);
    let points = sphere_sequence(n, samples);
    let mut rows = Vec::with_capacity(samples * (1 + set.len()));
    for x in &points {
        rows.push(LpRow {
            coeffs: basis.iter().map(|a| -a.eval(x)).collect(),
            rhs: -positivity,
            kind: RowKind::Positivity,
        });
    }
    for m in set.matrices() {
        for x in &points {
            let f = m * x;
            rows.push(LpRow {
                coeffs: basis
                    .iter()
                    .map(|a| (0..n).map(|i| a.partial(x, i) * f[i]).sum())
                    .collect(),
                rhs: -delta,
                kind: RowKind::Decrease,
            });
        }
    }
    let mut lp = FeasibilityLP::from_rows(basis.len(), rows, bound)?;
    lp.basis = basis;
    lp.n = n;
    lp.samples = samples;
    lp.delta = delta;
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Feasible,
    Infeasible,
    BudgetExceeded,
    /// Phase 1 reached zero but the witness failed the independent re-check.
    NumericFailure,
}

impl LpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            LpStatus::Feasible => "feasible",
            LpStatus::Infeasible => "infeasible",
            LpStatus::BudgetExceeded => "budget-exceeded",
            LpStatus::NumericFailure => "numeric-failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOutcome {
    pub status: LpStatus,
    pub residual: f64,
    pub pivots: usize,
    /// Coefficients, present when feasible.
    pub witness: Option<Vec<f64>>,
    /// Minimum normalized slack of the witness.
    pub witness_slack: Option<f64>,
}

impl FeasibilityOutcome {
    pub fn polynomial(&self, lp: &FeasibilityLP) -> Option<PolynomialForm> {
        let c = self.witness.as_ref()?;
        if lp.basis.is_empty() {
            return None;
        }
        Some(PolynomialForm::from_coefficients(lp.n, &lp.basis, c))
    }
}

/// Phase-1 simplex over `c = c⁺ − c⁻`, `0 ≤ c± ≤ bound`.
pub fn solve_lp(lp: &FeasibilityLP) -> FeasibilityOutcome {
    let mut pivots_total = 0;
    for tighten in [TIGHTEN, 100.0 * TIGHTEN] {
        let (a, b) = standard_rows(lp, tighten);
        match simplex::phase_one(&a, &b, lp.pivot_budget.saturating_sub(pivots_total)) {
            simplex::PhaseOne::BudgetExceeded { residual, pivots } => {
                return FeasibilityOutcome {
                    status: LpStatus::BudgetExceeded,
                    residual,
                    pivots: pivots_total + pivots,
                    witness: None,
                    witness_slack: None,
                }
            }
            simplex::PhaseOne::Done { residual, y, pivots } => {
                pivots_total += pivots;
                if residual > INFEASIBLE_RESIDUAL {
                    return FeasibilityOutcome {
                        status: LpStatus::Infeasible,
                        residual,
                        pivots: pivots_total,
                        witness: None,
                        witness_slack: None,
                    };
                }
                let c: Vec<f64> = (0..lp.vars).map(|j| y[j] - y[lp.vars + j]).collect();
                let slack = lp.min_slack(&c);
                if slack >= WITNESS_SLACK {
                    return FeasibilityOutcome {
                        status: LpStatus::Feasible,
                        residual,
                        pivots: pivots_total,
                        witness: Some(c),
                        witness_slack: Some(slack),
                    };
                }
            }
        }
    }
    FeasibilityOutcome {
        status: LpStatus::NumericFailure,
        residual: 0.0,
        pivots: pivots_total,
        witness: None,
        witness_slack: None,
    }
}

/// Rows over `y = (c⁺, c⁻)` scaled to unit max-norm, box included.
fn standard_rows(lp: &FeasibilityLP, tighten: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = lp.vars;
    let mut a = Vec::with_capacity(lp.rows.len() + 2 * p);
    let mut b = Vec::with_capacity(lp.rows.len() + 2 * p);
    for r in &lp.rows {
        let scale = r.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            // 0 ≤ rhs: either vacuous or unsatisfiable by any c.
            a.push(vec![0.0; 2 * p]);
            b.push(r.rhs.min(0.0) - if r.rhs < 0.0 { tighten } else { 0.0 });
            continue;
        }
        let mut row = Vec::with_capacity(2 * p);
        row.extend(r.coeffs.iter().map(|v| v / scale));
        row.extend(r.coeffs.iter().map(|v| -v / scale));
        a.push(row);
        // Homogeneous rows stay as they are: tightening them would turn a
        // nonstrict condition into a strict one.
        b.push(r.rhs / scale - if r.rhs != 0.0 { tighten } else { 0.0 });
    }
    for j in 0..2 * p {
        let mut row = vec![0.0; 2 * p];
        row[j] = 1.0;
        a.push(row);
        b.push(lp.bound * (1.0 - tighten));
    }
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeScanConfig {
    /// Largest half-degree `d` tried (degree `2d`).
    pub d_max: u32,
    pub delta: f64,
    pub bound: f64,
    pub samples: usize,
    pub pivot_budget: usize,
    /// Times a monotonicity violation may be re-run at doubled samples.
    pub max_doublings: u32,
    /// Re-solve every infeasible cell at doubled samples and abort on a flip.
    pub confirm_infeasible: bool,
}

impl Default for DegreeScanConfig {
    fn default() -> Self {
        Self {
            d_max: 10,
            delta: 1e-3,
            bound: 1e6,
            samples: 128,
            pivot_budget: DEFAULT_PIVOT_BUDGET,
            max_doublings: 3,
            confirm_infeasible: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanStatus {
    Ok,
    /// No certificate up to the cap; the value is ∞.
    Unbounded,
    /// A budget was hit below the reported value, which is then a lower bound.
    BudgetExceeded,
    /// Still out of order after all re-runs.
    Nonmonotone,
}

impl ScanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanStatus::Ok => "ok",
            ScanStatus::Unbounded => "unbounded",
            ScanStatus::BudgetExceeded => "budget-exceeded",
            ScanStatus::Nonmonotone => "nonmonotone",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeRow {
    pub epsilon: f64,
    /// Smallest half-degree with a feasible LP; `None` is ∞.
    pub d_min: Option<u32>,
    pub status: ScanStatus,
    pub samples: usize,
    pub delta: f64,
    pub bound: f64,
    /// Pivots summed over every LP solved for this row.
    pub pivots: usize,
    pub witness: Option<PolynomialForm>,
}

impl DegreeRow {
    pub const CSV_HEADER: &'static str = "epsilon,d_min,degree,status,samples,delta,B,pivots";

    pub fn csv_row(&self) -> String {
        let (d, deg) = match self.d_min {
            Some(d) => (d.to_string(), (2 * d).to_string()),
            None => ("inf".to_string(), "inf".to_string()),
        };
        format!(
            "{},{},{},{},{},{:e},{:e},{}",
            self.epsilon,
            d,
            deg,
            self.status.as_str(),
            self.samples,
            self.delta,
            self.bound,
            self.pivots
        )
    }
}

fn check_eps(eps: &[f64]) -> Result<()> {
    if eps.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::Contract("epsilons must be finite and >= 0".into()));
    }
    if eps.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Contract("epsilons must be sorted decreasing".into()));
    }
    Ok(())
}

fn degree_cell(set: &MatrixSet, d: u32, samples: usize, cfg: &DegreeScanConfig) -> Result<(FeasibilityOutcome, FeasibilityLP)> {
    let mut lp = build_feasibility_lp(set, 2 * d, samples, cfg.delta, cfg.bound, 1.0)?;
    lp.pivot_budget = cfg.pivot_budget;
    Ok((solve_lp(&lp), lp))
}

fn degree_row(pair: &CriticalPair, eps: f64, samples: usize, cfg: &DegreeScanConfig) -> Result<DegreeRow> {
    let set = epsilon_family(pair, eps)?;
    let mut pivots = 0;
    let mut budget_hit = false;
    for d in 1..=cfg.d_max {
        let (out, lp) = degree_cell(&set, d, samples, cfg)?;
        pivots += out.pivots;
        match out.status {
            LpStatus::Feasible => {
                return Ok(DegreeRow {
                    epsilon: eps,
                    d_min: Some(d),
                    status: if budget_hit { ScanStatus::BudgetExceeded } else { ScanStatus::Ok },
                    samples,
                    delta: cfg.delta,
                    bound: cfg.bound,
                    pivots,
                    witness: out.polynomial(&lp),
                })
            }
            LpStatus::Infeasible => {
                if cfg.confirm_infeasible {
                    let (again, _) = degree_cell(&set, d, 2 * samples, cfg)?;
                    pivots += again.pivots;
                    if again.status == LpStatus::Feasible {
                        return Err(Error::InconsistentScan(format!(
                            "epsilon {eps}, degree {}: infeasible at {samples} samples but feasible at {} \
                             (residual {:e}, pivots {} / {})",
                            2 * d,
                            2 * samples,
                            out.residual,
                            out.pivots,
                            again.pivots
                        )));
                    }
                }
            }
            LpStatus::BudgetExceeded | LpStatus::NumericFailure => budget_hit = true,
        }
    }
    Ok(DegreeRow {
        epsilon: eps,
        d_min: None,
        status: if budget_hit { ScanStatus::BudgetExceeded } else { ScanStatus::Unbounded },
        samples,
        delta: cfg.delta,
        bound: cfg.bound,
        pivots,
        witness: None,
    })
}

fn rank<T: Ord + Copy>(v: Option<T>) -> (bool, Option<T>) {
    (v.is_none(), v)
}

/// Indices `i` whose value is below the one before (ε sorted decreasing).
fn order_violations<T: Ord + Copy>(values: &[Option<T>]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut running = None;
    for (i, v) in values.iter().enumerate() {
        match running {
            Some(r) if rank(*v) < rank(r) => out.push(i),
            _ => running = Some(*v),
        }
    }
    out
}

/// For each `ε`, the smallest `d ≤ d_max` whose LP for `𝓜^ε` is feasible.
/// Entries breaking monotonicity are re-run at doubled sample counts.
pub fn min_degree_scan(pair: &CriticalPair, eps: &[f64], cfg: &DegreeScanConfig) -> Result<Vec<DegreeRow>> {
    check_eps(eps)?;
    let mut rows = par::map(eps, |e| degree_row(pair, *e, cfg.samples, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for _ in 0..cfg.max_doublings {
        let bad = order_violations(&rows.iter().map(|r| r.d_min).collect::<Vec<_>>());
        if bad.is_empty() {
            break;
        }
        let redo = par::map(&bad, |&i| degree_row(pair, rows[i].epsilon, 2 * rows[i].samples, cfg))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        for (i, row) in bad.into_iter().zip(redo) {
            rows[i] = row;
        }
    }
    for i in order_violations(&rows.iter().map(|r| r.d_min).collect::<Vec<_>>()) {
        rows[i].status = ScanStatus::Nonmonotone;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecesScanConfig {
    /// Piece counts tried: `n_start, 2·n_start, …` up to `n_max`.
    pub n_start: usize,
    pub n_max: usize,
    /// Dwell grid `t₁ / dwell_divisor`.
    pub dwell_divisor: usize,
    /// Generator horizon in periods.
    pub horizon_periods: f64,
    pub probes: usize,
    /// The norm is built for `𝓜^ε + shift_fraction·ε·Id`.
    pub shift_fraction: f64,
    pub strict_tol: f64,
    pub budget: usize,
    pub max_doublings: u32,
}

impl Default for PiecesScanConfig {
    fn default() -> Self {
        Self {
            n_start: 4,
            n_max: 1024,
            dwell_divisor: 64,
            horizon_periods: 4.0,
            probes: 256,
            shift_fraction: 0.5,
            strict_tol: 1e-9,
            budget: 20_000,
            max_doublings: 2,
        }
    }
}

impl PiecesScanConfig {
    pub fn norm_config(&self, pair: &CriticalPair, probes: usize) -> NormConfig {
        let dwell = pair.t1 / self.dwell_divisor as f64;
        let steps = (self.horizon_periods * pair.period() / dwell).ceil() as usize;
        let mut cfg = NormConfig::with_steps(dwell, steps);
        cfg.probes = probes;
        cfg.budget = self.budget;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecesRow {
    pub epsilon: f64,
    pub n_min: Option<usize>,
    pub status: ScanStatus,
    pub probes: usize,
    /// Exact margin at `n_min`, or the best margin seen when unbounded.
    pub margin: f64,
}

impl PiecesRow {
    pub const CSV_HEADER: &'static str = "epsilon,N_min,status,probes,margin";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e}",
            self.epsilon,
            self.n_min.map_or("inf".to_string(), |n| n.to_string()),
            self.status.as_str(),
            self.probes,
            self.margin
        )
    }
}

/// Exact 2D margins of `W_N` for `N = n_start, 2·n_start, … ≤ n_max`.
pub fn piece_margins(pair: &CriticalPair, eps: f64, probes: usize, cfg: &PiecesScanConfig) -> Result<Vec<(usize, f64)>> {
    let set = epsilon_family(pair, eps)?;
    let norm = strictify_via_shift(&set, cfg.shift_fraction * eps, None, &cfg.norm_config(pair, probes))?;
    let tol = VerifyTolerance::new(cfg.strict_tol, 0.0)?;
    let mut counts = Vec::new();
    let mut n = cfg.n_start.max(1);
    while n <= cfg.n_max {
        counts.push(n);
        n *= 2;
    }
    par::map(&counts, |&n| {
        let w = synthesize_polyhedral(&norm, n)?;
        let rep = verify_polyhedral_2d(&w, &set, &tol)?;
        Ok((n, rep.margin))
    })
    .into_iter()
    .collect()
}

fn pieces_row(pair: &CriticalPair, eps: f64, probes: usize, cfg: &PiecesScanConfig) -> Result<PiecesRow> {
    let margins = piece_margins(pair, eps, probes, cfg)?;
    let tol = VerifyTolerance::new(cfg.strict_tol, 0.0)?;
    let hit = margins
        .iter()
        .find(|(_, m)| tol.verdict(*m) == crate::verify::Verdict::Strict);
    Ok(match hit {
        Some(&(n, m)) => PiecesRow {
            epsilon: eps,
            n_min: Some(n),
            status: ScanStatus::Ok,
            probes,
            margin: m,
        },
        None => PiecesRow {
            epsilon: eps,
            n_min: None,
            status: ScanStatus::Unbounded,
            probes,
            margin: margins.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        },
    })
}

/// For each `ε`, the smallest tried `N` whose synthesized `W_N` passes the
/// exact 2D check strictly for `𝓜^ε`. Out-of-order entries are re-run with
/// doubled probe counts.
pub fn min_pieces_scan(pair: &CriticalPair, eps: &[f64], cfg: &PiecesScanConfig) -> Result<Vec<PiecesRow>> {
    check_eps(eps)?;
    let mut rows = par::map(eps, |e| pieces_row(pair, *e, cfg.probes, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for _ in 0..cfg.max_doublings {
        let bad = order_violations(&rows.iter().map(|r| r.n_min).collect::<Vec<_>>());
        if bad.is_empty() {
            break;
        }
        for i in bad {
            rows[i] = pieces_row(pair, rows[i].epsilon, 2 * rows[i].probes, cfg)?;
        }
    }
    for i in order_violations(&rows.iter().map(|r| r.n_min).collect::<Vec<_>>()) {
        rows[i].status = ScanStatus::Nonmonotone;
    }
    Ok(rows)
}

/// `max |p(x(t)) − p(x₀)| / max(1, |p(x₀)|)` along two periods of the
/// critical orbit, sampled every `step`.
pub fn constancy_probe(p: &PolynomialForm, pair: &CriticalPair, step: f64) -> Result<f64> {
    if p.n != 2 {
        return Err(Error::Dimension(format!("polynomial has n = {}, expected 2", p.n)));
    }
    let traj = simulate(&periodic_law(pair), &pair.modes(), &pair.x0, step, 2.0 * pair.period())?;
    let p0 = p.eval(&pair.x0);
    let scale = p0.abs().max(1.0);
    Ok(traj
        .states
        .iter()
        .map(|x: &DVector<f64>| (p.eval(x) - p0).abs() / scale)
        .fold(0.0, f64::max))
}
