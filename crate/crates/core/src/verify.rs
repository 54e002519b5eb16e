//! Checks of the (non)strict common-Lyapunov inequality `lᵀMx ≤ −γ F(x)`
//! for `l ∈ ∂F(x)`: exact on 2D polytope vertices, sampled on the sphere
//! otherwise, and directly along simulated trajectories.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::synth::{sphere_sequence, Candidate, PolyhedralForm};
use crate::system::{MatrixSet, Trajectory};

/// Values of `F` below this are treated as the origin and skipped.
const VALUE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Strict,
    Nonstrict,
    Violated,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Strict => "strict",
            Verdict::Nonstrict => "nonstrict",
            Verdict::Violated => "violated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact2dVertices,
    SampledSphere,
    Trajectory,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact2dVertices => "exact-2d-vertices",
            Method::SampledSphere => "sampled-sphere",
            Method::Trajectory => "trajectory",
        }
    }
}

/// How a margin maps to a verdict.
///
/// `strict`: the margin must be positive and at least this.
/// `nonstrict`: margins down to `−nonstrict` still count as nonstrict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyTolerance {
    pub strict: f64,
    pub nonstrict: f64,
}

impl Default for VerifyTolerance {
    fn default() -> Self {
        Self {
            strict: 0.0,
            nonstrict: 1e-9,
        }
    }
}

impl VerifyTolerance {
    pub fn new(strict: f64, nonstrict: f64) -> Result<Self> {
        if !(strict >= 0.0 && nonstrict >= 0.0 && strict.is_finite() && nonstrict.is_finite()) {
            return Err(Error::NumericDomain(format!(
                "tolerances must be finite and >= 0, got {strict}, {nonstrict}"
            )));
        }
        Ok(Self { strict, nonstrict })
    }

    pub fn verdict(&self, margin: f64) -> Verdict {
        if margin > 0.0 && margin >= self.strict {
            Verdict::Strict
        } else if margin >= -self.nonstrict {
            Verdict::Nonstrict
        } else {
            Verdict::Violated
        }
    }
}

/// The check attaining the reported margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub mode: usize,
    pub covector: Vec<f64>,
    /// `lᵀMx` at the witness (for trajectories, the relative increase).
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    /// `min −lᵀMx / F(x)` over all checks.
    pub margin: f64,
    /// `min −lᵀMx / ‖x‖^α`, the Euclidean form of the same margin.
    pub euclidean_margin: f64,
    pub witness: Option<Witness>,
    pub method: Method,
    pub checks: usize,
    pub skipped: usize,
    /// False for sampled methods: their verdict is evidence only.
    pub certified: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn csv_header(n: usize) -> String {
        let mut h = String::from("verdict,gamma");
        for i in 0..n {
            h.push_str(&format!(",witness_x{}", i + 1));
        }
        h.push_str(",witness_mode,method");
        h
    }

    pub fn csv_row(&self) -> String {
        let mut row = format!("{},{:e}", self.verdict.as_str(), self.margin);
        if let Some(w) = &self.witness {
            for v in &w.point {
                row.push_str(&format!(",{v:e}"));
            }
            row.push_str(&format!(",{}", w.mode));
        } else {
            row.push(',');
        }
        row.push(',');
        row.push_str(self.method.as_str());
        row
    }
}

/// One elementary check: covector `l` at `x`, normalized by `value`.
struct Check {
    point: DVector<f64>,
    covector: DVector<f64>,
    value: f64,
    euclid: f64,
}

struct Tally {
    margin: f64,
    euclid_margin: f64,
    witness: Option<Witness>,
    checks: usize,
}

/// Fold checks in index order, keeping the first minimizer.
fn tally(checks: &[Check], set: &MatrixSet) -> Tally {
    let mut t = Tally {
        margin: f64::INFINITY,
        euclid_margin: f64::INFINITY,
        witness: None,
        checks: 0,
    };
    for c in checks {
        for (i, m) in set.matrices().enumerate() {
            let lmx = c.covector.dot(&(m * &c.point));
            t.checks += 1;
            let g = -lmx / c.value;
            t.euclid_margin = t.euclid_margin.min(-lmx / c.euclid);
            if g < t.margin {
                t.margin = g;
                t.witness = Some(Witness {
                    point: c.point.iter().copied().collect(),
                    mode: i,
                    covector: c.covector.iter().copied().collect(),
                    value: lmx,
                    time: None,
                });
            }
        }
    }
    t
}

/// Piece `piece` of a polyhedral form with sign `sign ∈ {−1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedPiece {
    pub piece: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallVertex {
    pub point: DVector<f64>,
    /// The two facets meeting here, in angular order.
    pub active: (SignedPiece, SignedPiece),
}

/// `{x : W(x) ≤ 1}` for a planar polyhedral `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeUnitBall {
    /// Signed facet covectors `±l_k`, indexed as `2k` (+) and `2k+1` (−).
    pub facets: Vec<DVector<f64>>,
    /// Vertices in increasing angle from the positive x₁ axis.
    pub vertices: Vec<BallVertex>,
    /// Pieces that are never the unique maximum.
    pub redundant: Vec<usize>,
}

impl PolytopeUnitBall {
    pub fn covector(&self, p: SignedPiece) -> &DVector<f64> {
        &self.facets[2 * p.piece + usize::from(p.sign < 0)]
    }
}

fn cross(o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Unit ball of `W` as the polar of `conv{±l_k}`: each hull edge `(a, b)`
/// gives the vertex solving `aᵀv = bᵀv = 1`.
pub fn unit_ball_2d(w: &PolyhedralForm) -> Result<PolytopeUnitBall> {
    if w.dim() != 2 {
        return Err(Error::Dimension(format!("unit_ball_2d needs n = 2, got {}", w.dim())));
    }
    let scale = w
        .vectors
        .iter()
        .map(|l| l[0].hypot(l[1]))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::DegenerateBall("all pieces vanish".into()));
    }
    let eps = 1e-13 * scale * scale;
    // (point, signed piece); sorted lexicographically for the monotone chain.
    let mut pts: Vec<([f64; 2], SignedPiece)> = Vec::with_capacity(2 * w.pieces());
    for (k, l) in w.vectors.iter().enumerate() {
        pts.push(([l[0], l[1]], SignedPiece { piece: k, sign: 1 }));
        pts.push(([-l[0], -l[1]], SignedPiece { piece: k, sign: -1 }));
    }
    pts.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.0[1].total_cmp(&b.0[1])));
    pts.dedup_by(|a, b| a.0 == b.0);

    let mut hull: Vec<([f64; 2], SignedPiece)> = Vec::with_capacity(pts.len() + 1);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &([f64; 2], SignedPiece)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2].0, &hull[hull.len() - 1].0, &p.0) <= eps
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    if hull.len() < 4 {
        return Err(Error::DegenerateBall(
            "pieces span a line only; W vanishes on a line".into(),
        ));
    }

    let mut vertices = Vec::with_capacity(hull.len());
    for i in 0..hull.len() {
        let (a, pa) = hull[i];
        let (b, pb) = hull[(i + 1) % hull.len()];
        let det = a[0] * b[1] - a[1] * b[0];
        if det.abs() <= eps {
            return Err(Error::DegenerateBall("hull edge through the origin".into()));
        }
        let v = DVector::from_column_slice(&[(b[1] - a[1]) / det, (a[0] - b[0]) / det]);
        vertices.push(BallVertex {
            point: v,
            active: (pa, pb),
        });
    }
    let angle = |v: &DVector<f64>| v[1].atan2(v[0]).rem_euclid(std::f64::consts::TAU);
    vertices.sort_by(|x, y| angle(&x.point).total_cmp(&angle(&y.point)));

    let mut on_hull = vec![false; w.pieces()];
    for (_, p) in &hull {
        on_hull[p.piece] = true;
    }
    let facets = w
        .vectors
        .iter()
        .flat_map(|l| {
            let v = DVector::from_column_slice(l);
            [v.clone(), -v]
        })
        .collect();
    Ok(PolytopeUnitBall {
        facets,
        vertices,
        redundant: (0..w.pieces()).filter(|k| !on_hull[*k]).collect(),
    })
}

/// Exact test for planar polyhedral `W`: the subdifferential at a vertex is
/// the segment between its two active covectors, so its endpoints suffice;
/// facet midpoints cover the smooth points.
pub fn verify_polyhedral_2d(
    w: &PolyhedralForm,
    set: &MatrixSet,
    tol: &VerifyTolerance,
) -> Result<VerificationReport> {
    if set.dim() != 2 {
        return Err(Error::Dimension(format!("system has n = {}, expected 2", set.dim())));
    }
    let ball = unit_ball_2d(w)?;
    let nv = ball.vertices.len();
    let mut checks = Vec::with_capacity(3 * nv);
    for (i, v) in ball.vertices.iter().enumerate() {
        let euclid = v.point.norm();
        for p in [v.active.0, v.active.1] {
            checks.push(Check {
                point: v.point.clone(),
                covector: ball.covector(p).clone(),
                value: 1.0,
                euclid,
            });
        }
        // The facet shared with the next vertex is the second active one here.
        let next = &ball.vertices[(i + 1) % nv];
        let mid = (&v.point + &next.point) * 0.5;
        let mid_norm = mid.norm();
        checks.push(Check {
            point: mid,
            covector: ball.covector(v.active.1).clone(),
            value: 1.0,
            euclid: mid_norm,
        });
    }
    let t = tally(&checks, set);
    Ok(VerificationReport {
        verdict: tol.verdict(t.margin),
        margin: t.margin,
        euclidean_margin: t.euclid_margin,
        witness: t.witness,
        method: Method::Exact2dVertices,
        checks: t.checks,
        skipped: 0,
        certified: true,
    })
}

/// Sampled test of `−∇F(x)ᵀMx ≥ γ F(x)` on `samples` sphere points, over
/// every active gradient. Scale-free for any homogeneity degree.
pub fn verify_sampled(
    f: &dyn Candidate,
    set: &MatrixSet,
    samples: usize,
    tol: &VerifyTolerance,
) -> Result<VerificationReport> {
    if let Some(n) = f.dim() {
        if n != set.dim() {
            return Err(Error::Dimension(format!(
                "candidate has n = {n}, system has n = {}",
                set.dim()
            )));
        }
    }
    if samples == 0 {
        return Err(Error::Contract("sample count must be >= 1".into()));
    }
    let alpha = f.homogeneity_degree();
    let points = sphere_sequence(set.dim(), samples);
    let per_point = par::map(&points, |x| {
        let value = f.value(x);
        let grads = f.active_gradients(x);
        if !(value > VALUE_FLOOR && value.is_finite())
            || grads.is_empty()
            || grads.iter().any(|g| g.iter().any(|v| !v.is_finite()))
        {
            return None;
        }
        let euclid = x.norm().powf(alpha);
        Some(
            grads
                .into_iter()
                .map(|g| Check {
                    point: x.clone(),
                    covector: g,
                    value,
                    euclid,
                })
                .collect::<Vec<_>>(),
        )
    });
    let skipped = per_point.iter().filter(|p| p.is_none()).count();
    let checks: Vec<Check> = per_point.into_iter().flatten().flatten().collect();
    let t = tally(&checks, set);
    Ok(VerificationReport {
        verdict: tol.verdict(t.margin),
        margin: t.margin,
        euclidean_margin: t.euclid_margin,
        witness: t.witness,
        method: Method::SampledSphere,
        checks: t.checks,
        skipped,
        certified: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Monotonicity {
    Monotone {
        initial: f64,
        final_value: f64,
        /// Largest `F(x_{k+1})/F(x_k) − 1` seen (≤ tol).
        max_relative_step: f64,
    },
    Violation {
        index: usize,
        time: f64,
        point: DVector<f64>,
        relative_increase: f64,
    },
}

impl Monotonicity {
    pub fn is_monotone(&self) -> bool {
        matches!(self, Monotonicity::Monotone { .. })
    }
}

/// Scans `F(x(t_k))`; the first step with `F(x_{k+1}) > (1 + tol) F(x_k)`
/// is reported.
pub fn check_monotone_along(f: &dyn Candidate, traj: &Trajectory, tol: f64) -> Monotonicity {
    let values: Vec<f64> = traj.states.iter().map(|x| f.value(x)).collect();
    let mut max_step = f64::NEG_INFINITY;
    for k in 0..values.len().saturating_sub(1) {
        let (a, b) = (values[k], values[k + 1]);
        if b > a + tol * a {
            return Monotonicity::Violation {
                index: k + 1,
                time: traj.times[k + 1],
                point: traj.states[k + 1].clone(),
                relative_increase: if a > 0.0 { b / a - 1.0 } else { f64::INFINITY },
            };
        }
        if a > 0.0 {
            max_step = max_step.max(b / a - 1.0);
        }
    }
    Monotonicity::Monotone {
        initial: values.first().copied().unwrap_or(0.0),
        final_value: values.last().copied().unwrap_or(0.0),
        max_relative_step: if max_step.is_finite() { max_step } else { 0.0 },
    }
}

/// `ν* = max lᵀMx + margin` over sampled `x` with `V(x) = 1`, active
/// `l ∈ ∂V(x)` and `M ∈ set`. Since `lᵀx = 1` there, every mode of
/// `set − ν*·Id` satisfies `lᵀ(M − ν*)x ≤ −margin` on those samples.
pub fn stabilizing_shift(v: &dyn Candidate, set: &MatrixSet, margin: f64, samples: usize) -> Result<f64> {
    if (v.homogeneity_degree() - 1.0).abs() > 1e-15 {
        return Err(Error::Contract("stabilizing_shift needs a degree-one function".into()));
    }
    if let Some(n) = v.dim() {
        if n != set.dim() {
            return Err(Error::Dimension(format!(
                "function has n = {n}, system has n = {}",
                set.dim()
            )));
        }
    }
    if samples == 0 {
        return Err(Error::Contract("sample count must be >= 1".into()));
    }
    let points = sphere_sequence(set.dim(), samples);
    let worst = par::map(&points, |s| {
        let value = v.value(s);
        if !(value > VALUE_FLOOR) {
            return Err(Error::Contract("function is not positive definite".into()));
        }
        let x = s / value;
        let mut best = f64::NEG_INFINITY;
        for l in v.active_gradients(&x) {
            for m in set.matrices() {
                best = best.max(l.dot(&(m * &x)));
            }
        }
        Ok(best)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(f64::NEG_INFINITY, f64::max) + margin)
}
