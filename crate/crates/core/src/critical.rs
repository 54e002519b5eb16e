//! The marginal planar pair: two clockwise spirals `M₁` and `M₂ = D M₁ D⁻¹`
//! whose worst-case two-segment period map has spectral radius exactly one,
//! with eigenvalue −1 (so the extremal orbit closes after two periods and
//! four switches). Also its `ε`-shifted family and `n > 2` embedding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::canonical::{NormConfig, SampledNorm};
use crate::error::{Error, Result};
use crate::par;
use crate::system::{embed_block, expm_scaled, linalg, shift_set, so_ball_sample, MatrixSet, SwitchingLaw};
use crate::verify::stabilizing_shift;

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_T_MAX: f64 = std::f64::consts::PI;
pub const DEFAULT_GRID: usize = 64;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParameter {
    /// Anisotropy of the second mode.
    pub k: f64,
    /// Spiral contraction rate.
    pub alpha: f64,
}

impl FamilyParameter {
    pub fn new(k: f64, alpha: f64) -> Result<Self> {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::Contract(format!("k = {k} must be >= 1")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Contract(format!("alpha = {alpha} must be > 0")));
        }
        Ok(Self { k, alpha })
    }
}

/// `M₁ = [[−α, 1], [−1, −α]]` and `M₂ = D M₁ D⁻¹`, `D = diag(k, 1/k)`.
pub fn make_pair(p: &FamilyParameter) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = p.alpha;
    let k2 = p.k * p.k;
    let m1 = DMatrix::from_row_slice(2, 2, &[-a, 1.0, -1.0, -a]);
    let m2 = DMatrix::from_row_slice(2, 2, &[-a, k2, -1.0 / k2, -a]);
    (m1, m2)
}

/// `x₁ẋ₂ − x₂ẋ₁` for `ẋ = Mx`; negative means clockwise.
pub fn angular_velocity(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let dx = m * x;
    x[0] * dx[1] - x[1] * dx[0]
}

/// The period map `Φ(t₁ + t₂) = e^{t₂M₂} e^{t₁M₁}` (mode 1 acts first).
pub fn period_map(m1: &DMatrix<f64>, m2: &DMatrix<f64>, t1: f64, t2: f64) -> Result<DMatrix<f64>> {
    Ok(expm_scaled(m2, t2)? * expm_scaled(m1, t1)?)
}

fn product_radius(m1: &DMatrix<f64>, m2: &DMatrix<f64>, t1: f64, t2: f64) -> f64 {
    period_map(m1, m2, t1, t2).map_or(f64::NAN, |p| linalg::spectral_radius(&p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub t1: f64,
    pub t2: f64,
    pub rho: f64,
    /// The maximizer touches the edge of `[t_max/grid, t_max]²`.
    pub boundary: bool,
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - GOLDEN * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + GOLDEN * (hi - lo);
            fb = f(b);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    // Keep the best point seen so the result never drops below a probe.
    [(x, fx), (a, fa), (b, fb)]
        .into_iter()
        .fold((x, fx), |best, c| if c.1 > best.1 { c } else { best })
}

/// Maximizes `ρ(e^{t₂M₂}e^{t₁M₁})` over the grid `(t_max·i/grid)`, then
/// refines by coordinate-wise golden-section ascent.
pub fn worst_case_product(m1: &DMatrix<f64>, m2: &DMatrix<f64>, t_max: f64, grid: usize) -> Result<WorstCase> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Contract(format!("t_max = {t_max} must be > 0")));
    }
    if grid < 16 {
        return Err(Error::Contract(format!("grid = {grid} must be >= 16")));
    }
    let step = t_max / grid as f64;
    let ts: Vec<f64> = (1..=grid).map(|i| step * i as f64).collect();
    let values = par::map_range(grid * grid, |c| product_radius(m1, m2, ts[c / grid], ts[c % grid]));
    let mut best = 0;
    for (c, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = c;
        }
    }
    if !values[best].is_finite() {
        return Err(Error::NumericDomain("non-finite product radius on the dwell grid".into()));
    }
    let (lo, hi) = (step, t_max);
    let (mut t1, mut t2, mut rho) = (ts[best / grid], ts[best % grid], values[best]);
    for _ in 0..500 {
        let (p1, p2) = (t1, t2);
        let r1 = golden_max(|s| product_radius(m1, m2, s, t2), (t1 - step).max(lo), (t1 + step).min(hi), 1e-13);
        if r1.1 >= rho {
            (t1, rho) = r1;
        }
        let r2 = golden_max(|s| product_radius(m1, m2, t1, s), (t2 - step).max(lo), (t2 + step).min(hi), 1e-13);
        if r2.1 >= rho {
            (t2, rho) = r2;
        }
        if (t1 - p1).abs().max((t2 - p2).abs()) < 1e-11 {
            break;
        }
    }
    let edge = |t: f64| t - lo < 1e-9 || hi - t < 1e-9;
    Ok(WorstCase {
        t1,
        t2,
        rho,
        boundary: edge(t1) || edge(t2),
    })
}

fn worst_at(k: f64, alpha: f64) -> Result<WorstCase> {
    let (m1, m2) = make_pair(&FamilyParameter::new(k, alpha)?);
    worst_case_product(&m1, &m2, DEFAULT_T_MAX, DEFAULT_GRID)
}

/// Doubles `k` from one until the worst-case radius exceeds one.
pub fn find_bracket(alpha: f64) -> Result<(f64, f64)> {
    let mut lo = 1.0;
    let rho_lo = worst_at(lo, alpha)?.rho;
    if rho_lo >= 1.0 {
        return Err(Error::Bracket { lo, hi: lo, rho_lo, rho_hi: rho_lo });
    }
    let mut hi = 2.0;
    for _ in 0..30 {
        let r = worst_at(hi, alpha)?.rho;
        if r > 1.0 {
            return Ok((lo, hi));
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::Bracket { lo: 1.0, hi, rho_lo, rho_hi: worst_at(hi, alpha)?.rho })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPair {
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub t1: f64,
    pub t2: f64,
    /// Unit eigenvector of the period map for the eigenvalue near −1.
    pub x0: DVector<f64>,
    pub rho: f64,
    pub eigenvalue: f64,
    pub alpha: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CriticalPairDoc {
    m1: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
    t1: f64,
    t2: f64,
    x0: Vec<f64>,
    rho: f64,
    #[serde(default)]
    eigenvalue: Option<f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    k: Option<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if r.len() != 2 || r.iter().any(|row| row.len() != 2) {
        return Err(Error::Dimension("critical pair matrices must be 2x2".into()));
    }
    Ok(DMatrix::from_fn(2, 2, |i, j| r[i][j]))
}

impl CriticalPair {
    pub fn period(&self) -> f64 {
        self.t1 + self.t2
    }

    pub fn modes(&self) -> MatrixSet {
        MatrixSet::from_matrices(vec![self.m1.clone(), self.m2.clone()]).expect("pair modes are valid")
    }

    pub fn period_map(&self) -> DMatrix<f64> {
        period_map(&self.m1, &self.m2, self.t1, self.t2).expect("calibrated pair is finite")
    }

    pub fn to_json(&self) -> String {
        let doc = CriticalPairDoc {
            m1: rows(&self.m1),
            m2: rows(&self.m2),
            t1: self.t1,
            t2: self.t2,
            x0: self.x0.iter().copied().collect(),
            rho: self.rho,
            eigenvalue: Some(self.eigenvalue),
            alpha: Some(self.alpha),
            k: Some(self.k),
        };
        serde_json::to_string_pretty(&doc).expect("pair serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: CriticalPairDoc = serde_json::from_str(s)?;
        let m1 = from_rows(&d.m1)?;
        let m2 = from_rows(&d.m2)?;
        if d.x0.len() != 2 {
            return Err(Error::Dimension("x0 must have two entries".into()));
        }
        let scalars = [d.t1, d.t2, d.rho];
        if m1.iter().chain(m2.iter()).chain(&d.x0).chain(&scalars).any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("non-finite entry in critical pair".into()));
        }
        if !(d.t1 > 0.0 && d.t2 > 0.0) {
            return Err(Error::InvalidLaw("dwell times must be positive".into()));
        }
        if !(linalg::is_hurwitz(&m1) && linalg::is_hurwitz(&m2)) {
            return Err(Error::Contract("critical pair modes must be Hurwitz".into()));
        }
        let eigenvalue = match d.eigenvalue {
            Some(e) => e,
            None => nearest_to_minus_one(&period_map(&m1, &m2, d.t1, d.t2)?).0,
        };
        Ok(Self {
            alpha: d.alpha.unwrap_or(-0.5 * (m1[(0, 0)] + m1[(1, 1)])),
            k: d.k.unwrap_or(f64::NAN),
            m1,
            m2,
            t1: d.t1,
            t2: d.t2,
            x0: DVector::from_vec(d.x0),
            rho: d.rho,
            eigenvalue,
        })
    }
}

/// Real eigenvalue of a 2x2 matrix closest to −1 and its unit eigenvector
/// (first nonzero component positive). Complex pairs yield NaN.
fn nearest_to_minus_one(p: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let (re, im) = linalg::eigenvalues_2x2(p);
    if im[0] != 0.0 {
        return (f64::NAN, DVector::zeros(2));
    }
    let lambda = if (re[0] + 1.0).abs() <= (re[1] + 1.0).abs() { re[0] } else { re[1] };
    let (a, b, c, d) = (p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)]);
    let u = DVector::from_column_slice(&[b, lambda - a]);
    let w = DVector::from_column_slice(&[lambda - d, c]);
    let mut v = if u.norm() >= w.norm() { u } else { w };
    v /= v.norm();
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = -v;
    }
    (lambda, v)
}

/// Bisection on `k` until the worst-case radius is within `tol` of one,
/// then extraction of the −1 eigenvector of the period map.
pub fn calibrate_critical(alpha: f64, bracket: Option<(f64, f64)>, tol: f64) -> Result<CriticalPair> {
    if !(tol > 0.0) {
        return Err(Error::Contract(format!("tolerance {tol} must be > 0")));
    }
    let (mut lo, mut hi) = match bracket {
        Some(b) => b,
        None => find_bracket(alpha)?,
    };
    let (w_lo, w_hi) = (worst_at(lo, alpha)?, worst_at(hi, alpha)?);
    if !(w_lo.rho < 1.0 && w_hi.rho > 1.0) {
        return Err(Error::Bracket { lo, hi, rho_lo: w_lo.rho, rho_hi: w_hi.rho });
    }
    // Bisect well past `tol` so the eigenvector check has headroom.
    let target = 0.01 * tol;
    let mut best = (hi, w_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let w = worst_at(mid, alpha)?;
        if (w.rho - 1.0).abs() < (best.1.rho - 1.0).abs() {
            best = (mid, w);
        }
        if w.rho > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (w.rho - 1.0).abs() <= target || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let (k, w) = best;
    if (w.rho - 1.0).abs() > tol {
        return Err(Error::Bracket { lo, hi, rho_lo: w_lo.rho, rho_hi: w.rho });
    }
    let p = FamilyParameter::new(k, alpha)?;
    let (m1, m2) = make_pair(&p);
    let phi = period_map(&m1, &m2, w.t1, w.t2)?;
    let (lambda, x0) = nearest_to_minus_one(&phi);
    if !((lambda + 1.0).abs() <= tol) {
        let dominant = linalg::eigenvalue_real_parts(&phi)
            .into_iter()
            .fold(f64::NAN, |a: f64, b| if a.is_nan() || b.abs() > a.abs() { b } else { a });
        return Err(Error::WrongBranch { eigenvalue: if lambda.is_nan() { dominant } else { lambda } });
    }
    Ok(CriticalPair {
        m1,
        m2,
        t1: w.t1,
        t2: w.t2,
        x0,
        rho: w.rho,
        eigenvalue: lambda,
        alpha,
        k,
    })
}

/// `{M₁ − εId, M₂ − εId}`.
pub fn epsilon_family(pair: &CriticalPair, eps: f64) -> Result<MatrixSet> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::NumericDomain(format!("epsilon = {eps} must be >= 0")));
    }
    Ok(shift_set(&pair.modes(), eps))
}

/// Mode 0 for `t₁`, then mode 1 for `t₂`, repeated.
pub fn periodic_law(pair: &CriticalPair) -> SwitchingLaw {
    SwitchingLaw::new(vec![(pair.t1, 0), (pair.t2, 1)], true).expect("calibrated dwell times are positive")
}

/// Knobs for the `n > 2` construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedConfig {
    pub norm: NormConfig,
    /// Sphere samples used to compute the shift.
    pub shift_samples: usize,
    pub seed: u64,
}

impl EmbedConfig {
    /// Dwell `t₁/32`, horizon about four periods, 1024 probes.
    pub fn for_pair(pair: &CriticalPair) -> Self {
        let dwell = pair.t1 / 32.0;
        let steps = (4.0 * pair.period() / dwell).ceil() as usize;
        let mut norm = NormConfig::with_steps(dwell, steps);
        norm.probes = 1024;
        Self {
            norm,
            shift_samples: 4096,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddedCritical {
    /// `𝓜₁ ∪ 𝓜₂^ν`.
    pub set: MatrixSet,
    /// The block-embedded pair `𝓜₁`.
    pub embedded: MatrixSet,
    /// The unshifted so(n) sample.
    pub rotations: MatrixSet,
    pub nu: f64,
    /// Canonical norm of `𝓜₁` the shift was computed against.
    pub norm: SampledNorm,
}

/// Block-embeds the pair, samples `rotation_count` skew matrices and shifts
/// them by `ν = stabilizing_shift(V̂(𝓜₁), so-sample, margin)`.
pub fn embed_critical_nd(
    pair: &CriticalPair,
    n: usize,
    rotation_count: usize,
    margin: f64,
    cfg: &EmbedConfig,
) -> Result<EmbeddedCritical> {
    let embedded = embed_block(&pair.modes(), n)?;
    let rotations = so_ball_sample(n, rotation_count, cfg.seed)?;
    let norm = SampledNorm::build(&embedded, None, &cfg.norm)?;
    let nu = stabilizing_shift(&norm, &rotations, margin, cfg.shift_samples)?;
    let set = embedded.union(&shift_set(&rotations, nu))?;
    Ok(EmbeddedCritical {
        set,
        embedded,
        rotations,
        nu,
        norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_structure() {
        let (m1, m2) = make_pair(&FamilyParameter::new(2.0, 0.1).unwrap());
        for m in [&m1, &m2] {
            let (re, im) = linalg::eigenvalues_2x2(m);
            assert!((re[0] + 0.1).abs() < 1e-14 && (re[1] + 0.1).abs() < 1e-14);
            assert!((im[0].abs() - 1.0).abs() < 1e-14);
        }
        let x = DVector::from_column_slice(&[0.3, -1.7]);
        assert!((angular_velocity(&m1, &x) + x.norm_squared()).abs() < 1e-14);
        assert!(angular_velocity(&m2, &x) < 0.0);
        assert!(FamilyParameter::new(0.5, 0.1).is_err());
        assert!(FamilyParameter::new(1.0, 0.0).is_err());
    }

    #[test]
    fn single_mode_radius_below_one() {
        let (m1, m2) = make_pair(&FamilyParameter::new(1.0, 0.1).unwrap());
        let w = worst_case_product(&m1, &m2, DEFAULT_T_MAX, 32).unwrap();
        assert!(w.rho < 1.0);
        let step = DEFAULT_T_MAX / 32.0;
        assert!(w.rho <= (-0.2 * step).exp() + 1e-12);
    }

    #[test]
    fn negative_identity_hits_boundary() {
        let m = -DMatrix::<f64>::identity(2, 2);
        let w = worst_case_product(&m, &m, 1.0, 16).unwrap();
        assert!(w.boundary);
        assert!((w.rho - (-(w.t1 + w.t2)).exp()).abs() < 1e-14);
        assert!((w.t1 - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_grid() {
        let m = -DMatrix::<f64>::identity(2, 2);
        assert!(worst_case_product(&m, &m, 1.0, 8).is_err());
    }
}
