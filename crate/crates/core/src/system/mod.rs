//! Switched linear systems `ẋ = A(t)x` with `A(t)` drawn from a finite set of
//! mode matrices: transition cocycles, exact-propagation simulation, and the
//! shift and block-embedding constructions.

mod expm;
pub mod linalg;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use expm::{expm, expm_scaled};

#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatrix {
    pub entries: DMatrix<f64>,
    pub label: String,
}

impl ModeMatrix {
    pub fn new(entries: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Dimension(format!(
                "mode matrix is {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("mode matrix has non-finite entries".into()));
        }
        Ok(Self {
            entries,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// A finite, nonempty set of mode matrices sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSet {
    n: usize,
    modes: Vec<ModeMatrix>,
}

impl MatrixSet {
    pub fn new(modes: Vec<ModeMatrix>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::Contract("matrix set must be nonempty".into()))?;
        let n = first.dim();
        if n == 0 {
            return Err(Error::Dimension("zero-dimensional modes".into()));
        }
        if let Some(bad) = modes.iter().find(|m| m.dim() != n) {
            return Err(Error::Dimension(format!(
                "mode '{}' has dimension {} but the set has dimension {n}",
                bad.label,
                bad.dim()
            )));
        }
        Ok(Self { n, modes })
    }

    /// Builds a set from bare matrices labelled `M0, M1, ...`.
    pub fn from_matrices(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let modes = mats
            .into_iter()
            .enumerate()
            .map(|(i, m)| ModeMatrix::new(m, format!("M{i}")))
            .collect::<Result<Vec<_>>>()?;
        Self::new(modes)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeMatrix] {
        &self.modes
    }

    pub fn matrix(&self, i: usize) -> &DMatrix<f64> {
        &self.modes[i].entries
    }

    pub fn matrices(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.modes.iter().map(|m| &m.entries)
    }

    /// Largest spectral norm over the modes.
    pub fn max_mode_norm(&self) -> f64 {
        self.matrices().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    /// Set union, keeping the order `self` then `other`.
    pub fn union(&self, other: &MatrixSet) -> Result<MatrixSet> {
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        MatrixSet::new(modes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MatrixSetDoc::from(self)).expect("matrix set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MatrixSetDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

/// On-disk layout: `{"n": int, "modes": [[row-major reals]], "labels": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSetDoc {
    pub n: usize,
    pub modes: Vec<Vec<f64>>,
    #[serde(default)]
    pub labels: Vec<String>,
}

impl From<&MatrixSet> for MatrixSetDoc {
    fn from(set: &MatrixSet) -> Self {
        Self {
            n: set.n,
            modes: set.matrices().map(row_major).collect(),
            labels: set.modes.iter().map(|m| m.label.clone()).collect(),
        }
    }
}

impl TryFrom<MatrixSetDoc> for MatrixSet {
    type Error = Error;

    fn try_from(doc: MatrixSetDoc) -> Result<Self> {
        if !doc.labels.is_empty() && doc.labels.len() != doc.modes.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} modes",
                doc.labels.len(),
                doc.modes.len()
            )));
        }
        let modes = doc
            .modes
            .iter()
            .enumerate()
            .map(|(i, flat)| {
                let m = matrix_from_row_major(doc.n, flat)?;
                let label = doc.labels.get(i).cloned().unwrap_or_else(|| format!("M{i}"));
                ModeMatrix::new(m, label)
            })
            .collect::<Result<Vec<_>>>()?;
        MatrixSet::new(modes)
    }
}

pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn matrix_from_row_major(n: usize, flat: &[f64]) -> Result<DMatrix<f64>> {
    if flat.len() != n * n {
        return Err(Error::Dimension(format!(
            "expected {} row-major entries for a {n}x{n} matrix, got {}",
            n * n,
            flat.len()
        )));
    }
    Ok(DMatrix::from_row_slice(n, n, flat))
}

/// Piecewise-constant switching schedule `[(duration, mode)]`, optionally
/// repeated periodically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingLaw {
    pub segments: Vec<(f64, usize)>,
    pub periodic: bool,
}

impl SwitchingLaw {
    pub fn new(segments: Vec<(f64, usize)>, periodic: bool) -> Result<Self> {
        let law = Self { segments, periodic };
        law.check()?;
        Ok(law)
    }

    fn check(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidLaw("no segments".into()));
        }
        if let Some((d, _)) = self.segments.iter().find(|(d, _)| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidLaw(format!("segment duration {d} is not positive")));
        }
        Ok(())
    }

    /// Checks the law against a matrix set (indices in range).
    pub fn validate(&self, set: &MatrixSet) -> Result<()> {
        self.check()?;
        if let Some((_, i)) = self.segments.iter().find(|(_, i)| *i >= set.len()) {
            return Err(Error::InvalidLaw(format!(
                "mode index {i} out of range for {} modes",
                set.len()
            )));
        }
        Ok(())
    }

    /// Total duration of one pass over the segments.
    pub fn period(&self) -> f64 {
        self.segments.iter().map(|(d, _)| d).sum()
    }

    /// Mode active at time `t` (right-continuous).
    pub fn mode_at(&self, t: f64) -> Option<usize> {
        let period = self.period();
        let mut t = if self.periodic { t.rem_euclid(period) } else { t };
        if t < 0.0 || (!self.periodic && t >= period) {
            return None;
        }
        for (d, i) in &self.segments {
            if t < *d {
                return Some(*i);
            }
            t -= d;
        }
        self.segments.last().map(|(_, i)| *i)
    }

    /// Times in `(0, horizon]` at which the active mode changes. For a
    /// periodic law the wrap-around from the last to the first segment counts
    /// as a switch when the two modes differ.
    pub fn switch_times(&self, horizon: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let k = self.segments.len();
        let mut end = 0.0;
        let mut idx = 0usize;
        loop {
            let (d, mode) = self.segments[idx];
            end += d;
            if end > horizon * (1.0 + 1e-12) {
                break;
            }
            let next_idx = if idx + 1 == k {
                if !self.periodic {
                    break;
                }
                0
            } else {
                idx + 1
            };
            if self.segments[next_idx].1 != mode {
                out.push(end);
            }
            idx = next_idx;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("law serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let law: SwitchingLaw = serde_json::from_str(s)?;
        law.check()?;
        Ok(law)
    }

    /// Random law with dwell times drawn uniformly from `[min_dwell, max_dwell]`
    /// and modes drawn uniformly, covering at least `horizon`.
    pub fn random(
        rng: &mut impl Rng,
        modes: usize,
        horizon: f64,
        min_dwell: f64,
        max_dwell: f64,
    ) -> Result<Self> {
        if !(min_dwell > 0.0 && max_dwell >= min_dwell) {
            return Err(Error::InvalidLaw("dwell range must be positive".into()));
        }
        let mut segments = Vec::new();
        let mut total = 0.0;
        while total < horizon {
            let d = rng.random_range(min_dwell..=max_dwell);
            segments.push((d, rng.random_range(0..modes)));
            total += d;
        }
        Self::new(segments, false)
    }

    /// Random law whose dwell times are integer multiples of `dwell`.
    pub fn random_on_grid(
        rng: &mut impl Rng,
        modes: usize,
        horizon: f64,
        dwell: f64,
        max_steps: usize,
    ) -> Result<Self> {
        let mut segments = Vec::new();
        let mut total = 0.0;
        while total < horizon {
            let d = dwell * rng.random_range(1..=max_steps.max(1)) as f64;
            segments.push((d, rng.random_range(0..modes)));
            total += d;
        }
        Self::new(segments, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityKind {
    Uniform,
    Exponential,
}

/// Bound `‖Φ_A(t,0)‖ ≤ C e^{-γt}` valid for every switching law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub kind: StabilityKind,
    pub c: f64,
    pub gamma: f64,
}

impl StabilityCertificate {
    pub fn uniform(c: f64) -> Result<Self> {
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::Contract(format!("overshoot bound {c} must be >= 1")));
        }
        Ok(Self {
            kind: StabilityKind::Uniform,
            c,
            gamma: 0.0,
        })
    }

    pub fn exponential(c: f64, gamma: f64) -> Result<Self> {
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::Contract(format!("overshoot bound {c} must be >= 1")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Contract(format!("decay rate {gamma} must be > 0")));
        }
        Ok(Self {
            kind: StabilityKind::Exponential,
            c,
            gamma,
        })
    }
}

/// Sampled solution `x(t) = Φ_A(t,0) x(0)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Mode active on `(times[k-1], times[k]]`; entry 0 is the initial mode.
    pub modes: Vec<usize>,
    pub law: SwitchingLaw,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial time")
    }
}

/// Walks the law's segments (cycling when periodic) and clips them to
/// `[0, horizon]`, yielding `(duration, mode)` pieces.
fn clipped_segments(law: &SwitchingLaw, horizon: f64) -> Result<Vec<(f64, usize)>> {
    let period = law.period();
    if !law.periodic && horizon > period * (1.0 + 1e-12) {
        return Err(Error::OutOfHorizon { t: horizon, horizon: period });
    }
    let mut out = Vec::new();
    let mut remaining = horizon;
    'outer: loop {
        for &(d, i) in &law.segments {
            if remaining <= 0.0 {
                break 'outer;
            }
            let take = d.min(remaining);
            // Swallow round-off slivers at the end of the horizon.
            if take > 1e-13 * period.max(1.0) {
                out.push((take, i));
            }
            remaining -= d;
        }
        if !law.periodic {
            break;
        }
    }
    Ok(out)
}

/// `Φ_A(t, 0)` as an ordered product of segment exponentials.
pub fn transition_matrix(law: &SwitchingLaw, set: &MatrixSet, t: f64) -> Result<DMatrix<f64>> {
    law.validate(set)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NumericDomain(format!("transition time {t}")));
    }
    let n = set.dim();
    let period = law.period();
    if law.periodic && t > period {
        // Φ(qP + r) = Φ(r) Φ(P)^q
        let q = (t / period).floor();
        let r = t - q * period;
        let one = product_over(law, set, period)?;
        let mut power = DMatrix::identity(n, n);
        let mut base = one;
        let mut q = q as u64;
        while q > 0 {
            if q & 1 == 1 {
                power = &base * &power;
            }
            base = &base * &base;
            q >>= 1;
        }
        let rest = product_over(law, set, r)?;
        return Ok(rest * power);
    }
    product_over(law, set, t)
}

fn product_over(law: &SwitchingLaw, set: &MatrixSet, t: f64) -> Result<DMatrix<f64>> {
    let n = set.dim();
    let mut phi = DMatrix::identity(n, n);
    for (d, i) in clipped_segments(law, t)? {
        phi = expm_scaled(set.matrix(i), d)? * phi;
    }
    Ok(phi)
}

/// Dense sampling of `t ↦ Φ_A(t,0)x0` on `[0, horizon]`. Samples are aligned
/// to segment boundaries and spaced at most `step` apart; each sub-step is
/// propagated with an exact matrix exponential.
pub fn simulate(
    law: &SwitchingLaw,
    set: &MatrixSet,
    x0: &DVector<f64>,
    step: f64,
    horizon: f64,
) -> Result<Trajectory> {
    law.validate(set)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::NumericDomain(format!("simulation step {step}")));
    }
    if x0.len() != set.dim() {
        return Err(Error::Dimension(format!(
            "initial state has length {} for a {}-dimensional system",
            x0.len(),
            set.dim()
        )));
    }
    let pieces = clipped_segments(law, horizon)?;
    let first_mode = pieces.first().map(|p| p.1).unwrap_or(law.segments[0].1);
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut modes = vec![first_mode];
    let mut cache: Vec<((u64, usize), DMatrix<f64>)> = Vec::new();
    let mut t0 = 0.0;
    let mut x = x0.clone();
    for (d, mode) in pieces {
        let subs = (d / step).ceil().max(1.0) as usize;
        let h = d / subs as f64;
        let key = (h.to_bits(), mode);
        let prop = match cache.iter().find(|(k, _)| *k == key) {
            Some((_, p)) => p.clone(),
            None => {
                let p = expm_scaled(set.matrix(mode), h)?;
                cache.push((key, p.clone()));
                p
            }
        };
        for j in 1..=subs {
            x = &prop * &x;
            times.push(t0 + h * j as f64);
            states.push(x.clone());
            modes.push(mode);
        }
        t0 += d;
    }
    Ok(Trajectory {
        times,
        states,
        modes,
        law: law.clone(),
    })
}

/// Replaces each mode `M` by `M − νId`.
pub fn shift_set(set: &MatrixSet, nu: f64) -> MatrixSet {
    let n = set.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let modes = set
        .modes()
        .iter()
        .map(|m| ModeMatrix {
            entries: &m.entries - &id * nu,
            label: m.label.clone(),
        })
        .collect();
    MatrixSet { n, modes }
}

/// Embeds each planar mode as `blockdiag(M, −Id_{n−2})`.
pub fn embed_block(planar: &MatrixSet, n: usize) -> Result<MatrixSet> {
    if planar.dim() != 2 {
        return Err(Error::Dimension(format!(
            "block embedding expects planar modes, got dimension {}",
            planar.dim()
        )));
    }
    if n <= 2 {
        return Err(Error::Dimension(format!("embedding dimension {n} must exceed 2")));
    }
    let modes = planar
        .modes()
        .iter()
        .map(|m| {
            let mut big = -DMatrix::<f64>::identity(n, n);
            big.view_mut((0, 0), (2, 2)).copy_from(&m.entries);
            ModeMatrix {
                entries: big,
                label: m.label.clone(),
            }
        })
        .collect();
    MatrixSet::new(modes)
}

/// The elementary rotation generators `E_ij − E_ji` (i < j) of so(n).
pub fn elementary_rotations(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut m = DMatrix::zeros(n, n);
            m[(i, j)] = 1.0;
            m[(j, i)] = -1.0;
            out.push(m);
        }
    }
    out
}

/// Deterministic sample of skew-symmetric matrices of spectral norm one: the
/// elementary generators first, then random antisymmetrized Gaussian
/// matrices until `count` is reached.
pub fn so_ball_sample(n: usize, count: usize, seed: u64) -> Result<MatrixSet> {
    if n < 2 {
        return Err(Error::Dimension(format!("so(n) needs n >= 2, got {n}")));
    }
    if count == 0 {
        return Err(Error::Contract("sample count must be >= 1".into()));
    }
    let mut mats = elementary_rotations(n);
    let mut rng = crate::rng::seeded(seed);
    while mats.len() < count {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let skew = (&g - g.transpose()) * 0.5;
        let norm = linalg::spectral_norm(&skew);
        if norm < 1e-12 {
            continue;
        }
        let mut m = skew / norm;
        // Re-antisymmetrize so M + Mᵀ = 0 holds bit-for-bit after scaling.
        for i in 0..n {
            m[(i, i)] = 0.0;
            for j in (i + 1)..n {
                m[(j, i)] = -m[(i, j)];
            }
        }
        mats.push(m);
    }
    let modes = mats
        .into_iter()
        .enumerate()
        .map(|(i, m)| ModeMatrix {
            entries: m,
            label: format!("R{i}"),
        })
        .collect();
    MatrixSet::new(modes)
}
