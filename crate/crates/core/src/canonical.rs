//! The canonical norm `V(x) = sup_{t ≥ 0, A} ‖Φ_A(t,0)x‖` of a uniformly
//! stable switched system, approximated as a finite maximum over products of
//! dwell-step exponentials.
//!
//! Products are grown by right multiplication, `S_k = prune(S_{k-1} ∪ S_{k-1}·E)`
//! with `E = {e^{hM} : M ∈ 𝓜}`, which realises the recursion
//! `V_k(x) = max(V_{k-1}(x), max_i V_{k-1}(e^{hM_i}x))`. Domination of a
//! product by the kept set survives right multiplication, so pruning during
//! the expansion does not lose longer products that would have mattered.
//! A generator survives pruning only if it attains the maximum at one of a
//! fixed set of probe directions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::synth::{sphere_sequence, Candidate};
use crate::system::{expm_scaled, linalg, matrix_from_row_major, row_major, shift_set, MatrixSet};
use crate::system::{StabilityCertificate, StabilityKind};

/// Relative tie tolerance used when collecting active generators.
pub const ACTIVE_TIE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormConfig {
    /// Dwell grid `h`.
    pub dwell: f64,
    /// Horizon `T`; must be a multiple of `dwell`.
    pub horizon: f64,
    /// Cap on the number of kept generators.
    pub budget: usize,
    /// Number of probe directions used for pruning.
    pub probes: usize,
    /// Relative slack below which a probe value counts as a tie.
    pub prune_slack: f64,
}

impl NormConfig {
    pub fn new(dwell: f64, horizon: f64) -> Self {
        Self {
            dwell,
            horizon,
            ..Self::default()
        }
    }

    /// Grid with `steps` dwell steps and horizon `steps * dwell`.
    pub fn with_steps(dwell: f64, steps: usize) -> Self {
        Self::new(dwell, dwell * steps as f64)
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dwell > 0.0 && self.dwell.is_finite()) {
            return Err(Error::Contract(format!("dwell {} must be positive", self.dwell)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Contract(format!("horizon {} must be >= 0", self.horizon)));
        }
        let ratio = self.horizon / self.dwell;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Contract(format!(
                "horizon {} is not a multiple of the dwell {}",
                self.horizon, self.dwell
            )));
        }
        Ok(steps as usize)
    }
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            dwell: 0.1,
            horizon: 10.0,
            budget: 20_000,
            probes: 256,
            prune_slack: 1e-9,
        }
    }
}

/// Pruned finite set of transition-matrix products; the identity is always
/// the first generator.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    pub generators: Vec<DMatrix<f64>>,
    pub horizon: f64,
    pub dwell: f64,
    pub prune_slack: f64,
    /// Number of dwell steps actually expanded.
    pub depth: usize,
    /// True when an expansion step kept no new product, i.e. the set is a
    /// fixed point and longer horizons would not change it.
    pub converged: bool,
    /// Total number of candidate products evaluated.
    pub evaluated: usize,
    /// Largest mode norm, used by the dwell-grid error term.
    pub mode_bound: f64,
}

impl GeneratorSet {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.generators[0].nrows()
    }
}

/// Fixed probe directions: equiangular on the half circle in 2D, a
/// hemispherical low-discrepancy lattice otherwise.
pub fn probe_directions(n: usize, count: usize) -> DMatrix<f64> {
    let count = count.max(1);
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    if n == 2 {
        return DMatrix::from_fn(2, count, |i, k| {
            let th = std::f64::consts::PI * k as f64 / count as f64;
            if i == 0 {
                th.cos()
            } else {
                th.sin()
            }
        });
    }
    let pts = sphere_sequence(n, count);
    DMatrix::from_fn(n, count, |i, k| pts[k][i])
}

fn column_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// Breadth-first product generation over the dwell grid with probe pruning.
pub fn build_generator_set(set: &MatrixSet, cfg: &NormConfig) -> Result<GeneratorSet> {
    let steps = cfg.steps()?;
    let n = set.dim();
    let step_maps = set
        .matrices()
        .map(|m| expm_scaled(m, cfg.dwell))
        .collect::<Result<Vec<_>>>()?;
    let probes = probe_directions(n, cfg.probes);

    let mut kept = vec![DMatrix::<f64>::identity(n, n)];
    let mut kept_values = vec![column_norms(&probes)];
    let mut evaluated = 1usize;
    let mut depth = 0usize;
    let mut converged = false;

    while depth < steps {
        // Candidates: the kept set itself, then every kept G times every step map.
        let fresh: Vec<(usize, usize)> = (0..kept.len())
            .flat_map(|g| (0..step_maps.len()).map(move |i| (g, i)))
            .collect();
        let fresh_results = par::map(&fresh, |&(g, i)| {
            let prod = &kept[g] * &step_maps[i];
            let values = column_norms(&(&prod * &probes));
            (prod, values)
        });
        evaluated += fresh_results.len();

        let total = kept.len() + fresh_results.len();
        let value = |c: usize, p: usize| -> f64 {
            if c < kept.len() {
                kept_values[c][p]
            } else {
                fresh_results[c - kept.len()].1[p]
            }
        };
        let mut keep_flag = vec![false; total];
        keep_flag[0] = true;
        for p in 0..probes.ncols() {
            let mut best = 0usize;
            let mut best_val = value(0, p);
            for c in 1..total {
                let v = value(c, p);
                if v > best_val * (1.0 + cfg.prune_slack) {
                    best = c;
                    best_val = v;
                }
            }
            keep_flag[best] = true;
        }
        depth += 1;

        let grew = keep_flag[kept.len()..].iter().any(|k| *k);
        let old_len = kept.len();
        let mut next = Vec::new();
        let mut next_values = Vec::new();
        for (c, flag) in keep_flag.iter().enumerate() {
            if !flag {
                continue;
            }
            if c < old_len {
                next.push(kept[c].clone());
                next_values.push(kept_values[c].clone());
            } else {
                let (m, v) = &fresh_results[c - old_len];
                next.push(m.clone());
                next_values.push(v.clone());
            }
        }
        if next.len() > cfg.budget {
            return Err(Error::BudgetExceeded {
                what: "generators",
                reached: next.len(),
                cap: cfg.budget,
            });
        }
        let unchanged = !grew && next.len() == old_len;
        kept = next;
        kept_values = next_values;
        if unchanged {
            converged = true;
            break;
        }
    }

    Ok(GeneratorSet {
        generators: kept,
        horizon: cfg.horizon,
        dwell: cfg.dwell,
        prune_slack: cfg.prune_slack,
        depth,
        converged,
        evaluated,
        mode_bound: set.max_mode_norm(),
    })
}

/// Approximation error on the unit sphere: horizon tail `C e^{-γT}` plus the
/// dwell-grid modulus `C (e^{κh} − 1)`, with `κ` a bound on the mode norms.
pub fn error_estimate(cert: &StabilityCertificate, dwell: f64, horizon: f64, mode_bound: f64) -> Result<f64> {
    if cert.kind != StabilityKind::Exponential {
        return Err(Error::Contract(
            "the horizon tail bound needs an exponential stability certificate".into(),
        ));
    }
    let tail = cert.c * (-cert.gamma * horizon).exp();
    Ok(tail + grid_modulus(cert.c, dwell, mode_bound))
}

fn grid_modulus(c: f64, dwell: f64, mode_bound: f64) -> f64 {
    c * (mode_bound * dwell).exp_m1()
}

/// `V̂(x) = max_G ‖Gx‖` over a finite generator set.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledNorm {
    generators: Vec<DMatrix<f64>>,
    pub delta_approx: f64,
    pub dwell: Option<f64>,
    pub mode_bound: Option<f64>,
}

/// Covector `l` at base point `x` with `lᵀx = V̂(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient {
    pub base: DVector<f64>,
    pub covector: DVector<f64>,
    /// Index of the generator that produced it.
    pub generator: usize,
}

impl SampledNorm {
    /// Builds `V̂` for `set`. With a certificate the error estimate uses it;
    /// otherwise the set is treated as uniformly stable with the measured
    /// overshoot `C = max_G ‖G‖`.
    pub fn build(set: &MatrixSet, cert: Option<&StabilityCertificate>, cfg: &NormConfig) -> Result<Self> {
        let gens = build_generator_set(set, cfg)?;
        Ok(Self::from_generator_set(gens, cert))
    }

    pub fn from_generator_set(gens: GeneratorSet, cert: Option<&StabilityCertificate>) -> Self {
        let measured_c = gens
            .generators
            .iter()
            .map(linalg::spectral_norm)
            .fold(1.0, f64::max);
        let grid = grid_modulus(cert.map_or(measured_c, |c| c.c), gens.dwell, gens.mode_bound);
        let delta = match cert {
            _ if gens.converged => grid,
            Some(c) if c.kind == StabilityKind::Exponential => {
                error_estimate(c, gens.dwell, gens.horizon, gens.mode_bound)
                    .expect("exponential certificate")
            }
            Some(c) => (c.c - 1.0) + grid,
            None => (measured_c - 1.0) + grid,
        };
        Self {
            generators: gens.generators,
            delta_approx: delta,
            dwell: Some(gens.dwell),
            mode_bound: Some(gens.mode_bound),
        }
    }

    /// Wraps explicit generators; the identity is prepended when missing.
    pub fn from_generators(mut generators: Vec<DMatrix<f64>>, delta_approx: f64) -> Result<Self> {
        let n = generators
            .first()
            .ok_or_else(|| Error::Contract("no generators".into()))?
            .nrows();
        if generators.iter().any(|g| g.nrows() != n || g.ncols() != n) {
            return Err(Error::Dimension("generators must share one square shape".into()));
        }
        let id = DMatrix::<f64>::identity(n, n);
        if !generators.iter().any(|g| *g == id) {
            generators.insert(0, id);
        }
        Ok(Self {
            generators,
            delta_approx,
            dwell: None,
            mode_bound: None,
        })
    }

    /// Euclidean norm (the single identity generator).
    pub fn euclidean(n: usize) -> Self {
        Self {
            generators: vec![DMatrix::identity(n, n)],
            delta_approx: 0.0,
            dwell: None,
            mode_bound: None,
        }
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.generators[0].nrows()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.generators
            .iter()
            .map(|g| (g * x).norm())
            .fold(0.0, f64::max)
    }

    /// Evaluates many points in parallel; order of the output matches input.
    pub fn eval_many(&self, xs: &[DVector<f64>]) -> Vec<f64> {
        par::map(xs, |x| self.eval(x))
    }

    fn argmax(&self, x: &DVector<f64>) -> (usize, DVector<f64>, f64) {
        let mut best = (0usize, &self.generators[0] * x);
        let mut best_norm = best.1.norm();
        for (i, g) in self.generators.iter().enumerate().skip(1) {
            let y = g * x;
            let v = y.norm();
            if v > best_norm {
                best = (i, y);
                best_norm = v;
            }
        }
        (best.0, best.1, best_norm)
    }

    /// `l = G*ᵀG*x / ‖G*x‖` for the lowest-index maximizing generator `G*`.
    pub fn subgradient_at(&self, x: &DVector<f64>) -> Result<Subgradient> {
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::UndefinedSubgradientBase);
        }
        let (idx, gx, norm) = self.argmax(x);
        let covector = self.generators[idx].tr_mul(&gx) / norm;
        Ok(Subgradient {
            base: x.clone(),
            covector,
            generator: idx,
        })
    }

    /// Largest generator spectral norm, i.e. `max_{‖x‖=1} V̂(x)`.
    pub fn equivalence_constant(&self) -> f64 {
        self.generators.iter().map(linalg::spectral_norm).fold(1.0, f64::max)
    }

    /// Rate-level slack `κ (e^{κh} − 1)` attributable to the dwell grid; the
    /// subgradient decrease test on `V̂` can only be trusted up to this.
    pub fn rate_slack(&self) -> f64 {
        match (self.dwell, self.mode_bound) {
            (Some(h), Some(k)) => k * (k * h).exp_m1(),
            _ => 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SampledNormDoc::from(self)).expect("norm serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: SampledNormDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

impl Candidate for SampledNorm {
    fn dim(&self) -> Option<usize> {
        Some(SampledNorm::dim(self))
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eval(x)
    }

    fn active_gradients(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let images: Vec<DVector<f64>> = self.generators.iter().map(|g| g * x).collect();
        let norms: Vec<f64> = images.iter().map(|y| y.norm()).collect();
        let top = norms.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            return Vec::new();
        }
        images
            .iter()
            .zip(&norms)
            .zip(&self.generators)
            .filter(|((_, v), _)| **v >= top * (1.0 - ACTIVE_TIE_TOL))
            .map(|((y, v), g)| g.tr_mul(y) / *v)
            .collect()
    }

    fn homogeneity_degree(&self) -> f64 {
        1.0
    }
}

/// On-disk layout `{generators: [[row-major]], delta_approx: real}`; the
/// grid metadata is optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledNormDoc {
    pub generators: Vec<Vec<f64>>,
    pub delta_approx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_bound: Option<f64>,
}

impl From<&SampledNorm> for SampledNormDoc {
    fn from(v: &SampledNorm) -> Self {
        Self {
            generators: v.generators.iter().map(row_major).collect(),
            delta_approx: v.delta_approx,
            dwell: v.dwell,
            mode_bound: v.mode_bound,
        }
    }
}

impl TryFrom<SampledNormDoc> for SampledNorm {
    type Error = Error;

    fn try_from(doc: SampledNormDoc) -> Result<Self> {
        let first = doc
            .generators
            .first()
            .ok_or_else(|| Error::Contract("no generators".into()))?;
        let n = (first.len() as f64).sqrt().round() as usize;
        let generators = doc
            .generators
            .iter()
            .map(|g| matrix_from_row_major(n, g))
            .collect::<Result<Vec<_>>>()?;
        let mut norm = SampledNorm::from_generators(generators, doc.delta_approx)?;
        norm.dwell = doc.dwell;
        norm.mode_bound = doc.mode_bound;
        Ok(norm)
    }
}

/// Canonical norm of the inflated set `𝓜 + ηId`. For trajectories of `𝓜`
/// it decays at rate at least `η`, up to the approximation error.
pub fn strictify_via_shift(
    set: &MatrixSet,
    eta: f64,
    cert: Option<&StabilityCertificate>,
    cfg: &NormConfig,
) -> Result<SampledNorm> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Contract(format!("shift rate {eta} must be >= 0")));
    }
    SampledNorm::build(&shift_set(set, -eta), cert, cfg)
}
