//! Polyhedral and even-power-sum candidates built from subgradients of a
//! convex absolutely homogeneous function, plus the gap and rescaling tools
//! used to judge them.

mod poly;
mod sphere;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::canonical::SampledNorm;
use crate::error::{Error, Result};
use crate::par;

pub use poly::{monomial_basis, monomial_count, MultiIndex, PolynomialForm, PolynomialTerm};
pub use sphere::sphere_sequence;

/// Relative tolerance under which polyhedral pieces count as co-active.
pub const PIECE_TIE_TOL: f64 = 1e-8;

/// Anything the verifiers can evaluate and differentiate.
pub trait Candidate: Sync {
    /// Ambient dimension, when fixed by the representation.
    fn dim(&self) -> Option<usize>;

    fn value(&self, x: &DVector<f64>) -> f64;

    /// The gradient at a smooth point; for max-type functions, the gradient
    /// of every piece active within the tie tolerance (the subdifferential
    /// is their convex hull).
    fn active_gradients(&self, x: &DVector<f64>) -> Vec<DVector<f64>>;

    /// Degree `α` in `F(λx) = |λ|^α F(x)`.
    fn homogeneity_degree(&self) -> f64;
}

fn dot(l: &[f64], x: &DVector<f64>) -> f64 {
    l.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}

fn check_vectors(vectors: &[Vec<f64>]) -> Result<usize> {
    let n = vectors
        .first()
        .ok_or_else(|| Error::Contract("at least one covector is required".into()))?
        .len();
    if n == 0 {
        return Err(Error::Dimension("zero-length covector".into()));
    }
    if vectors.iter().any(|l| l.len() != n) {
        return Err(Error::Dimension("covectors differ in length".into()));
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NumericDomain("non-finite covector entry".into()));
    }
    Ok(n)
}

/// `W(x) = max_j |l_jᵀx|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedralForm {
    pub vectors: Vec<Vec<f64>>,
}

impl PolyhedralForm {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        check_vectors(&vectors)?;
        Ok(Self { vectors })
    }

    pub fn pieces(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn covector(&self, j: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.vectors[j])
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.vectors.iter().map(|l| dot(l, x).abs()).fold(0.0, f64::max)
    }

    /// Form built on the first `count` covectors.
    pub fn prefix(&self, count: usize) -> Self {
        Self {
            vectors: self.vectors[..count.clamp(1, self.vectors.len())].to_vec(),
        }
    }

    /// Signed covectors `sign(l_jᵀx) l_j` of the pieces active at `x`.
    pub fn active_pieces(&self, x: &DVector<f64>) -> Vec<(usize, DVector<f64>)> {
        let vals: Vec<f64> = self.vectors.iter().map(|l| dot(l, x)).collect();
        let top = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if top == 0.0 {
            return Vec::new();
        }
        vals.iter()
            .enumerate()
            .filter(|(_, v)| v.abs() >= top * (1.0 - PIECE_TIE_TOL))
            .map(|(j, v)| (j, self.covector(j) * v.signum()))
            .collect()
    }
}

/// `Σ (l_jᵀx)^{2d}`, or its normalized root `(Σ |l_jᵀx|^{2d})^{1/2d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvenPowerSum {
    pub vectors: Vec<Vec<f64>>,
    pub half_degree: u32,
    pub normalized: bool,
}

impl EvenPowerSum {
    pub fn new(vectors: Vec<Vec<f64>>, half_degree: u32, normalized: bool) -> Result<Self> {
        check_vectors(&vectors)?;
        if half_degree == 0 {
            return Err(Error::Contract("half-degree must be >= 1".into()));
        }
        Ok(Self {
            vectors,
            half_degree,
            normalized,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    fn power(&self) -> i32 {
        2 * self.half_degree as i32
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let ys: Vec<f64> = self.vectors.iter().map(|l| dot(l, x)).collect();
        if !self.normalized {
            return ys.iter().map(|y| y.powi(self.power())).sum();
        }
        // Factor out the largest magnitude so large degrees cannot overflow.
        let m = ys.iter().map(|y| y.abs()).fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        let s: f64 = ys.iter().map(|y| (y / m).powi(self.power())).sum();
        m * s.powf(1.0 / self.power() as f64)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let p = self.power();
        let ys: Vec<f64> = self.vectors.iter().map(|l| dot(l, x)).collect();
        let mut g = DVector::zeros(n);
        if !self.normalized {
            for (l, y) in self.vectors.iter().zip(&ys) {
                let w = p as f64 * y.powi(p - 1);
                for i in 0..n {
                    g[i] += w * l[i];
                }
            }
            return g;
        }
        let m = ys.iter().map(|y| y.abs()).fold(0.0, f64::max);
        if m == 0.0 {
            return g;
        }
        let s: f64 = ys.iter().map(|y| (y / m).powi(p)).sum();
        let scale = s.powf(1.0 / p as f64 - 1.0);
        for (l, y) in self.vectors.iter().zip(&ys) {
            let w = (y / m).powi(p - 1) * scale;
            for i in 0..n {
                g[i] += w * l[i];
            }
        }
        g
    }
}

/// Tagged union of the candidate families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateFunction {
    Polyhedral(PolyhedralForm),
    EvenPower(EvenPowerSum),
    Polynomial(PolynomialForm),
    /// `x ↦ F(x)^q`.
    Power {
        base: Box<CandidateFunction>,
        exponent: f64,
    },
}

impl CandidateFunction {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("candidate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: CandidateFunction = serde_json::from_str(s)?;
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Polyhedral(w) => check_vectors(&w.vectors).map(|_| ()),
            Self::EvenPower(z) => {
                check_vectors(&z.vectors)?;
                if z.half_degree == 0 {
                    return Err(Error::Contract("half-degree must be >= 1".into()));
                }
                Ok(())
            }
            Self::Polynomial(p) => p.check(),
            Self::Power { base, exponent } => {
                if !(*exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::Contract(format!("exponent {exponent} must be > 0")));
                }
                base.validate()
            }
        }
    }

    /// True for degree-one absolutely homogeneous forms.
    pub fn is_degree_one(&self) -> bool {
        (self.homogeneity_degree() - 1.0).abs() < 1e-15
    }
}

impl Candidate for CandidateFunction {
    fn dim(&self) -> Option<usize> {
        match self {
            Self::Polyhedral(w) => Some(w.dim()),
            Self::EvenPower(z) => Some(z.dim()),
            Self::Polynomial(p) => Some(p.n),
            Self::Power { base, .. } => base.dim(),
        }
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        eval_candidate(self, x)
    }

    fn active_gradients(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        match self {
            Self::Polyhedral(w) => w.active_pieces(x).into_iter().map(|(_, l)| l).collect(),
            Self::EvenPower(z) => vec![z.gradient(x)],
            Self::Polynomial(p) => vec![p.gradient(x)],
            Self::Power { base, exponent } => {
                let f = base.value(x);
                let scale = exponent * f.powf(exponent - 1.0);
                base.active_gradients(x).into_iter().map(|g| g * scale).collect()
            }
        }
    }

    fn homogeneity_degree(&self) -> f64 {
        match self {
            Self::Polyhedral(_) => 1.0,
            Self::EvenPower(z) if z.normalized => 1.0,
            Self::EvenPower(z) => 2.0 * z.half_degree as f64,
            Self::Polynomial(p) => p.degree() as f64,
            Self::Power { base, exponent } => base.homogeneity_degree() * exponent,
        }
    }
}

/// Exact formula evaluation; every family vanishes at the origin.
pub fn eval_candidate(f: &CandidateFunction, x: &DVector<f64>) -> f64 {
    match f {
        CandidateFunction::Polyhedral(w) => w.eval(x),
        CandidateFunction::EvenPower(z) => z.eval(x),
        CandidateFunction::Polynomial(p) => p.eval(x),
        CandidateFunction::Power { base, exponent } => eval_candidate(base, x).powf(*exponent),
    }
}

/// `W(x) = max_{j ≤ count} |l_jᵀx|` with `l_j` the subgradient of `V̂` at
/// the j-th sphere point. `W ≤ V̂` everywhere and `W(x_j) = V̂(x_j)`.
pub fn synthesize_polyhedral(v: &SampledNorm, count: usize) -> Result<PolyhedralForm> {
    if count == 0 {
        return Err(Error::Contract("piece count must be >= 1".into()));
    }
    let points = sphere_sequence(v.dim(), count);
    let vectors = par::map(&points, |x| {
        v.subgradient_at(x)
            .map(|s| s.covector.iter().copied().collect::<Vec<f64>>())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    PolyhedralForm::new(vectors)
}

/// `Z(x) = (Σ_j |l_jᵀx|^{2d})^{1/2d}` on `W`'s covectors; satisfies
/// `W ≤ Z ≤ N^{1/2d} W` for `N` pieces.
pub fn smooth_to_even_powers(w: &PolyhedralForm, half_degree: u32) -> Result<EvenPowerSum> {
    EvenPowerSum::new(w.vectors.clone(), half_degree, true)
}

/// Expands `Σ_j (l_jᵀx)^{2d}` into monomial coefficients of degree `2d`.
pub fn to_polynomial(z: &EvenPowerSum, coefficient_budget: usize) -> Result<PolynomialForm> {
    let n = z.dim();
    let degree = 2 * z.half_degree;
    let count = monomial_count(n, degree);
    if count > coefficient_budget {
        return Err(Error::BudgetExceeded {
            what: "polynomial coefficients",
            reached: count,
            cap: coefficient_budget,
        });
    }
    let basis = monomial_basis(n, degree);
    let coeffs: Vec<f64> = basis
        .iter()
        .map(|alpha| {
            let weight = alpha.multinomial();
            z.vectors
                .iter()
                .map(|l| {
                    alpha
                        .0
                        .iter()
                        .zip(l)
                        .map(|(e, li)| li.powi(*e as i32))
                        .product::<f64>()
                })
                .sum::<f64>()
                * weight
        })
        .collect();
    Ok(PolynomialForm::from_coefficients(n, &basis, &coeffs))
}

/// Sup of `|V(x) − F(x)|` over a sphere sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub gap: f64,
    pub argmax: DVector<f64>,
    pub samples: usize,
}

pub fn uniform_gap(v: &dyn Candidate, f: &dyn Candidate, samples: usize) -> Result<GapReport> {
    for (name, g) in [("reference", v), ("candidate", f)] {
        if (g.homogeneity_degree() - 1.0).abs() > 1e-15 {
            return Err(Error::Contract(format!(
                "{name} is homogeneous of degree {}, the gap needs degree one",
                g.homogeneity_degree()
            )));
        }
    }
    let n = v
        .dim()
        .or(f.dim())
        .ok_or_else(|| Error::Dimension("unknown dimension".into()))?;
    if samples == 0 {
        return Err(Error::Contract("sample count must be >= 1".into()));
    }
    let points = sphere_sequence(n, samples);
    let gaps = par::map(&points, |x| (v.value(x) - f.value(x)).abs());
    let (mut best, mut best_gap) = (0usize, gaps[0]);
    for (i, g) in gaps.iter().enumerate().skip(1) {
        if *g > best_gap {
            best = i;
            best_gap = *g;
        }
    }
    Ok(GapReport {
        gap: best_gap,
        argmax: points[best].clone(),
        samples,
    })
}

/// `x ↦ F(x)^q` for a degree-one `F`; order along trajectories is preserved.
pub fn rescale_power(f: &CandidateFunction, q: f64) -> Result<CandidateFunction> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Contract(format!("exponent {q} must be > 0")));
    }
    if !f.is_degree_one() {
        return Err(Error::Contract("rescaling expects a degree-one form".into()));
    }
    if q == 1.0 {
        return Ok(f.clone());
    }
    Ok(CandidateFunction::Power {
        base: Box::new(f.clone()),
        exponent: q,
    })
}
