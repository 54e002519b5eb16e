use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent tuple of a monomial `x^α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.0
            .iter()
            .zip(x.iter())
            .map(|(e, xi)| xi.powi(*e as i32))
            .product()
    }

    /// `∂x^α/∂x_i`.
    pub fn partial(&self, x: &DVector<f64>, i: usize) -> f64 {
        let e = self.0[i];
        if e == 0 {
            return 0.0;
        }
        let mut out = e as f64;
        for (j, (ej, xj)) in self.0.iter().zip(x.iter()).enumerate() {
            let p = if j == i { ej - 1 } else { *ej };
            out *= xj.powi(p as i32);
        }
        out
    }

    /// Multinomial coefficient `|α|! / ∏ α_i!`.
    pub fn multinomial(&self) -> f64 {
        let mut out = 1.0;
        let mut acc = 0u32;
        for e in &self.0 {
            for k in 1..=*e {
                acc += 1;
                out = out * acc as f64 / k as f64;
            }
        }
        out
    }
}

/// Number of monomials of degree exactly `degree` in `n` variables.
pub fn monomial_count(n: usize, degree: u32) -> usize {
    // C(n + degree - 1, degree)
    let (mut num, mut den) = (1u128, 1u128);
    let k = degree as u128;
    for i in 0..k {
        num *= n as u128 + i;
        den *= i + 1;
    }
    (num / den) as usize
}

/// All multi-indices of total degree exactly `degree` in `n` variables, in
/// descending lexicographic order (`x₁^d` first).
pub fn monomial_basis(n: usize, degree: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == n {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(n, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(monomial_count(n, degree));
    if n > 0 {
        rec(n, degree, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialTerm {
    pub exponents: MultiIndex,
    pub coefficient: f64,
}

/// Homogeneous polynomial `Σ c_α x^α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialForm {
    pub n: usize,
    pub terms: Vec<PolynomialTerm>,
}

impl PolynomialForm {
    pub fn new(n: usize, terms: Vec<PolynomialTerm>) -> Result<Self> {
        let p = Self { n, terms };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        let mut degree = None;
        for t in &self.terms {
            if t.exponents.dim() != self.n {
                return Err(Error::Dimension(format!(
                    "monomial with {} exponents in a {}-variable polynomial",
                    t.exponents.dim(),
                    self.n
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::NumericDomain("non-finite polynomial coefficient".into()));
            }
            match degree {
                None => degree = Some(t.exponents.degree()),
                Some(d) if d != t.exponents.degree() => {
                    return Err(Error::Contract("polynomial is not homogeneous".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Pairs coefficients with a basis.
    pub fn from_coefficients(n: usize, basis: &[MultiIndex], coefficients: &[f64]) -> Self {
        let terms = basis
            .iter()
            .zip(coefficients)
            .map(|(a, c)| PolynomialTerm {
                exponents: a.clone(),
                coefficient: *c,
            })
            .collect();
        Self { n, terms }
    }

    pub fn zero(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    pub fn degree(&self) -> u32 {
        self.terms.first().map_or(0, |t| t.exponents.degree())
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.terms
            .iter()
            .filter(|t| &t.exponents == alpha)
            .map(|t| t.coefficient)
            .sum()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.terms.iter().map(|t| t.coefficient * t.exponents.eval(x)).sum()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| {
            self.terms
                .iter()
                .map(|t| t.coefficient * t.exponents.partial(x, i))
                .sum()
        })
    }
}
