//! Sparse multivariate polynomials over `f64`.
//!
//! Terms are kept in a [`BTreeMap`] keyed by [`Monomial`], so iteration
//! always follows the graded order used by [`MonomialBasis`]. Coefficients
//! that cancel to exactly zero are removed eagerly.

mod basis;
mod parse;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

pub use basis::MonomialBasis;
pub use parse::{format_poly, parse};

use crate::error::PolyError;

/// A multi-index `α`, i.e. the monomial `x1^α1 * ... * xn^αn`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial {
    exponents: Box<[u32]>,
    degree: u32,
}

impl Monomial {
    pub fn new(exponents: impl Into<Box<[u32]>>) -> Self {
        let exponents = exponents.into();
        let degree = exponents.iter().sum();
        Self { exponents, degree }
    }

    pub fn one(n: usize) -> Self {
        Self::new(vec![0; n])
    }

    /// `x_i^power` with a zero-based variable index.
    pub fn var_power(n: usize, i: usize, power: u32) -> Self {
        let mut e = vec![0; n];
        e[i] = power;
        Self::new(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_one(&self) -> bool {
        self.degree == 0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.dim(), other.dim());
        let e: Vec<u32> = self
            .exponents
            .iter()
            .zip(other.exponents.iter())
            .map(|(a, b)| a + b)
            .collect();
        Monomial::new(e)
    }

    /// Whether every exponent is even.
    pub fn is_even(&self) -> bool {
        self.exponents.iter().all(|e| e % 2 == 0)
    }

    /// `α / 2` for an even multi-index.
    pub fn half(&self) -> Option<Monomial> {
        if !self.is_even() {
            return None;
        }
        Some(Monomial::new(
            self.exponents.iter().map(|e| e / 2).collect::<Vec<_>>(),
        ))
    }

    /// If this is `x_i^{2k}` with `k >= 1`, returns `(i, k)`.
    pub fn as_even_pure_power(&self) -> Option<(usize, u32)> {
        let mut found = None;
        for (i, &e) in self.exponents.iter().enumerate() {
            if e != 0 {
                if found.is_some() {
                    return None;
                }
                found = Some((i, e));
            }
        }
        match found {
            Some((i, e)) if e % 2 == 0 => Some((i, e / 2)),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .map(|(&e, &xi)| if e == 0 { 1.0 } else { xi.powi(e as i32) })
            .product()
    }
}

impl Ord for Monomial {
    /// Graded by total degree; within a degree, larger leading exponents
    /// come first, so for two variables degree 2 reads `x1^2, x1*x2, x2^2`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.exponents.cmp(&self.exponents))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial in `n` variables with real coefficients.
#[derive(Clone, PartialEq, Debug)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1, "polynomial dimension must be positive");
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::one(n), c);
        p
    }

    /// The variable `x_i` (zero-based `i`).
    pub fn var(n: usize, i: usize) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::var_power(n, i, 1), 1.0);
        p
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, f64)>,
    {
        let mut p = Self::zero(n);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&Monomial::one(self.n))
    }

    /// Accumulates `c * m`, dropping the term if it cancels to exactly zero.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        assert_eq!(m.dim(), self.n, "monomial dimension mismatch");
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    fn check_dim(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.n != other.n {
            return Err(PolyError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.n {
            return Err(PolyError::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(self.terms.iter().map(|(m, &c)| c * m.eval(x)).sum())
    }

    /// `Σ |p_α|`.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (m, &v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut out = Polynomial::zero(self.n);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn square(&self) -> Polynomial {
        self.mul(self).expect("same dimension")
    }

    /// Formal partial derivative with respect to `x_i` (zero-based `i`).
    pub fn partial(&self, i: usize) -> Result<Polynomial, PolyError> {
        if i >= self.n {
            return Err(PolyError::VariableOutOfRange {
                index: i + 1,
                n: self.n,
            });
        }
        let mut out = Polynomial::zero(self.n);
        for (m, &c) in &self.terms {
            let e = m.exponents()[i];
            if e == 0 {
                continue;
            }
            let mut ex = m.exponents().to_vec();
            ex[i] -= 1;
            out.add_term(Monomial::new(ex), c * e as f64);
        }
        Ok(out)
    }

    /// Gradient at a point, via the formal partials.
    pub fn gradient_at(&self, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        (0..self.n)
            .map(|i| self.partial(i)?.evaluate(x))
            .collect()
    }

    /// Hessian at a point as a row-major `n*n` vector.
    pub fn hessian_at(&self, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        let n = self.n;
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            let di = self.partial(i)?;
            for j in i..n {
                let v = di.partial(j)?.evaluate(x)?;
                h[i * n + j] = v;
                h[j * n + i] = v;
            }
        }
        Ok(h)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_poly(self))
    }
}

/// `1 / k!`, accumulated as a product of reciprocals.
pub fn inv_factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc / j as f64)
}

/// `Θ_r(x) = Σ_{k=0}^{r} Σ_j x_j^{2k} / k!`.
///
/// The `k = 0` layer contributes the constant `n`.
pub fn perturbation_series(n: usize, r: u32) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for k in 0..=r {
        let c = inv_factorial(k);
        for j in 0..n {
            p.add_term(Monomial::var_power(n, j, 2 * k), c);
        }
    }
    p
}

/// `n * Σ_{k=0}^{r} 1/k!`, the ℓ1 norm of [`perturbation_series`].
pub fn perturbation_l1(n: usize, r: u32) -> f64 {
    let s: f64 = (0..=r).map(inv_factorial).sum();
    n as f64 * s
}
