//! Truncated moment sequences and moment matrices.

use nalgebra::DMatrix;

use crate::error::MomentError;
use crate::linalg;
use crate::poly::{Monomial, MonomialBasis, Polynomial};

/// PSD tolerance relative to the largest diagonal entry.
pub const PSD_REL_TOL: f64 = 1e-8;

/// Values `y_α` for every `|α| <= order`, indexed like [`MonomialBasis`].
#[derive(Clone, Debug)]
pub struct MomentSequence {
    basis: MonomialBasis,
    values: Vec<f64>,
}

impl MomentSequence {
    pub fn new(n: usize, order: u32, values: Vec<f64>) -> Result<Self, MomentError> {
        let basis = MonomialBasis::new(n, order);
        if values.len() != basis.len() {
            return Err(MomentError::DimensionMismatch {
                expected: basis.len(),
                found: values.len(),
            });
        }
        Ok(Self { basis, values })
    }

    pub fn from_fn(n: usize, order: u32, f: impl Fn(&Monomial) -> f64) -> Self {
        let basis = MonomialBasis::new(n, order);
        let values = basis.monomials().iter().map(f).collect();
        Self { basis, values }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Largest `|α|` stored, i.e. `2r`.
    pub fn order(&self) -> u32 {
        self.basis.order()
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, alpha: &Monomial) -> Option<f64> {
        self.basis.index_of(alpha).map(|i| self.values[i])
    }

    pub fn y0(&self) -> f64 {
        self.values[0]
    }

    /// `y^{(i)}_{2k}`, the moment of `x_i^{2k}` (zero-based `i`).
    pub fn marginal(&self, i: usize, k: u32) -> Option<f64> {
        self.get(&Monomial::var_power(self.dim(), i, 2 * k))
    }

    /// `L_y(p) = Σ p_α y_α`.
    pub fn lin_functional(&self, p: &Polynomial) -> Result<f64, MomentError> {
        if p.dim() != self.dim() {
            return Err(MomentError::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        if p.degree() > self.order() {
            return Err(MomentError::DegreeExceeded {
                degree: p.degree(),
                order: self.order(),
            });
        }
        Ok(p
            .terms()
            .map(|(m, c)| c * self.get(m).expect("degree checked"))
            .sum())
    }

    pub fn moment_matrix(&self, r: u32) -> Result<MomentMatrix, MomentError> {
        MomentMatrix::build(self, r)
    }

    /// `pᵀ M_r(y) p` with `r = ⌈deg p⌉`-compatible half order of `y`.
    pub fn quad_form(&self, p: &Polynomial) -> Result<f64, MomentError> {
        let r = self.order() / 2;
        if p.degree() > r {
            return Err(MomentError::DegreeExceeded {
                degree: p.degree(),
                order: r,
            });
        }
        let mm = self.moment_matrix(r)?;
        let b = mm.basis();
        let v: Vec<f64> = b.monomials().iter().map(|m| p.coeff(m)).collect();
        let v = nalgebra::DVector::from_vec(v);
        Ok(v.dot(&(mm.entries() * &v)))
    }
}

/// `idx[i * s + j]` is the position of `α_i + α_j` in the basis of order `2r`.
pub fn moment_index_table(n: usize, r: u32) -> (MonomialBasis, MonomialBasis, Vec<usize>) {
    let half = MonomialBasis::new(n, r);
    let full = MonomialBasis::new(n, 2 * r);
    let s = half.len();
    let mut idx = vec![0; s * s];
    for i in 0..s {
        for j in i..s {
            let k = full
                .index_of(&half.get(i).mul(half.get(j)))
                .expect("sum of degree <= 2r");
            idx[i * s + j] = k;
            idx[j * s + i] = k;
        }
    }
    (half, full, idx)
}

/// `M_r(y)` with rows and columns indexed by `v_r(x)`.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    basis: MonomialBasis,
    entries: DMatrix<f64>,
}

impl MomentMatrix {
    pub fn build(y: &MomentSequence, r: u32) -> Result<Self, MomentError> {
        if y.order() < 2 * r {
            return Err(MomentError::DegreeExceeded {
                degree: 2 * r,
                order: y.order(),
            });
        }
        let basis = MonomialBasis::new(y.dim(), r);
        let s = basis.len();
        let mut entries = DMatrix::zeros(s, s);
        for i in 0..s {
            for j in i..s {
                let v = y
                    .get(&basis.get(i).mul(basis.get(j)))
                    .expect("order checked");
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(Self { basis, entries })
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.entries)
    }

    pub fn max_diagonal(&self) -> f64 {
        linalg::max_diagonal(&self.entries)
    }

    pub fn is_psd(&self, rel_tol: f64) -> bool {
        linalg::is_psd(&self.entries, rel_tol).0
    }
}

/// Moments of a finitely atomic probability measure.
pub fn moments_from_atoms(
    points: &[Vec<f64>],
    weights: &[f64],
    r: u32,
) -> Result<MomentSequence, MomentError> {
    let sum: f64 = weights.iter().sum();
    if weights.len() != points.len()
        || points.is_empty()
        || weights.iter().any(|&w| !(w >= 0.0))
        || (sum - 1.0).abs() > 1e-12
    {
        return Err(MomentError::InvalidWeights { sum });
    }
    let n = points[0].len();
    if n == 0 {
        return Err(MomentError::PointDimension {
            index: 0,
            expected: 1,
            found: 0,
        });
    }
    for (index, p) in points.iter().enumerate() {
        if p.len() != n {
            return Err(MomentError::PointDimension {
                index,
                expected: n,
                found: p.len(),
            });
        }
    }
    Ok(MomentSequence::from_fn(n, 2 * r, |m| {
        points
            .iter()
            .zip(weights)
            .map(|(x, w)| w * m.eval(x))
            .sum()
    }))
}

/// Moments of the uniform probability measure on `[-h, h]^n`, up to order `2r`.
pub fn uniform_box_moments(n: usize, r: u32, h: f64) -> MomentSequence {
    assert!(h > 0.0, "half-width must be positive");
    MomentSequence::from_fn(n, 2 * r, |m| {
        m.exponents()
            .iter()
            .map(|&a| {
                if a % 2 == 1 {
                    0.0
                } else {
                    h.powi(a as i32) / (a as f64 + 1.0)
                }
            })
            .product()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagViolation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagBoundReport {
    /// All marginal diagonal entries `y^{(i)}_{2k}`, `0 <= k <= r`, are `<= τ`.
    pub hypothesis: bool,
    /// `hypothesis ⟹ (every entry of M is bounded by τ)`.
    pub holds: bool,
    pub violation: Option<DiagViolation>,
}

/// Checks the diagonal-domination implication for a PSD moment matrix:
/// if every `y_{2k e_i}` is at most `τ` then so is every diagonal entry
/// `y_{2α}`, and every entry satisfies `|y_α| <= τ`.
pub fn diag_bound_check(m: &MomentMatrix, tau: f64) -> Result<DiagBoundReport, MomentError> {
    let (psd, min_eig) = linalg::is_psd(m.entries(), PSD_REL_TOL);
    if !psd {
        return Err(MomentError::NotPsd { min_eig });
    }
    let a = m.entries();
    let slack = tau.abs() * 1e-8;
    let s = m.size();
    // rows x_i^k (and the constant row) carry y_{2k e_i} on the diagonal
    let marginal = |mono: &Monomial| mono.exponents().iter().filter(|&&e| e > 0).count() <= 1;
    let hypothesis = (0..s)
        .filter(|&i| marginal(m.basis().get(i)))
        .all(|i| a[(i, i)] <= tau + slack);
    if !hypothesis {
        return Ok(DiagBoundReport {
            hypothesis,
            holds: true,
            violation: None,
        });
    }
    for i in 0..s {
        if a[(i, i)] > tau + slack {
            return Ok(DiagBoundReport {
                hypothesis,
                holds: false,
                violation: Some(DiagViolation {
                    row: i,
                    col: i,
                    value: a[(i, i)],
                }),
            });
        }
    }
    for i in 0..s {
        for j in 0..i {
            if a[(i, j)].abs() > tau + slack {
                return Ok(DiagBoundReport {
                    hypothesis,
                    holds: false,
                    violation: Some(DiagViolation {
                        row: i,
                        col: j,
                        value: a[(i, j)],
                    }),
                });
            }
        }
    }
    Ok(DiagBoundReport {
        hypothesis,
        holds: true,
        violation: None,
    })
}

/// Partial sums `Σ_{k=1}^{K} (y_{2k})^{-1/(2k)}` for `K = 1..=k_max`.
pub fn carleman_partial_sums(
    even_moment: impl Fn(u32) -> f64,
    k_max: u32,
) -> Result<Vec<f64>, MomentError> {
    let mut sums = Vec::with_capacity(k_max as usize);
    let mut acc = 0.0;
    for k in 1..=k_max {
        let y = even_moment(k);
        if !(y > 0.0) {
            return Err(MomentError::NonPositiveMoment {
                order: 2 * k,
                value: y,
            });
        }
        acc += y.powf(-1.0 / (2.0 * k as f64));
        sums.push(acc);
    }
    Ok(sums)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarlemanReport {
    pub variable: usize,
    pub partial_sums: Vec<f64>,
    /// Divergence is only ever indicated by a finite sum crossing `threshold`.
    pub indicated: bool,
    pub threshold: f64,
}

/// Carleman diagnostic for coordinate `i` using the moments stored in `y`.
pub fn carleman_report(
    y: &MomentSequence,
    i: usize,
    threshold: f64,
) -> Result<CarlemanReport, MomentError> {
    let k_max = y.order() / 2;
    let partial_sums = carleman_partial_sums(|k| y.marginal(i, k).unwrap_or(0.0), k_max)?;
    let indicated = partial_sums.last().is_some_and(|&s| s > threshold);
    Ok(CarlemanReport {
        variable: i,
        partial_sums,
        indicated,
        threshold,
    })
}
