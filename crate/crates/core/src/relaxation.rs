//! The moment relaxation with an exponential-moment budget and its SOS dual.
//!
//! Primal (over moments `y`, with `y_0 = 1` substituted):
//!
//! ```text
//! min  L_y(f)
//! s.t. M_r(y) ⪰ 0
//!      Σ_{k<=r} Σ_i y_{2k e_i} / k!  <=  n e^{M²}
//! ```
//!
//! Dual: `max γ - n e^{M²} λ` subject to `f - γ = q - λ Θ_r`, `q` SOS of
//! degree at most `2r`, `λ >= 0`.

use nalgebra::DMatrix;

use crate::error::RelaxationError;
use crate::moment::{moment_index_table, uniform_box_moments, MomentSequence};
use crate::poly::{inv_factorial, perturbation_series, MonomialBasis, Polynomial};

/// `e^{M²}` stays finite in `f64` up to here.
pub const MAX_RADIUS: f64 = 26.0;
/// Largest relaxation order accepted; keeps `1/k!` far from underflow.
pub const MAX_ORDER: u32 = 20;
/// Radii swept when none are given.
pub const DEFAULT_RADII: [f64; 5] = [1.0, 1.5, 2.0, 2.5, 3.0];

/// `n e^{M²}`.
pub fn exp_budget(n: usize, radius: f64) -> Result<f64, RelaxationError> {
    if !(radius >= 0.0) || radius > MAX_RADIUS {
        return Err(RelaxationError::InvalidRadius {
            radius,
            max: MAX_RADIUS,
        });
    }
    Ok(n as f64 * (radius * radius).exp())
}

/// Smallest admissible relaxation order for `f`: `⌈deg f / 2⌉`, at least 1.
pub fn min_order(f: &Polynomial) -> u32 {
    f.degree().div_ceil(2).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationConfig {
    pub r: u32,
    pub radius: f64,
    pub tol: f64,
}

impl RelaxationConfig {
    pub fn new(r: u32, radius: f64, tol: f64) -> Result<Self, RelaxationError> {
        let cfg = Self { r, radius, tol };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RelaxationError> {
        if !(self.radius > 0.0) || self.radius > MAX_RADIUS {
            return Err(RelaxationError::InvalidRadius {
                radius: self.radius,
                max: MAX_RADIUS,
            });
        }
        if self.r > MAX_ORDER {
            return Err(RelaxationError::OrderTooLarge {
                r: self.r,
                max: MAX_ORDER,
            });
        }
        if !(1e-10..=1e-4).contains(&self.tol) {
            return Err(RelaxationError::InvalidTolerance(self.tol));
        }
        Ok(())
    }

    pub fn validate_for(&self, f: &Polynomial) -> Result<(), RelaxationError> {
        self.validate()?;
        if 2 * self.r < f.degree() || self.r == 0 {
            return Err(RelaxationError::OrderTooSmall {
                r: self.r,
                degree: f.degree(),
            });
        }
        Ok(())
    }
}

/// `Q_r` in solver-neutral form.
///
/// Variables are the moments `y_α`, `0 < |α| <= 2r`, in basis order
/// (variable `k` is the `(k+1)`-th element of the order-`2r` basis).
#[derive(Clone, Debug)]
pub struct SdpProblem {
    n: usize,
    r: u32,
    radius: f64,
    f: Polynomial,
    basis: MonomialBasis,
    full: MonomialBasis,
    /// `idx[i*s + j]`: position of `α_i + α_j` in `full`; 0 is `y_0`.
    idx: Vec<usize>,
    /// Coefficient of `f` for every element of `full` (entry 0 is `f_0`).
    objective: Vec<f64>,
    /// `1/k!` for entries `x_i^{2k}`, `k >= 1`, of `full`; zero elsewhere.
    budget: Vec<f64>,
    budget_bound: f64,
}

impl SdpProblem {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u32 {
        self.r
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.f
    }

    /// `v_r`, the row/column basis of the PSD block.
    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// Basis of order `2r` indexing the moments.
    pub fn moment_basis(&self) -> &MonomialBasis {
        &self.full
    }

    pub fn num_vars(&self) -> usize {
        self.full.len() - 1
    }

    pub fn psd_size(&self) -> usize {
        self.basis.len()
    }

    pub fn index_table(&self) -> &[usize] {
        &self.idx
    }

    /// Coefficients of `f` over the order-`2r` basis, constant first.
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    /// Budget-row coefficients over the order-`2r` basis (the `k = 0` layer,
    /// worth `n y_0 = n`, is kept out of this vector).
    pub fn budget_coefficients(&self) -> &[f64] {
        &self.budget
    }

    /// `n e^{M²}`.
    pub fn budget_bound(&self) -> f64 {
        self.budget_bound
    }

    /// Factor applied to the budget row before solving.
    pub fn budget_scale(&self) -> f64 {
        (-self.radius * self.radius).exp()
    }

    fn check_sequence(&self, y: &MomentSequence) -> Result<(), RelaxationError> {
        if y.dim() != self.n || y.order() != 2 * self.r {
            return Err(RelaxationError::SequenceShape {
                expected: self.full.len(),
                found: y.values().len(),
            });
        }
        Ok(())
    }

    pub fn objective_value(&self, y: &MomentSequence) -> Result<f64, RelaxationError> {
        self.check_sequence(y)?;
        Ok(self
            .objective
            .iter()
            .zip(y.values())
            .map(|(c, v)| c * v)
            .sum())
    }

    /// `Σ_{k<=r} Σ_i y_{2k e_i}/k!`, including the `k = 0` layer `n y_0`.
    pub fn budget_value(&self, y: &MomentSequence) -> Result<f64, RelaxationError> {
        self.check_sequence(y)?;
        let tail: f64 = self
            .budget
            .iter()
            .zip(y.values())
            .map(|(c, v)| c * v)
            .sum();
        Ok(self.n as f64 * y.y0() + tail)
    }

    /// `M_r(y)` built from the PSD map.
    pub fn moment_matrix(&self, y: &MomentSequence) -> Result<DMatrix<f64>, RelaxationError> {
        self.check_sequence(y)?;
        let s = self.basis.len();
        let v = y.values();
        Ok(DMatrix::from_fn(s, s, |i, j| v[self.idx[i * s + j]]))
    }
}

/// Assembles `Q_r` for `f`.
pub fn build_primal(f: &Polynomial, cfg: &RelaxationConfig) -> Result<SdpProblem, RelaxationError> {
    cfg.validate_for(f)?;
    let n = f.dim();
    let (basis, full, idx) = moment_index_table(n, cfg.r);
    let objective = full.monomials().iter().map(|m| f.coeff(m)).collect();
    let budget = full
        .monomials()
        .iter()
        .map(|m| match m.as_even_pure_power() {
            Some((_, k)) => inv_factorial(k),
            None => 0.0,
        })
        .collect();
    Ok(SdpProblem {
        n,
        r: cfg.r,
        radius: cfg.radius,
        f: f.clone(),
        basis,
        full,
        idx,
        objective,
        budget,
        budget_bound: exp_budget(n, cfg.radius)?,
    })
}

/// A point `(γ, λ, G)` of the dual problem.
#[derive(Clone, Debug, PartialEq)]
pub struct DualShape {
    pub gamma: f64,
    pub lambda: f64,
    pub gram: DMatrix<f64>,
}

/// `γ - n e^{M²} λ`.
pub fn dual_objective(d: &DualShape, n: usize, radius: f64) -> Result<f64, RelaxationError> {
    if d.lambda < 0.0 {
        return Err(RelaxationError::NegativeLambda(d.lambda));
    }
    Ok(d.gamma - exp_budget(n, radius)? * d.lambda)
}

/// `v_rᵀ G v_r` as a polynomial.
pub fn gram_polynomial(gram: &DMatrix<f64>, basis: &MonomialBasis) -> Result<Polynomial, RelaxationError> {
    let s = basis.len();
    if gram.nrows() != s || gram.ncols() != s {
        return Err(RelaxationError::GramDimension {
            expected: s,
            found: gram.nrows(),
        });
    }
    let mut p = Polynomial::zero(basis.dim());
    for i in 0..s {
        for j in 0..s {
            p.add_term(basis.get(i).mul(basis.get(j)), gram[(i, j)]);
        }
    }
    Ok(p)
}

/// `f - γ - v_rᵀ G v_r + λ Θ_r`; zero exactly when `d` is dual feasible.
pub fn dual_residual(
    f: &Polynomial,
    d: &DualShape,
    r: u32,
    n: usize,
) -> Result<Polynomial, RelaxationError> {
    if f.dim() != n {
        return Err(crate::error::PolyError::DimensionMismatch {
            expected: n,
            found: f.dim(),
        }
        .into());
    }
    let basis = MonomialBasis::new(n, r);
    let q = gram_polynomial(&d.gram, &basis)?;
    let mut res = f.sub(&q)?;
    res.add_term(crate::poly::Monomial::one(n), -d.gamma);
    Ok(res.add(&perturbation_series(n, r).scale(d.lambda))?)
}

/// Moments of the uniform measure on `[-M/2, M/2]^n`: a strictly feasible
/// point of `Q_r`.
pub fn feasible_start(cfg: &RelaxationConfig, n: usize) -> MomentSequence {
    uniform_box_moments(n, cfg.r, cfg.radius / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use crate::moment::moments_from_atoms;
    use crate::poly::parse;
    use std::f64::consts::E;

    const MOTZKIN: &str = "x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1";

    #[test]
    fn exp_budget_examples() {
        assert!((exp_budget(2, 1.0).unwrap() - 5.436563657).abs() < 1e-9);
        assert_eq!(exp_budget(1, 0.0).unwrap(), 1.0);
        assert!((exp_budget(3, 2.0).unwrap() - 3.0 * E.powi(4)).abs() < 1e-9);
        assert!((exp_budget(3, 2.0).unwrap() - 163.794).abs() < 1e-3);
        assert!(exp_budget(1, 27.0).is_err());
    }

    #[test]
    fn square_instance_layout() {
        let f = parse("x1^2", 1).unwrap();
        let p = build_primal(&f, &RelaxationConfig::new(1, 1.0, 1e-8).unwrap()).unwrap();
        assert_eq!(p.num_vars(), 2);
        assert_eq!(p.psd_size(), 2);
        assert_eq!(p.objective(), &[0.0, 0.0, 1.0]);
        assert_eq!(p.budget_coefficients(), &[0.0, 0.0, 1.0]);
        assert!((p.budget_bound() - E).abs() < 1e-15);
        // at y = (1, 0, 0): value 0, budget 1 + 0 <= e
        let y = MomentSequence::new(1, 2, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.objective_value(&y).unwrap(), 0.0);
        assert_eq!(p.budget_value(&y).unwrap(), 1.0);
        assert_eq!(p.moment_matrix(&y).unwrap(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn constant_objective() {
        let f = Polynomial::constant(2, 3.5);
        let p = build_primal(&f, &RelaxationConfig::new(1, 1.0, 1e-8).unwrap()).unwrap();
        let y = feasible_start(&RelaxationConfig::new(1, 1.0, 1e-8).unwrap(), 2);
        assert_eq!(p.objective_value(&y).unwrap(), 3.5);
    }

    #[test]
    fn motzkin_counts() {
        let f = parse(MOTZKIN, 2).unwrap();
        let p = build_primal(&f, &RelaxationConfig::new(3, 2.0, 1e-8).unwrap()).unwrap();
        assert_eq!(p.num_vars(), 27);
        assert_eq!(p.psd_size(), 10);
        assert!((p.budget_bound() - 2.0 * E.powi(4)).abs() < 1e-9);
        assert!(matches!(
            build_primal(&f, &RelaxationConfig::new(2, 2.0, 1e-8).unwrap()),
            Err(RelaxationError::OrderTooSmall { .. })
        ));
    }

    #[test]
    fn objective_matches_lin_functional() {
        let f = parse(MOTZKIN, 2).unwrap();
        let cfg = RelaxationConfig::new(3, 1.5, 1e-8).unwrap();
        let p = build_primal(&f, &cfg).unwrap();
        let y = moments_from_atoms(&[vec![0.3, -1.2], vec![1.0, 0.5]], &[0.4, 0.6], 3).unwrap();
        let a = p.objective_value(&y).unwrap();
        let b = y.lin_functional(&f).unwrap();
        assert!((a - b).abs() < 1e-12);
        let mm = y.moment_matrix(3).unwrap();
        assert_eq!(&p.moment_matrix(&y).unwrap(), mm.entries());
    }

    #[test]
    fn dual_objective_examples() {
        let g = DMatrix::zeros(2, 2);
        let d = DualShape { gamma: 1.0, lambda: 0.0, gram: g.clone() };
        assert_eq!(dual_objective(&d, 1, 1.0).unwrap(), 1.0);
        let d = DualShape { gamma: 0.0, lambda: 1.0, gram: g.clone() };
        assert!((dual_objective(&d, 1, 1.0).unwrap() + E).abs() < 1e-15);
        let d = DualShape { gamma: 0.0, lambda: -1.0, gram: g };
        assert!(dual_objective(&d, 1, 1.0).is_err());
    }

    #[test]
    fn dual_residual_examples() {
        let f = parse("x1^2", 1).unwrap();
        let d = DualShape {
            gamma: 0.0,
            lambda: 0.0,
            gram: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        };
        assert!(dual_residual(&f, &d, 1, 1).unwrap().is_zero());
        let d = DualShape {
            gamma: -1.0,
            lambda: 0.0,
            gram: DMatrix::identity(2, 2),
        };
        assert!(dual_residual(&f, &d, 1, 1).unwrap().is_zero());
        let mut d = d;
        d.gram[(1, 1)] += 1e-3;
        let res = dual_residual(&f, &d, 1, 1).unwrap();
        assert!((res.l1_norm() - 1e-3).abs() < 1e-15);
        let bad = DualShape { gamma: 0.0, lambda: 0.0, gram: DMatrix::identity(3, 3) };
        assert!(dual_residual(&f, &bad, 1, 1).is_err());
    }

    #[test]
    fn feasible_start_is_strict() {
        let cfg = RelaxationConfig::new(1, 2.0, 1e-8).unwrap();
        let y = feasible_start(&cfg, 1);
        assert_eq!(y.values(), &[1.0, 0.0, 1.0 / 3.0]);
        let p = build_primal(&parse("x1^2", 1).unwrap(), &cfg).unwrap();
        assert!((p.budget_value(&y).unwrap() - 4.0 / 3.0).abs() < 1e-15);

        let cfg = RelaxationConfig::new(2, 2.0, 1e-8).unwrap();
        let y = feasible_start(&cfg, 2);
        assert!(y.moment_matrix(2).unwrap().min_eigenvalue() > 0.0);

        for n in 1..=4 {
            for radius in [1.0, 2.0, 3.0] {
                for r in 1..=4 {
                    let cfg = RelaxationConfig::new(r, radius, 1e-8).unwrap();
                    let p = build_primal(&Polynomial::zero(n), &cfg).unwrap();
                    let y = feasible_start(&cfg, n);
                    assert!(p.budget_value(&y).unwrap() < p.budget_bound());
                    let h = radius / 2.0;
                    let oracle: f64 = (0..=r)
                        .map(|k| h.powi(2 * k as i32) / ((2 * k + 1) as f64) * inv_factorial(k))
                        .sum::<f64>()
                        * n as f64;
                    assert!((p.budget_value(&y).unwrap() - oracle).abs() < 1e-12 * oracle);
                    if n <= 2 {
                        assert!(min_eigenvalue(&p.moment_matrix(&y).unwrap()) > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn atomic_measures_in_box_respect_budget() {
        let cfg = RelaxationConfig::new(3, 1.5, 1e-8).unwrap();
        let p = build_primal(&Polynomial::zero(2), &cfg).unwrap();
        for pts in [
            vec![vec![1.5, -1.5]],
            vec![vec![0.0, 0.0], vec![1.5, 1.0]],
            vec![vec![-1.5, 0.2], vec![0.7, 1.49]],
        ] {
            let w = vec![1.0 / pts.len() as f64; pts.len()];
            let y = moments_from_atoms(&pts, &w, 3).unwrap();
            assert!(p.budget_value(&y).unwrap() <= p.budget_bound());
        }
    }
}
