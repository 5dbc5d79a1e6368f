//! Explicit SOS certificates for `f_ε = f + ε Θ_r`.
//!
//! A dual solution `(γ, λ_M, G)` of the relaxation of `f̃ = f + nε` gives
//! `f̃ + λ_M Θ_{r_M} = v'Gv + γ`. When `λ_M <= ε` the difference between
//! that identity and `f + ε Θ_r` is a nonnegative constant plus nonnegative
//! multiples of `x_j^{2k}`, all of which fold into the Gram diagonal.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CertificateError;
use crate::linalg;
use crate::poly::{inv_factorial, perturbation_l1, perturbation_series, Monomial, MonomialBasis, Polynomial};
use crate::relaxation::{build_primal, feasible_start, gram_polynomial, min_order, RelaxationConfig};
use crate::sampling;
use crate::sdp::{solve, SdpSolution, SolveStatus};

/// Eigenvalues below `-CLIP_REL * trace` make a Gram matrix unusable.
pub const CLIP_REL: f64 = 1e-9;
/// Identity residual accepted by [`verify`], relative to `1 + ‖f_ε‖₁`.
pub const VERIFY_REL: f64 = 1e-6;
/// Eigenvalue floor accepted by [`verify`], relative to `max(1, max diag)`.
pub const EIG_FLOOR_REL: f64 = 1e-8;
/// Relative agreement required between a stored and recomputed `l1_gap`.
pub const L1_GAP_REL: f64 = 1e-12;
/// A sampled value below this rejects the input as negative.
pub const NEGATIVITY_TOL: f64 = 1e-9;

/// `f + ε Θ_r`.
pub fn build_f_eps(f: &Polynomial, eps: f64, r_eps: u32) -> Polynomial {
    f.add(&perturbation_series(f.dim(), r_eps).scale(eps))
        .expect("same dimension")
}

/// `‖f - f_ε‖₁ = ε n Σ_{k<=r} 1/k!`.
pub fn l1_gap(eps: f64, n: usize, r_eps: u32) -> f64 {
    eps * perturbation_l1(n, r_eps)
}

/// Factors a PSD Gram matrix into squares `s_i = √μ_i (u_iᵀ v)`.
///
/// Diagonal matrices are factored term by term. Otherwise the spectral
/// decomposition is used with nonpositive eigenvalues dropped.
pub fn gram_to_squares(g: &DMatrix<f64>, basis: &MonomialBasis) -> Result<Vec<Polynomial>, CertificateError> {
    let s = basis.len();
    if g.nrows() != s || g.ncols() != s {
        return Err(CertificateError::Malformed(format!(
            "Gram matrix is {}x{}, basis has {s} elements",
            g.nrows(),
            g.ncols()
        )));
    }
    let n = basis.dim();
    let is_diag = (0..s).all(|i| (0..s).all(|j| i == j || g[(i, j)] == 0.0));
    if is_diag {
        let mut out = Vec::new();
        for i in 0..s {
            let d = g[(i, i)];
            if d < 0.0 {
                return Err(CertificateError::Indefinite { min_eig: d });
            }
            if d > 0.0 {
                out.push(Polynomial::from_terms(n, [(basis.get(i).clone(), d.sqrt())]));
            }
        }
        return Ok(out);
    }

    let trace = g.trace().max(0.0);
    let eig = SymmetricEigen::new(g.clone());
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -CLIP_REL * trace {
        return Err(CertificateError::Indefinite { min_eig });
    }
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = Vec::new();
    for k in order {
        let mu = eig.eigenvalues[k];
        if mu <= 0.0 {
            continue;
        }
        let u = eig.eigenvectors.column(k);
        let lead = u.iter().copied().find(|v| *v != 0.0).unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        let root = mu.sqrt();
        let sq = Polynomial::from_terms(
            n,
            (0..s).map(|i| (basis.get(i).clone(), sign * root * u[i])),
        );
        if !sq.is_zero() {
            out.push(sq);
        }
    }
    Ok(out)
}

pub fn sum_of_squares(squares: &[Polynomial], n: usize) -> Result<Polynomial, CertificateError> {
    let mut acc = Polynomial::zero(n);
    for s in squares {
        acc = acc.add(&s.square())?;
    }
    Ok(acc)
}

/// The `λ_M` bound `(1/M + f(0) - f*) / (n (e^{M²} - 1))`.
pub fn lambda_bound(radius: f64, f_at_0: f64, f_star_lb: f64, n: usize) -> Result<f64, CertificateError> {
    if !(radius > 0.0) || n == 0 {
        return Err(CertificateError::Precondition(format!(
            "need M > 0 and n >= 1 (M = {radius}, n = {n})"
        )));
    }
    if !(f_star_lb >= 0.0) || f_at_0 < f_star_lb {
        return Err(CertificateError::Precondition(format!(
            "need 0 <= f* <= f(0) (f* = {f_star_lb}, f(0) = {f_at_0})"
        )));
    }
    let denom = n as f64 * (radius * radius).exp_m1();
    Ok((1.0 / radius + f_at_0 - f_star_lb) / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Box radius `M` of the relaxation that produced the Gram matrix.
    pub radius: f64,
    /// Relaxation order `r_M`.
    pub order: u32,
    pub lambda_m: f64,
    pub gamma_m: f64,
    pub dual_value: f64,
    pub solver_gap: f64,
    pub iterations: usize,
    /// Constant `δ` added to `f` before solving (`f̃ = f + δ`).
    pub shift: f64,
    /// Heuristic `λ_M` bound at this radius, when one applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_bound: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SosCertificate {
    pub n: usize,
    pub epsilon: f64,
    pub r_eps: u32,
    pub basis: MonomialBasis,
    pub gram: DMatrix<f64>,
    pub squares: Vec<Polynomial>,
    pub identity_residual: f64,
    pub l1_gap: f64,
    pub provenance: Option<Provenance>,
}

impl SosCertificate {
    /// Certificate for `f_ε` from an explicit PSD Gram matrix.
    pub fn from_gram(
        f: &Polynomial,
        epsilon: f64,
        r_eps: u32,
        basis: MonomialBasis,
        gram: DMatrix<f64>,
        provenance: Option<Provenance>,
    ) -> Result<Self, CertificateError> {
        let n = f.dim();
        let squares = gram_to_squares(&gram, &basis)?;
        let f_eps = build_f_eps(f, epsilon, r_eps);
        let identity_residual = f_eps.sub(&sum_of_squares(&squares, n)?)?.l1_norm();
        Ok(Self {
            n,
            epsilon,
            r_eps,
            basis,
            gram,
            squares,
            identity_residual,
            l1_gap: l1_gap(epsilon, n, r_eps),
            provenance,
        })
    }

    pub fn basis_order(&self) -> u32 {
        self.basis.order()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub passed: bool,
    /// `max(‖f_ε - Σ s_i²‖₁, ‖f_ε - v'Gv‖₁)`.
    pub identity_residual: f64,
    pub squares_residual: f64,
    pub gram_residual: f64,
    pub gram_min_eigenvalue: f64,
    pub l1_gap: f64,
    pub l1_gap_matches: bool,
    pub tolerance: f64,
}

/// Rechecks a certificate against `f` with polynomial arithmetic and one
/// eigendecomposition.
pub fn verify(f: &Polynomial, cert: &SosCertificate) -> Result<VerificationReport, CertificateError> {
    if f.dim() != cert.n || cert.basis.dim() != cert.n {
        return Err(CertificateError::Malformed(format!(
            "dimension mismatch: f has {}, certificate has {}",
            f.dim(),
            cert.n
        )));
    }
    let f_eps = build_f_eps(f, cert.epsilon, cert.r_eps);
    verify_identity(&f_eps, cert)
}

/// Checks `target = Σ s_i² = v'Gv` and the Gram eigenvalue floor.
pub(crate) fn verify_identity(target: &Polynomial, cert: &SosCertificate) -> Result<VerificationReport, CertificateError> {
    let s = cert.basis.len();
    if cert.gram.nrows() != s || cert.gram.ncols() != s {
        return Err(CertificateError::Malformed(format!(
            "Gram matrix is {}x{}, basis of order {} has {s} elements",
            cert.gram.nrows(),
            cert.gram.ncols(),
            cert.basis.order()
        )));
    }
    if cert.squares.iter().any(|q| q.dim() != cert.n) {
        return Err(CertificateError::Malformed("square of wrong dimension".into()));
    }
    if !(cert.epsilon >= 0.0) {
        return Err(CertificateError::Malformed(format!("negative epsilon {}", cert.epsilon)));
    }
    let n = cert.n;
    let squares_residual = target.sub(&sum_of_squares(&cert.squares, n)?)?.l1_norm();
    let gram_poly = gram_polynomial(&cert.gram, &cert.basis)?;
    let gram_residual = target.sub(&gram_poly)?.l1_norm();
    let gram_min_eigenvalue = linalg::min_eigenvalue(&cert.gram);
    let floor = -EIG_FLOOR_REL * linalg::max_diagonal(&cert.gram).max(1.0);
    let expected_gap = l1_gap(cert.epsilon, n, cert.r_eps);
    let l1_gap_matches = (expected_gap - cert.l1_gap).abs() <= L1_GAP_REL * expected_gap.max(f64::MIN_POSITIVE);
    let tolerance = VERIFY_REL * (1.0 + target.l1_norm());
    let identity_residual = squares_residual.max(gram_residual);
    Ok(VerificationReport {
        passed: identity_residual <= tolerance && gram_min_eigenvalue >= floor && l1_gap_matches,
        identity_residual,
        squares_residual,
        gram_residual,
        gram_min_eigenvalue,
        l1_gap: expected_gap,
        l1_gap_matches,
        tolerance,
    })
}

/// Rejects `f` if it is detectably negative at the origin, on a grid, or at
/// random points.
pub fn screen_nonnegative(f: &Polynomial) -> Result<(), CertificateError> {
    let n = f.dim();
    let mut pts = vec![vec![0.0; n]];
    if n <= 3 {
        pts.extend(sampling::grid_points(n, 2.0, 9));
    }
    pts.extend(sampling::box_points(&vec![0.0; n], 3.0, 2000, sampling::DEFAULT_SEED));
    for x in pts {
        let v = f.evaluate(&x)?;
        if v < -NEGATIVITY_TOL {
            return Err(CertificateError::NegativeInput { point: x, value: v });
        }
    }
    Ok(())
}

/// A solved relaxation of `f̃ = f + shift`, ready for certificate assembly.
#[derive(Clone, Debug)]
pub struct DualCell {
    pub radius: f64,
    pub order: u32,
    pub shift: f64,
    pub solution: SdpSolution,
}

impl DualCell {
    /// Gram matrix of `f̃ - offset + λ Θ_r` for `λ >= λ_M` and `r >= r_M`.
    /// With `offset = shift` this is `f + λ Θ_r`.
    ///
    /// Built from `f̃ + λ_M Θ_{r_M} = v'Gv + γ`.
    pub fn assemble(&self, lambda: f64, r: u32, offset: f64) -> Result<(MonomialBasis, DMatrix<f64>), CertificateError> {
        let dual = &self.solution.dual;
        let lambda_m = dual.lambda.max(0.0);
        if lambda < lambda_m || r < self.order {
            return Err(CertificateError::Precondition(format!(
                "need λ >= λ_M and r >= r_M (λ = {lambda}, λ_M = {lambda_m}, r = {r}, r_M = {})",
                self.order
            )));
        }
        let n = self.solution.primal.dim();
        let basis = MonomialBasis::new(n, r);
        let s_m = dual.gram.nrows();
        let mut g = DMatrix::zeros(basis.len(), basis.len());
        g.view_mut((0, 0), (s_m, s_m)).copy_from(&dual.gram);
        // λΘ_r - λ_MΘ_{r_M}: constant layer and the x_j^{2k} diagonal
        g[(0, 0)] += dual.gamma - offset + n as f64 * (lambda - lambda_m);
        for k in 1..=r {
            let mut c = (lambda - lambda_m) * inv_factorial(k);
            if k > self.order {
                c += lambda_m * inv_factorial(k);
            }
            if c == 0.0 {
                continue;
            }
            for j in 0..n {
                let i = basis
                    .index_of(&Monomial::var_power(n, j, k))
                    .expect("x_j^k is in v_r");
                g[(i, i)] += c;
            }
        }
        Ok((basis, g))
    }

    pub fn provenance(&self, lambda_bound: Option<f64>) -> Provenance {
        let sol = &self.solution;
        Provenance {
            radius: self.radius,
            order: self.order,
            lambda_m: sol.dual.lambda,
            gamma_m: sol.dual.gamma,
            dual_value: sol.dual_value,
            solver_gap: sol.gap,
            iterations: sol.iterations,
            shift: self.shift,
            lambda_bound,
        }
    }
}

/// Solves the relaxation of `f + shift` at one `(M, r)` cell.
pub fn solve_cell(f: &Polynomial, shift: f64, radius: f64, r: u32, tol: f64) -> Result<DualCell, CertificateError> {
    let mut shifted = f.clone();
    shifted.add_term(Monomial::one(f.dim()), shift);
    let cfg = RelaxationConfig::new(r, radius, tol)?;
    let prob = build_primal(&shifted, &cfg)?;
    let solution = solve(&prob, &feasible_start(&cfg, f.dim()), tol)?;
    Ok(DualCell {
        radius,
        order: r,
        shift,
        solution,
    })
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub certificate: SosCertificate,
    pub cell: DualCell,
    pub report: VerificationReport,
}

/// Solver tolerance used by [`find_r_eps`].
pub const SEARCH_TOL: f64 = 1e-8;

/// Searches `(M, r)` cells in order until the relaxation of `f + nε` has
/// `λ_M <= ε`, then assembles and verifies a certificate for `f_ε`.
pub fn find_r_eps(f: &Polynomial, eps: f64, schedule: &[(f64, u32)]) -> Result<SosCertificate, CertificateError> {
    find_r_eps_with(f, eps, schedule, SEARCH_TOL).map(|o| o.certificate)
}

pub fn find_r_eps_with(
    f: &Polynomial,
    eps: f64,
    schedule: &[(f64, u32)],
    tol: f64,
) -> Result<SearchOutcome, CertificateError> {
    if !(eps > 0.0) {
        return Err(CertificateError::InvalidEpsilon(eps));
    }
    if schedule.is_empty() {
        return Err(CertificateError::EmptySchedule);
    }
    screen_nonnegative(f)?;
    let n = f.dim();
    let shift = n as f64 * eps;
    let f_at_0 = f.constant_term() + shift;
    let r_min = min_order(f);

    let cells: Vec<(f64, u32)> = schedule.iter().copied().filter(|&(_, r)| r >= r_min).collect();
    let batch = rayon::current_num_threads().max(1);

    let mut best_lambda = f64::INFINITY;
    let mut lower_bound = 0.0f64;
    let mut skipped: Vec<f64> = Vec::new();
    let mut pos = 0;
    while pos < cells.len() {
        let mut chunk = Vec::with_capacity(batch);
        while pos < cells.len() && chunk.len() < batch {
            let (radius, r) = cells[pos];
            if !skipped.contains(&radius) {
                chunk.push((radius, r));
            }
            pos += 1;
        }
        let solved: Vec<Result<DualCell, CertificateError>> = chunk
            .par_iter()
            .map(|&(radius, r)| solve_cell(f, shift, radius, r, tol))
            .collect();
        for cell in solved {
            let cell = cell?;
            if skipped.contains(&cell.radius) {
                continue;
            }
            let sol = &cell.solution;
            if sol.status != SolveStatus::Optimal {
                continue;
            }
            lower_bound = lower_bound.max(sol.primal_value);
            let lambda_m = sol.dual.lambda.max(0.0);
            best_lambda = best_lambda.min(lambda_m);
            let bound = lambda_bound(cell.radius, f_at_0, lower_bound.clamp(0.0, f_at_0), n).ok();

            if lambda_m <= eps {
                let (basis, gram) = cell.assemble(eps, cell.order, shift)?;
                let prov = cell.provenance(bound);
                if let Ok(cert) = SosCertificate::from_gram(f, eps, cell.order, basis, gram, Some(prov)) {
                    let report = verify(f, &cert)?;
                    if report.passed {
                        return Ok(SearchOutcome {
                            certificate: cert,
                            cell,
                            report,
                        });
                    }
                }
            } else if lower_bound > 1.0 / cell.radius
                && bound.is_some_and(|b| b > eps)
                && cells[pos..].iter().any(|c| c.0 > cell.radius)
            {
                // the bound cannot reach ε at this radius; try a larger one
                skipped.push(cell.radius);
            }
        }
    }
    Err(CertificateError::ScheduleExhausted {
        best_lambda,
        target: eps,
    })
}

/// `M`-major schedule: every `r` in `orders` for each radius in turn.
pub fn schedule(radii: &[f64], orders: impl IntoIterator<Item = u32> + Clone) -> Vec<(f64, u32)> {
    radii
        .iter()
        .flat_map(|&m| orders.clone().into_iter().map(move |r| (m, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse;

    const MOTZKIN: &str = "x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1";

    #[test]
    fn f_eps_examples() {
        let z = Polynomial::zero(1);
        assert_eq!(build_f_eps(&z, 1.0, 2), parse("1 + x1^2 + 0.5*x1^4", 1).unwrap());
        let m = parse(MOTZKIN, 2).unwrap();
        assert_eq!(build_f_eps(&m, 0.0, 3), m);
        let fe = build_f_eps(&m, 0.1, 3);
        assert!((fe.constant_term() - 1.2).abs() < 1e-15);
        assert_eq!(fe.coeff(&Monomial::new(vec![2, 0])), 0.1);
    }

    #[test]
    fn l1_gap_examples() {
        assert!((l1_gap(0.1, 2, 3) - 0.1 * 2.0 * 8.0 / 3.0).abs() < 1e-15);
        assert!((l1_gap(0.1, 2, 3) - 0.53333).abs() < 1e-5);
        assert_eq!(l1_gap(0.0, 3, 5), 0.0);
        assert!((l1_gap(1.0, 1, 20) - std::f64::consts::E).abs() < 1e-12);
        let m = parse(MOTZKIN, 2).unwrap();
        let direct = m.sub(&build_f_eps(&m, 0.3, 4)).unwrap().l1_norm();
        assert!((direct - l1_gap(0.3, 2, 4)).abs() < 1e-14);
    }

    #[test]
    fn squares_examples() {
        let b = MonomialBasis::new(1, 1);
        let sq = gram_to_squares(&DMatrix::identity(2, 2), &b).unwrap();
        assert_eq!(sq, vec![Polynomial::constant(1, 1.0), Polynomial::var(1, 0)]);

        let g = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let sq = gram_to_squares(&g, &b).unwrap();
        assert_eq!(sq.len(), 1);
        let sum = sum_of_squares(&sq, 1).unwrap();
        assert!(sum.sub(&parse("1 - 2*x1 + x1^2", 1).unwrap()).unwrap().l1_norm() < 1e-14);

        assert!(gram_to_squares(&DMatrix::zeros(2, 2), &b).unwrap().is_empty());

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(gram_to_squares(&bad, &b), Err(CertificateError::Indefinite { .. })));
    }

    fn theta_certificate(n: usize, r: u32) -> SosCertificate {
        let basis = MonomialBasis::new(n, r);
        let mut g = DMatrix::zeros(basis.len(), basis.len());
        g[(0, 0)] = n as f64;
        for k in 1..=r {
            for j in 0..n {
                let i = basis.index_of(&Monomial::var_power(n, j, k)).unwrap();
                g[(i, i)] = inv_factorial(k);
            }
        }
        SosCertificate::from_gram(&Polynomial::zero(n), 1.0, r, basis, g, None).unwrap()
    }

    #[test]
    fn theta_is_manifestly_sos() {
        let c = theta_certificate(1, 2);
        assert_eq!(c.squares.len(), 3);
        assert!((c.squares[2].coeff(&Monomial::new(vec![2])) - 0.5f64.sqrt()).abs() < 1e-16);
        let rep = verify(&Polynomial::zero(1), &c).unwrap();
        assert!(rep.passed);
        assert!(rep.identity_residual <= 1e-15);
        for n in 1..=4 {
            for r in 0..=10 {
                let c = theta_certificate(n, r);
                let rep = verify(&Polynomial::zero(n), &c).unwrap();
                assert!(rep.passed);
                assert_eq!(rep.gram_residual, 0.0);
                assert!(rep.squares_residual <= 4.0 * f64::EPSILON * perturbation_l1(n, r));
            }
        }
    }

    #[test]
    fn tampered_gram_fails() {
        let mut c = theta_certificate(1, 2);
        c.gram[(1, 1)] += 1e-3;
        let rep = verify(&Polynomial::zero(1), &c).unwrap();
        assert!(!rep.passed);
        assert!((rep.gram_residual - 1e-3).abs() < 1e-12);

        let mut c = theta_certificate(1, 2);
        assert_eq!(c.l1_gap.to_bits(), l1_gap(1.0, 1, 2).to_bits());
        c.l1_gap *= 1.0 + 1e-9;
        assert!(!verify(&Polynomial::zero(1), &c).unwrap().passed);

        let c = theta_certificate(2, 2);
        assert!(matches!(
            verify(&Polynomial::zero(1), &c),
            Err(CertificateError::Malformed(_))
        ));
    }

    #[test]
    fn lambda_bound_examples() {
        let b = lambda_bound(2.0, 1.0, 0.0, 2).unwrap();
        assert!((b - 1.5 / (2.0 * (4f64.exp() - 1.0))).abs() < 1e-15);
        assert!((b - 0.013993).abs() < 1e-6);
        assert!(lambda_bound(3.0, 1.0, 0.0, 2).unwrap() < b);
        assert!(lambda_bound(25.0, 1.0, 1.0, 2).unwrap() < 1e-200);
        let mut prev = f64::INFINITY;
        for m in 1..20 {
            let v = lambda_bound(m as f64 * 0.5, 2.0, 0.5, 3).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(lambda_bound(2.0, 1.0, -0.1, 2).is_err());
        assert!(lambda_bound(2.0, 0.0, 1.0, 2).is_err());
        assert!(lambda_bound(0.0, 1.0, 0.0, 2).is_err());
    }

    #[test]
    fn square_certificate_first_cell() {
        let f = parse("x1^2", 1).unwrap();
        let out = find_r_eps_with(&f, 0.5, &schedule(&[1.0, 1.5, 2.0], 1..=3), SEARCH_TOL).unwrap();
        let c = &out.certificate;
        assert_eq!(c.r_eps, 1);
        let p = c.provenance.as_ref().unwrap();
        assert_eq!(p.radius, 1.0);
        assert!(p.lambda_m < 1e-6);
        assert!(out.report.passed);
        let expect = parse("x1^2", 1).unwrap().add(&perturbation_series(1, 1).scale(0.5)).unwrap();
        assert!(sum_of_squares(&c.squares, 1).unwrap().sub(&expect).unwrap().l1_norm() < 1e-7);
    }

    #[test]
    fn rejects_negative_and_bad_arguments() {
        let f = Polynomial::constant(1, -1.0);
        assert!(matches!(
            find_r_eps(&f, 0.5, &[(1.0, 1)]),
            Err(CertificateError::NegativeInput { .. })
        ));
        let g = parse("x1^2 - 0.01", 1).unwrap();
        assert!(matches!(find_r_eps(&g, 0.5, &[(1.0, 1)]), Err(CertificateError::NegativeInput { .. })));
        let h = parse("x1^2", 1).unwrap();
        assert!(matches!(find_r_eps(&h, 0.0, &[(1.0, 1)]), Err(CertificateError::InvalidEpsilon(_))));
        assert!(matches!(find_r_eps(&h, 0.1, &[]), Err(CertificateError::EmptySchedule)));
    }

    #[test]
    fn zero_polynomial_gives_theta_certificate() {
        let f = Polynomial::zero(2);
        let c = find_r_eps(&f, 0.25, &schedule(&[1.0], 1..=2)).unwrap();
        assert!(verify(&f, &c).unwrap().passed);
        assert_eq!(c.l1_gap, l1_gap(0.25, 2, c.r_eps));
    }

    #[test]
    fn exhausted_schedule_reports_best_lambda() {
        // tiny ε on Motzkin at a single low-order cell cannot succeed
        let f = parse(MOTZKIN, 2).unwrap();
        match find_r_eps(&f, 1e-4, &[(1.0, 3)]) {
            Err(CertificateError::ScheduleExhausted { best_lambda, target }) => {
                assert!(best_lambda > target);
                assert!(best_lambda.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn assembly_respects_preconditions() {
        let f = parse("x1^2", 1).unwrap();
        let cell = solve_cell(&f, 0.5, 1.0, 2, SEARCH_TOL).unwrap();
        assert!(cell.assemble(cell.solution.dual.lambda.max(0.0), 1, 0.0).is_err());
        assert!(cell.assemble(-1.0, 2, 0.0).is_err());
    }

    #[test]
    fn motzkin_certificate_and_reassembly() {
        let f = parse(MOTZKIN, 2).unwrap();
        let out = find_r_eps_with(&f, 0.5, &schedule(&[1.0, 1.5, 2.0], 3..=8), SEARCH_TOL).unwrap();
        let c = &out.certificate;
        assert!(c.r_eps <= 8);
        let rep = verify(&f, c).unwrap();
        assert!(rep.passed);
        assert!(rep.identity_residual <= VERIFY_REL * (1.0 + build_f_eps(&f, 0.5, c.r_eps).l1_norm()));
        assert_eq!(c.l1_gap.to_bits(), (0.5 * perturbation_l1(2, c.r_eps)).to_bits());
        assert!(c.l1_gap <= 0.5 * 2.0 * std::f64::consts::E);

        let mut shifted = f.clone();
        shifted.add_term(Monomial::one(2), out.cell.shift);
        let lm = out.cell.solution.dual.lambda.max(0.0);
        for lambda in [lm, 2.0 * lm] {
            for r in [out.cell.order, out.cell.order + 1] {
                let (basis, gram) = out.cell.assemble(lambda, r, 0.0).unwrap();
                let cert = SosCertificate::from_gram(&shifted, lambda, r, basis, gram, None).unwrap();
                assert!(verify(&shifted, &cert).unwrap().passed, "λ = {lambda}, r = {r}");
            }
        }
    }
}
