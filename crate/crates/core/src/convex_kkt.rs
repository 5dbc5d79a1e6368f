//! Convex programs on `K = {g_j >= 0}` and the representation
//! `f + εΘ_r = f_0 + Σ λ_j g_j` with `f_0` a sum of squares.

use nalgebra::{DMatrix, DVector};

use crate::certfile::{CertificateDocument, DocumentKind};
use crate::certificate::{self, find_r_eps_with, build_f_eps, SosCertificate, VerificationReport};
use crate::error::{CertificateError, KktError};
use crate::linalg;
use crate::poly::{format_poly, Polynomial};
use crate::sampling;

/// Hessian eigenvalues below this reject convexity.
pub const CONVEXITY_TOL: f64 = 1e-6;
pub const CONVEXITY_SAMPLES: usize = 100;
pub const FEASIBLE_SAMPLES: usize = 1000;
/// Constraints with `g_j(x*)` above this are treated as inactive.
pub const INACTIVE_SLACK: f64 = 1e-3;
const SAMPLE_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct ConvexProgram {
    f: Polynomial,
    g: Vec<Polynomial>,
    slater: Vec<f64>,
}

impl ConvexProgram {
    pub fn new(f: Polynomial, g: Vec<Polynomial>, slater: Vec<f64>) -> Result<Self, KktError> {
        let n = f.dim();
        if slater.len() != n {
            return Err(KktError::LengthMismatch {
                expected: n,
                found: slater.len(),
            });
        }
        for (index, gj) in g.iter().enumerate() {
            if gj.dim() != n {
                return Err(crate::PolyError::DimensionMismatch {
                    expected: n,
                    found: gj.dim(),
                }
                .into());
            }
            let value = gj.evaluate(&slater)?;
            if !(value > 0.0) {
                return Err(KktError::SlaterViolated { index, value });
            }
        }
        Ok(Self { f, g, slater })
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn objective(&self) -> &Polynomial {
        &self.f
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.g
    }

    pub fn slater_point(&self) -> &[f64] {
        &self.slater
    }

    fn sample_box(&self) -> f64 {
        2.0 * (1.0 + self.slater.iter().fold(0.0f64, |a, v| a.max(v.abs())))
    }

    /// Spectral Hessian checks of `f` and `-g_j` at sampled points.
    pub fn check_convexity(&self) -> Result<(), KktError> {
        let n = self.dim();
        let mut pts = vec![self.slater.clone()];
        pts.extend(sampling::box_points(
            &self.slater,
            self.sample_box(),
            CONVEXITY_SAMPLES - 1,
            sampling::DEFAULT_SEED,
        ));
        let check = |p: &Polynomial, which: String, sign: f64| -> Result<(), KktError> {
            for x in &pts {
                let h = DMatrix::from_row_slice(n, n, &p.hessian_at(x)?) * sign;
                let eig = linalg::min_eigenvalue(&h);
                if eig < -CONVEXITY_TOL {
                    return Err(KktError::NotConvex {
                        which,
                        witness: x.clone(),
                        eigenvalue: eig,
                    });
                }
            }
            Ok(())
        };
        check(&self.f, "f".into(), 1.0)?;
        for (j, gj) in self.g.iter().enumerate() {
            check(gj, format!("-g{}", j + 1), -1.0)?;
        }
        Ok(())
    }

    /// Up to [`FEASIBLE_SAMPLES`] points of `K` around `center`, `center` first.
    pub fn feasible_samples(&self, center: &[f64]) -> Vec<Vec<f64>> {
        feasible_samples(&self.g, center, self.sample_box())
    }
}

fn feasible_samples(g: &[Polynomial], center: &[f64], h: f64) -> Vec<Vec<f64>> {
    let feasible = |x: &[f64]| g.iter().all(|gj| gj.evaluate(x).is_ok_and(|v| v >= 0.0));
    let mut out = vec![center.to_vec()];
    let mut seed = sampling::DEFAULT_SEED;
    for _ in 0..50 {
        for x in sampling::box_points(center, h, 4000, seed) {
            if out.len() >= FEASIBLE_SAMPLES {
                return out;
            }
            if feasible(&x) {
                out.push(x);
            }
        }
        seed = seed.wrapping_add(1);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktPoint {
    pub x_star: Vec<f64>,
    pub lambda: Vec<f64>,
    pub f_star: f64,
    /// `‖∇f(x*) - Σ λ_j ∇g_j(x*)‖_∞`.
    pub stationarity: f64,
    /// `max_j |λ_j g_j(x*)|`.
    pub complementarity: f64,
    /// Barrier parameter at termination.
    pub mu: f64,
}

struct Derivatives {
    grad: Vec<Polynomial>,
    hess: Vec<Polynomial>,
}

impl Derivatives {
    fn new(p: &Polynomial) -> Result<Self, KktError> {
        let n = p.dim();
        let grad: Vec<Polynomial> = (0..n).map(|i| p.partial(i)).collect::<Result<_, _>>()?;
        let mut hess = Vec::with_capacity(n * n);
        for gi in &grad {
            for j in 0..n {
                hess.push(gi.partial(j)?);
            }
        }
        Ok(Self { grad, hess })
    }

    fn grad_at(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), self.grad.iter().map(|p| p.evaluate(x).expect("dimension checked")))
    }

    fn hess_at(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        DMatrix::from_iterator(n, n, self.hess.iter().map(|p| p.evaluate(x).expect("dimension checked")))
    }
}

fn eval(p: &Polynomial, x: &[f64]) -> f64 {
    p.evaluate(x).expect("dimension checked")
}

/// Newton step `-(H + δI)⁻¹ ∇`, raising `δ` until the factorization succeeds.
fn newton_step(h: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let n = grad.len();
    let scale = linalg::max_diagonal(h).abs().max(1.0);
    let mut delta = 0.0;
    loop {
        let m = h + DMatrix::identity(n, n) * delta;
        if let Some(c) = m.cholesky() {
            return -c.solve(grad);
        }
        delta = if delta == 0.0 { 1e-12 * scale } else { delta * 10.0 };
    }
}

/// Log-barrier path following from the Slater point.
pub fn solve_convex_program(prog: &ConvexProgram, tol: f64) -> Result<KktPoint, KktError> {
    let m = prog.g.len();
    let scale = 1.0 + prog.f.l1_norm();
    let df = Derivatives::new(&prog.f)?;
    let dg: Vec<Derivatives> = prog.g.iter().map(Derivatives::new).collect::<Result<_, _>>()?;

    let barrier = |x: &[f64], mu: f64| -> f64 {
        let mut v = eval(&prog.f, x);
        for gj in &prog.g {
            let gv = eval(gj, x);
            if !(gv > 0.0) {
                return f64::INFINITY;
            }
            v -= mu * gv.ln();
        }
        v
    };
    let grad_hess = |x: &[f64], mu: f64| -> (DVector<f64>, DMatrix<f64>) {
        let mut grad = df.grad_at(x);
        let mut hess = df.hess_at(x);
        for (gj, d) in prog.g.iter().zip(&dg) {
            let gv = eval(gj, x);
            let gg = d.grad_at(x);
            grad -= &gg * (mu / gv);
            hess += &gg * gg.transpose() * (mu / (gv * gv)) - d.hess_at(x) * (mu / gv);
        }
        (grad, hess)
    };

    let mut x = prog.slater.clone();
    let target_mu = 1e-2 * tol * scale / (m.max(1) as f64);
    let mut mu = if m == 0 { 0.0 } else { scale };
    loop {
        // damped Newton on the barrier subproblem
        for _ in 0..200 {
            let (grad, hess) = grad_hess(&x, mu);
            let step = newton_step(&hess, &grad);
            let decrement = -grad.dot(&step);
            if decrement <= 1e-3 * tol * tol * scale || grad.amax() <= 1e-3 * tol * scale {
                break;
            }
            let phi = barrier(&x, mu);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-20 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
                let v = barrier(&trial, mu);
                // below rounding level of φ, fall back to gradient decrease
                let flat = v.is_finite()
                    && v <= phi + 1e-14 * phi.abs().max(1.0)
                    && grad_hess(&trial, mu).0.amax() < grad.amax();
                if v.is_finite() && v <= phi - 0.25 * t * decrement || flat {
                    x = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            if x.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
                return Err(KktError::NoConvergence {
                    stationarity: f64::INFINITY,
                    gap: f64::INFINITY,
                });
            }
        }
        if mu <= target_mu {
            break;
        }
        mu = (mu * 0.1).max(target_mu);
    }

    let mut lambda = Vec::with_capacity(m);
    for gj in &prog.g {
        let gv = eval(gj, &x);
        lambda.push(if gv > INACTIVE_SLACK { 0.0 } else { mu / gv });
    }
    let (stationarity, complementarity) = kkt_residuals(prog, &x, &lambda)?;
    if stationarity > 1e-6 * scale || complementarity > 1e-6 * scale {
        return Err(KktError::NoConvergence {
            stationarity,
            gap: complementarity,
        });
    }
    Ok(KktPoint {
        f_star: eval(&prog.f, &x),
        x_star: x,
        lambda,
        stationarity,
        complementarity,
        mu,
    })
}

/// Stationarity and complementarity residuals at `(x, λ)`.
pub fn kkt_residuals(prog: &ConvexProgram, x: &[f64], lambda: &[f64]) -> Result<(f64, f64), KktError> {
    if lambda.len() != prog.g.len() {
        return Err(KktError::LengthMismatch {
            expected: prog.g.len(),
            found: lambda.len(),
        });
    }
    let mut grad = prog.f.gradient_at(x)?;
    let mut comp = 0.0f64;
    for (gj, &l) in prog.g.iter().zip(lambda) {
        for (a, b) in grad.iter_mut().zip(gj.gradient_at(x)?) {
            *a -= l * b;
        }
        comp = comp.max((l * gj.evaluate(x)?).abs());
    }
    Ok((grad.iter().fold(0.0f64, |a, v| a.max(v.abs())), comp))
}

/// `f - Σ λ_j g_j`.
pub fn lagrangian(prog: &ConvexProgram, lambda: &[f64]) -> Result<Polynomial, KktError> {
    lagrangian_parts(&prog.f, &prog.g, lambda)
}

fn lagrangian_parts(f: &Polynomial, g: &[Polynomial], lambda: &[f64]) -> Result<Polynomial, KktError> {
    if lambda.len() != g.len() {
        return Err(KktError::LengthMismatch {
            expected: g.len(),
            found: lambda.len(),
        });
    }
    if let Some((index, &value)) = lambda.iter().enumerate().find(|(_, l)| !(**l >= 0.0)) {
        return Err(KktError::NegativeMultiplier { index, value });
    }
    let mut l = f.clone();
    for (gj, &lj) in g.iter().zip(lambda) {
        l = l.sub(&gj.scale(lj))?;
    }
    Ok(l)
}

#[derive(Clone, Debug)]
pub struct KktRepresentation {
    pub kkt: KktPoint,
    /// Certificate for `L + εΘ_r`; its Gram matrix is that of `f_0`.
    pub certificate: SosCertificate,
    /// `‖f + εΘ_r - f_0 - Σ λ_j g_j‖₁`.
    pub residual: f64,
}

impl KktRepresentation {
    pub fn lambda(&self) -> &[f64] {
        &self.kkt.lambda
    }

    pub fn f0(&self) -> Polynomial {
        certificate::sum_of_squares(&self.certificate.squares, self.certificate.n).expect("same dimension")
    }
}

fn representation_target(f: &Polynomial, g: &[Polynomial], lambda: &[f64], eps: f64, r: u32) -> Result<Polynomial, KktError> {
    let mut t = build_f_eps(f, eps, r);
    for (gj, &lj) in g.iter().zip(lambda) {
        t = t.sub(&gj.scale(lj))?;
    }
    Ok(t)
}

/// Solves the program, then certifies `L + εΘ_r` for the Lagrangian `L`.
pub fn build_representation(
    prog: &ConvexProgram,
    eps: f64,
    schedule: &[(f64, u32)],
) -> Result<KktRepresentation, KktError> {
    build_representation_with(prog, eps, schedule, certificate::SEARCH_TOL)
}

pub fn build_representation_with(
    prog: &ConvexProgram,
    eps: f64,
    schedule: &[(f64, u32)],
    tol: f64,
) -> Result<KktRepresentation, KktError> {
    if !(eps > 0.0) {
        return Err(CertificateError::InvalidEpsilon(eps).into());
    }
    prog.check_convexity()?;
    for x in prog.feasible_samples(&prog.slater) {
        let value = prog.f.evaluate(&x)?;
        if value < -certificate::NEGATIVITY_TOL {
            return Err(KktError::NegativeOnFeasibleSet { point: x, value });
        }
    }
    let kkt = solve_convex_program(prog, tol)?;
    let l = lagrangian(prog, &kkt.lambda)?;
    let out = find_r_eps_with(&l, eps, schedule, tol)?;
    let cert = out.certificate;
    let target = representation_target(&prog.f, &prog.g, &kkt.lambda, eps, cert.r_eps)?;
    let f0 = certificate::sum_of_squares(&cert.squares, prog.dim())?;
    let residual = target.sub(&f0)?.l1_norm();
    Ok(KktRepresentation {
        kkt,
        certificate: cert,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationReport {
    pub passed: bool,
    pub multipliers_nonnegative: bool,
    pub identity: VerificationReport,
    /// Smallest sampled `f_ε` on `K`.
    pub sampled_min: f64,
    pub samples: usize,
}

pub fn verify_representation(
    rep: &KktRepresentation,
    prog: &ConvexProgram,
    eps: f64,
) -> Result<RepresentationReport, KktError> {
    verify_representation_parts(&prog.f, &prog.g, &rep.kkt.lambda, &rep.kkt.x_star, &rep.certificate, eps)
}

/// Checks `λ >= 0`, the coefficient identity, the Gram floor and sampled
/// nonnegativity of `f_ε` on `K` around `center`.
pub fn verify_representation_parts(
    f: &Polynomial,
    g: &[Polynomial],
    lambda: &[f64],
    center: &[f64],
    cert: &SosCertificate,
    eps: f64,
) -> Result<RepresentationReport, KktError> {
    let n = f.dim();
    if lambda.len() != g.len() {
        return Err(KktError::LengthMismatch {
            expected: g.len(),
            found: lambda.len(),
        });
    }
    if cert.n != n || center.len() != n || g.iter().any(|gj| gj.dim() != n) {
        return Err(CertificateError::Malformed("dimension mismatch in representation".into()).into());
    }
    let multipliers_nonnegative = lambda.iter().all(|l| *l >= 0.0);
    let target = representation_target(f, g, lambda, eps, cert.r_eps)?;
    let mut identity = certificate::verify_identity(&target, cert)?;
    if cert.epsilon.to_bits() != eps.to_bits() {
        identity.passed = false;
    }
    let f_eps = build_f_eps(f, eps, cert.r_eps);
    let h = 2.0 * (1.0 + center.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let pts = feasible_samples(g, center, h);
    let mut sampled_min = f64::INFINITY;
    for x in &pts {
        sampled_min = sampled_min.min(f_eps.evaluate(x)?);
    }
    Ok(RepresentationReport {
        passed: multipliers_nonnegative && identity.passed && sampled_min >= -SAMPLE_TOL,
        multipliers_nonnegative,
        identity,
        sampled_min,
        samples: pts.len(),
    })
}

impl KktRepresentation {
    pub fn to_document(&self, prog: &ConvexProgram) -> CertificateDocument {
        let mut doc = CertificateDocument::from_certificate(&prog.f, &self.certificate);
        doc.kind = DocumentKind::Representation;
        doc.residual = self.residual;
        doc.g = prog.g.iter().map(format_poly).collect();
        doc.lambda = self.kkt.lambda.clone();
        doc.x_star = self.kkt.x_star.clone();
        doc.f_star = Some(self.kkt.f_star);
        doc
    }
}

/// Verifies a representation document.
pub fn verify_document(doc: &CertificateDocument) -> Result<RepresentationReport, KktError> {
    if doc.kind != DocumentKind::Representation {
        return Err(CertificateError::Malformed("not a representation document".into()).into());
    }
    let f = doc.polynomial()?;
    let g = doc.constraints()?;
    let cert = doc.certificate()?;
    if doc.x_star.len() != doc.n {
        return Err(CertificateError::Malformed("x_star has the wrong length".into()).into());
    }
    verify_representation_parts(&f, &g, &doc.lambda, &doc.x_star, &cert, doc.epsilon)
}
