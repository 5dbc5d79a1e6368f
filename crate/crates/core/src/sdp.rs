//! Dense primal-dual interior-point solver for the budgeted moment relaxation.
//!
//! The moment problem is treated as the LMI side of a standard SDP pair:
//!
//! ```text
//! (SOS)     min ⟨C, X⟩        s.t. ⟨A_k, X⟩ = b_k,        X = diag(G, x_b) ⪰ 0
//! (moment)  max bᵀy           s.t. Z = C - Σ y_k A_k ⪰ 0
//! ```
//!
//! with `Z = diag(M_r(y), scaled budget slack)` and `b_k = -f_{α_k}`. The
//! method uses the HKM direction with a Mehrotra predictor-corrector. The
//! moment side starts strictly feasible and stays feasible; the SOS side
//! starts at a multiple of the identity and reaches feasibility as `μ → 0`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::SolverError;
use crate::linalg::{dot, symmetrize};
use crate::moment::MomentSequence;
use crate::relaxation::{DualShape, SdpProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
    UnboundedGuard,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::UnboundedGuard => "unbounded-guard",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Optimal moments with `y_0 = 1` restored.
    pub primal: MomentSequence,
    pub dual: DualShape,
    /// `L_y(f)`, the moment-side objective.
    pub primal_value: f64,
    /// `γ - n e^{M²} λ`.
    pub dual_value: f64,
    /// `|primal_value - dual_value| / (1 + |primal_value|)`.
    pub gap: f64,
    /// ℓ1 norm of the dual polynomial identity residual.
    pub dual_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the PSD boundary taken per step.
    pub step_fraction: f64,
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 200,
            step_fraction: 0.95,
        }
    }
}

/// `(ΔX, Δx_b, Δy, ΔZ, Δz_b)`.
type Direction = (DMatrix<f64>, f64, Vec<f64>, DMatrix<f64>, f64);

pub fn solve(prob: &SdpProblem, start: &MomentSequence, tol: f64) -> Result<SdpSolution, SolverError> {
    solve_with(prob, start, &SolverOptions::with_tol(tol))
}

struct Layout<'a> {
    prob: &'a SdpProblem,
    s: usize,
    m: usize,
    /// scaled budget coefficient per variable
    d: Vec<f64>,
    /// `b_k = -f_{α_k}`
    b: Vec<f64>,
    /// scaled budget right-hand side, `(n e^{M²} - n) e^{-M²}`
    cb: f64,
    f0: f64,
}

impl<'a> Layout<'a> {
    fn new(prob: &'a SdpProblem) -> Self {
        let scale = prob.budget_scale();
        let n = prob.dim() as f64;
        let obj = prob.objective();
        Self {
            prob,
            s: prob.psd_size(),
            m: prob.num_vars(),
            d: prob.budget_coefficients()[1..].iter().map(|c| c * scale).collect(),
            b: obj[1..].iter().map(|c| -c).collect(),
            cb: n - n * scale,
            f0: obj[0],
        }
    }

    fn idx(&self, p: usize, q: usize) -> usize {
        self.prob.index_table()[p * self.s + q]
    }

    /// `Z(y) = C - Σ y_k A_k`.
    fn slack(&self, y: &[f64]) -> (DMatrix<f64>, f64) {
        let z = DMatrix::from_fn(self.s, self.s, |p, q| match self.idx(p, q) {
            0 => 1.0,
            t => y[t - 1],
        });
        let zb = self.cb - self.d.iter().zip(y).map(|(d, v)| d * v).sum::<f64>();
        (z, zb)
    }

    /// `A(X)`.
    fn apply(&self, g: &DMatrix<f64>, xb: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.d.iter().map(|d| d * xb).collect();
        for p in 0..self.s {
            for q in 0..self.s {
                let t = self.idx(p, q);
                if t > 0 {
                    out[t - 1] -= g[(p, q)];
                }
            }
        }
        out
    }

    /// `-Σ Δy_k A_k`, i.e. the change of `Z` for a step `Δy`.
    fn slack_step(&self, dy: &[f64]) -> (DMatrix<f64>, f64) {
        let dz = DMatrix::from_fn(self.s, self.s, |p, q| match self.idx(p, q) {
            0 => 0.0,
            t => dy[t - 1],
        });
        let dzb = -self.d.iter().zip(dy).map(|(d, v)| d * v).sum::<f64>();
        (dz, dzb)
    }

    /// `H_ij = ⟨A_i, X A_j Z⁻¹⟩`.
    fn schur(&self, x: &DMatrix<f64>, zinv: &DMatrix<f64>, xb: f64, zb: f64) -> DMatrix<f64> {
        let (s, m) = (self.s, self.m);
        let idx = self.prob.index_table();
        let mut h = DMatrix::<f64>::zeros(m, m);
        for a in 0..s {
            for bcol in 0..s {
                let t1 = idx[a * s + bcol];
                if t1 == 0 {
                    continue;
                }
                for p in 0..s {
                    let xap = x[(a, p)];
                    if xap == 0.0 {
                        continue;
                    }
                    for q in 0..s {
                        let t2 = idx[p * s + q];
                        if t2 != 0 {
                            h[(t1 - 1, t2 - 1)] += xap * zinv[(q, bcol)];
                        }
                    }
                }
            }
        }
        let w = xb / zb;
        for i in 0..m {
            if self.d[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                h[(i, j)] += self.d[i] * self.d[j] * w;
            }
        }
        symmetrize(&mut h);
        h
    }
}

/// Largest `α` with `X + α ΔX ⪰ 0`, given the Cholesky factor of `X`.
fn max_step(chol: &Cholesky<f64, Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let t = l
        .solve_lower_triangular(dx)
        .expect("triangular factor is nonsingular");
    let mut w = l
        .solve_lower_triangular(&t.transpose())
        .expect("triangular factor is nonsingular");
    symmetrize(&mut w);
    let min = SymmetricEigen::new(w)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

fn max_step_scalar(x: f64, dx: f64) -> f64 {
    if dx >= 0.0 {
        f64::INFINITY
    } else {
        -x / dx
    }
}

struct Iterate {
    x: DMatrix<f64>,
    xb: f64,
    y: Vec<f64>,
}

struct Metrics {
    primal_value: f64,
    dual_value: f64,
    gap: f64,
    residual: f64,
}

fn metrics(lay: &Layout, it: &Iterate, f_l1: f64) -> Metrics {
    let primal_value = lay.f0 - lay.b.iter().zip(&it.y).map(|(b, y)| b * y).sum::<f64>();
    let dual_value = lay.f0 - it.x[(0, 0)] - lay.cb * it.xb;
    let ax = lay.apply(&it.x, it.xb);
    let residual: f64 = lay.b.iter().zip(&ax).map(|(b, a)| (b - a).abs()).sum();
    Metrics {
        primal_value,
        dual_value,
        gap: (primal_value - dual_value).abs() / (1.0 + primal_value.abs()),
        residual: residual / (1.0 + f_l1),
    }
}

/// Iterations without halving the merit before the run is declared stalled.
const STALL_ITERATIONS: usize = 30;

/// Solves `Q_r` and its dual from a strictly feasible moment sequence.
pub fn solve_with(
    prob: &SdpProblem,
    start: &MomentSequence,
    opts: &SolverOptions,
) -> Result<SdpSolution, SolverError> {
    let lay = Layout::new(prob);
    let (s, m) = (lay.s, lay.m);
    if start.dim() != prob.dim() || start.order() != 2 * prob.order() {
        return Err(SolverError::InfeasibleStart);
    }
    let f_l1 = prob.polynomial().l1_norm();
    let y0: Vec<f64> = start.values()[1..].iter().map(|v| v / start.y0()).collect();
    let (z_start, zb_start) = lay.slack(&y0);
    if zb_start <= 0.0 || Cholesky::new(z_start).is_none() {
        return Err(SolverError::InfeasibleStart);
    }

    let xi = 1.0 + prob.objective().iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut it = Iterate {
        x: DMatrix::identity(s, s) * xi,
        xb: xi,
        y: y0,
    };
    let nblk = (s + 1) as f64;

    let mut best: Option<(f64, Iterate)> = None;
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut stalls = 0;
    let mut last_gain = 0;

    // A breakdown after the first iteration ends the run at the best iterate.
    macro_rules! factor {
        ($e:expr, $iter:expr, $what:expr) => {
            match $e {
                Some(v) => v,
                None if $iter > 0 => break,
                None => return Err(SolverError::Factorization { iteration: $iter, what: $what }),
            }
        };
    }

    for iter in 0..=opts.max_iterations {
        iterations = iter;
        let met = metrics(&lay, &it, f_l1);
        let merit = met.gap.max(met.residual);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            if best.as_ref().is_none_or(|b| merit < 0.5 * b.0) {
                last_gain = iter;
            }
            best = Some((
                merit,
                Iterate {
                    x: it.x.clone(),
                    xb: it.xb,
                    y: it.y.clone(),
                },
            ));
        }
        if met.gap <= opts.tol && met.residual <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        if iter == opts.max_iterations || iter - last_gain > STALL_ITERATIONS {
            break;
        }
        if it.x.trace() + it.xb > 1e14 * xi {
            status = SolveStatus::Infeasible;
            break;
        }
        if it.y.iter().any(|v| !v.is_finite() || v.abs() > 1e15) {
            status = SolveStatus::UnboundedGuard;
            break;
        }

        let (z, zb) = lay.slack(&it.y);
        let zchol = factor!(Cholesky::new(z.clone()), iter, "moment matrix");
        let xchol = factor!(Cholesky::new(it.x.clone()), iter, "Gram matrix");
        let zinv = zchol.inverse();
        let mu = (dot(&it.x, &z) + it.xb * zb) / nblk;

        let h = lay.schur(&it.x, &zinv, it.xb, zb);
        let hchol = Cholesky::new(h.clone());
        let hlu = if hchol.is_none() { Some(h.lu()) } else { None };
        let solve_h = |rhs: Vec<f64>| -> Option<Vec<f64>> {
            let v = DVector::from_vec(rhs);
            let sol = match (&hchol, &hlu) {
                (Some(c), _) => Some(c.solve(&v)),
                (None, Some(lu)) => lu.solve(&v),
                _ => None,
            }?;
            sol.iter().all(|x| x.is_finite()).then(|| sol.iter().copied().collect())
        };

        let ax = lay.apply(&it.x, it.xb);
        let rp: Vec<f64> = lay.b.iter().zip(&ax).map(|(b, a)| b - a).collect();

        // Direction for a given complementarity target, expressed through
        // `W = Rc Z⁻¹` (G block) and `wb = rc_b / z_b`.
        let direction = |w: &DMatrix<f64>, wb: f64| -> Option<Direction> {
            let aw = lay.apply(w, wb);
            let rhs: Vec<f64> = rp.iter().zip(&aw).map(|(r, a)| r - a).collect();
            let dy = solve_h(rhs)?;
            let (dz, dzb) = lay.slack_step(&dy);
            let mut dx = w - &it.x * &dz * &zinv;
            symmetrize(&mut dx);
            let dxb = wb - it.xb * dzb / zb;
            Some((dx, dxb, dy, dz, dzb))
        };

        // predictor
        let (dxa, dxba, _dya, dza, dzba) = factor!(direction(&(-it.x.clone()), -it.xb), iter, "Schur complement");
        let ap = (max_step(&xchol, &dxa).min(max_step_scalar(it.xb, dxba))).min(1.0);
        let ad = (max_step(&zchol, &dza).min(max_step_scalar(zb, dzba))).min(1.0);
        let xa = &it.x + &dxa * ap;
        let za = &z + &dza * ad;
        let mu_aff = (dot(&xa, &za) + (it.xb + ap * dxba) * (zb + ad * dzba)) / nblk;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let w = &zinv * (sigma * mu) - &it.x - &dxa * &dza * &zinv;
        let wb = (sigma * mu - dxba * dzba) / zb - it.xb;
        let (dx, dxb, dy, dz, dzb) = factor!(direction(&w, wb), iter, "Schur complement");

        let ap = (opts.step_fraction * max_step(&xchol, &dx).min(max_step_scalar(it.xb, dxb))).min(1.0);
        let ad = (opts.step_fraction * max_step(&zchol, &dz).min(max_step_scalar(zb, dzb))).min(1.0);

        it.x += &dx * ap;
        symmetrize(&mut it.x);
        it.xb += ap * dxb;
        for (y, d) in it.y.iter_mut().zip(&dy) {
            *y += ad * d;
        }

        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 5 {
                break;
            }
        } else {
            stalls = 0;
        }
    }

    if status != SolveStatus::Optimal {
        if let Some((_, b)) = best.take() {
            it = b;
        }
    }
    let met = metrics(&lay, &it, f_l1);
    let n = prob.dim();
    let lambda = it.xb * prob.budget_scale();
    let gamma = lay.f0 - it.x[(0, 0)] + n as f64 * lambda;
    let mut values = Vec::with_capacity(m + 1);
    values.push(1.0);
    values.extend_from_slice(&it.y);
    let primal = MomentSequence::new(n, 2 * prob.order(), values).expect("layout matches basis");
    Ok(SdpSolution {
        status,
        primal,
        dual: DualShape {
            gamma,
            lambda,
            gram: it.x,
        },
        primal_value: met.primal_value,
        dual_value: met.dual_value,
        gap: met.gap,
        dual_residual: met.residual * (1.0 + f_l1),
        iterations,
    })
}
