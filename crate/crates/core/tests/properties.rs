use proptest::prelude::*;
use sos_almost::certificate::{find_r_eps_with, schedule, verify, SosCertificate, SEARCH_TOL};
use sos_almost::moment::{diag_bound_check, moments_from_atoms, uniform_box_moments, MomentMatrix, PSD_REL_TOL};
use sos_almost::poly::{perturbation_l1, Monomial, MonomialBasis, Polynomial};
use sos_almost::relaxation::{build_primal, feasible_start, RelaxationConfig};
use sos_almost::sampling::box_points;
use sos_almost::sdp::{solve, SolveStatus};

fn poly_strategy(n: usize, max_deg: u32, max_terms: usize) -> impl Strategy<Value = Polynomial> {
    let basis = MonomialBasis::new(n, max_deg);
    let len = basis.len();
    prop::collection::vec((0..len, -3.0f64..3.0), 1..=max_terms).prop_map(move |terms| {
        Polynomial::from_terms(n, terms.into_iter().map(|(i, c)| (basis.get(i).clone(), (c * 8.0).round() / 8.0)))
    })
}

/// `p² + q² + c` with `c >= 0`: nonnegative by construction.
fn nonneg_strategy() -> impl Strategy<Value = Polynomial> {
    (1usize..=2)
        .prop_flat_map(|n| (poly_strategy(n, 2, 3), poly_strategy(n, 2, 3), 0.0f64..1.0))
        .prop_map(|(p, q, c)| {
            let mut f = p.square().add(&q.square()).unwrap();
            f.add_term(Monomial::one(f.dim()), c);
            f
        })
}

/// Evaluation of `|p|` at `|x|`, a scale for rounding error.
fn abs_eval(p: &Polynomial, x: &[f64]) -> f64 {
    p.terms().map(|(m, c)| c.abs() * m.eval(&x.iter().map(|v| v.abs()).collect::<Vec<_>>())).sum()
}

fn atoms_in_box(n: usize, radius: f64) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    prop::collection::vec((prop::collection::vec(-radius..radius, n), 0.1f64..1.0), 1..5).prop_map(|a| {
        let total: f64 = a.iter().map(|(_, w)| w).sum();
        a.into_iter().map(|(p, w)| (p, w / total)).unzip()
    })
}

fn relax_value(f: &Polynomial, r: u32, radius: f64) -> (SolveStatus, f64, f64) {
    let cfg = RelaxationConfig::new(r, radius, 1e-8).unwrap();
    let prob = build_primal(f, &cfg).unwrap();
    let sol = solve(&prob, &feasible_start(&cfg, f.dim()), 1e-8).unwrap();
    (sol.status, sol.primal_value, sol.dual_value)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn verified_certificates_are_sound(f in nonneg_strategy(), eps in 0.05f64..1.0) {
        let lo = sos_almost::relaxation::min_order(&f);
        let out = find_r_eps_with(&f, eps, &schedule(&[1.0, 1.5, 2.0], lo..=lo + 3), SEARCH_TOL);
        let out = match out {
            Ok(o) => o,
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };
        let c = &out.certificate;
        prop_assert!(verify(&f, c).unwrap().passed);
        prop_assert_eq!(c.l1_gap.to_bits(), (eps * perturbation_l1(f.dim(), c.r_eps)).to_bits());
        prop_assert!(c.l1_gap <= eps * f.dim() as f64 * std::f64::consts::E);
        let fe = sos_almost::certificate::build_f_eps(&f, eps, c.r_eps);
        for x in box_points(&vec![0.0; f.dim()], 3.0, 10_000, 11) {
            prop_assert!(fe.evaluate(&x).unwrap() >= -1e-7);
        }
    }

    #[test]
    fn reassembly_with_larger_lambda_and_order(f in nonneg_strategy()) {
        let lo = sos_almost::relaxation::min_order(&f);
        let out = find_r_eps_with(&f, 0.5, &schedule(&[1.0, 2.0], lo..=lo + 3), SEARCH_TOL).unwrap();
        let mut shifted = f.clone();
        shifted.add_term(Monomial::one(f.dim()), out.cell.shift);
        let lm = out.cell.solution.dual.lambda.max(0.0);
        for lambda in [lm, 2.0 * lm] {
            for r in [out.cell.order, out.cell.order + 1] {
                let (basis, gram) = out.cell.assemble(lambda, r, 0.0).unwrap();
                let cert = SosCertificate::from_gram(&shifted, lambda, r, basis, gram, None).unwrap();
                prop_assert!(verify(&shifted, &cert).unwrap().passed);
            }
        }
    }

    #[test]
    fn weak_duality_and_box_soundness(f in poly_strategy(2, 4, 6), radius in prop::sample::select(vec![1.0, 1.5, 2.0])) {
        let (status, primal, dual) = relax_value(&f, 2, radius);
        prop_assume!(status == SolveStatus::Optimal);
        prop_assert!(dual <= primal + 1e-6 * (1.0 + primal.abs()));
        for x in box_points(&[0.0, 0.0], radius, 500, 5) {
            prop_assert!(dual <= f.evaluate(&x).unwrap() + 1e-6);
        }
    }

    #[test]
    fn bounds_increase_with_order(f in poly_strategy(1, 4, 5)) {
        let (s2, v2, _) = relax_value(&f, 2, 1.5);
        let (s3, v3, _) = relax_value(&f, 3, 1.5);
        prop_assume!(s2 == SolveStatus::Optimal && s3 == SolveStatus::Optimal);
        prop_assert!(v3 >= v2 - 2e-6 * (1.0 + v2.abs()));
    }

    #[test]
    fn atomic_moment_matrices_are_psd(
        pts in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 1..5),
        r in 1u32..=3,
    ) {
        let w = vec![1.0 / pts.len() as f64; pts.len()];
        let y = moments_from_atoms(&pts, &w, r).unwrap();
        prop_assert!(MomentMatrix::build(&y, r).unwrap().is_psd(PSD_REL_TOL));
    }

    #[test]
    fn ring_laws(p in poly_strategy(2, 3, 5), q in poly_strategy(2, 3, 5), s in poly_strategy(2, 2, 4), x in prop::collection::vec(-1.5f64..1.5, 2)) {
        let lhs = p.add(&q).unwrap().mul(&s).unwrap();
        let rhs = p.mul(&s).unwrap().add(&q.mul(&s).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().l1_norm() <= 1e-12 * (1.0 + lhs.l1_norm()));
        let pq = p.mul(&q).unwrap().evaluate(&x).unwrap();
        let ev = p.evaluate(&x).unwrap() * q.evaluate(&x).unwrap();
        prop_assert!((pq - ev).abs() <= 1e-9 * (1.0 + ev.abs()));
        prop_assert!(p.sub(&p).unwrap().is_zero());
    }

    #[test]
    fn evaluation_is_a_homomorphism(p in poly_strategy(3, 3, 6), q in poly_strategy(3, 3, 6), seed in any::<u64>()) {
        let sum = p.add(&q).unwrap();
        let prod = p.mul(&q).unwrap();
        for x in box_points(&[0.0; 3], 2.0, 100, seed) {
            let (a, b) = (p.evaluate(&x).unwrap(), q.evaluate(&x).unwrap());
            let scale_sum = abs_eval(&p, &x) + abs_eval(&q, &x);
            let scale_prod = abs_eval(&p, &x) * abs_eval(&q, &x);
            prop_assert!((sum.evaluate(&x).unwrap() - (a + b)).abs() <= 1e-10 * (1.0 + scale_sum));
            prop_assert!((prod.evaluate(&x).unwrap() - a * b).abs() <= 1e-10 * (1.0 + scale_prod));
        }
    }

    #[test]
    fn moment_matrix_structure((pts, w) in atoms_in_box(2, 2.0), r in 1u32..=3) {
        let y = moments_from_atoms(&pts, &w, r + 1).unwrap();
        let small = MomentMatrix::build(&y, r).unwrap();
        let big = MomentMatrix::build(&y, r + 1).unwrap();
        let k = small.size();
        prop_assert_eq!(big.entries().view((0, 0), (k, k)).clone_owned(), small.entries().clone());
        let a = big.entries();
        prop_assert!(big.min_eigenvalue() >= -1e-9 * big.max_diagonal());
        for i in 0..a.nrows() {
            for j in 0..i {
                prop_assert!(a[(i, j)] * a[(i, j)] <= a[(i, i)] * a[(j, j)] * (1.0 + 1e-8));
            }
        }
        let tau = (0..a.nrows())
            .filter(|&i| big.basis().get(i).exponents().iter().filter(|&&e| e > 0).count() <= 1)
            .map(|i| a[(i, i)])
            .fold(0.0f64, f64::max);
        let rep = diag_bound_check(&big, tau).unwrap();
        prop_assert!(rep.hypothesis && rep.holds);
    }

    #[test]
    fn lemma_on_uniform_box(n in 1usize..=3, r in 1u32..=3, h in 0.2f64..3.0) {
        let m = MomentMatrix::build(&uniform_box_moments(n, r, h), r).unwrap();
        let tau = h.powi(2 * r as i32).max(1.0);
        let rep = diag_bound_check(&m, tau).unwrap();
        prop_assert!(rep.hypothesis && rep.holds);
    }

    #[test]
    fn atomic_measures_bound_the_relaxation(f in poly_strategy(2, 4, 6), (pts, w) in atoms_in_box(2, 1.5)) {
        let cfg = RelaxationConfig::new(2, 1.5, 1e-8).unwrap();
        let prob = build_primal(&f, &cfg).unwrap();
        let sol = solve(&prob, &feasible_start(&cfg, 2), 1e-8).unwrap();
        prop_assume!(sol.status == SolveStatus::Optimal);
        let y = moments_from_atoms(&pts, &w, 2).unwrap();
        prop_assert!(prob.budget_value(&y).unwrap() <= prob.budget_bound() * (1.0 + 1e-12));
        let value = y.lin_functional(&f).unwrap();
        let scale = 1.0 + f.l1_norm();
        let lower = sol.dual.gamma - 2.0 * 1.5f64.powi(2).exp() * sol.dual.lambda;
        prop_assert!(value >= lower - 1e-8 * scale);
        prop_assert!(sol.primal_value <= value + 1e-8 * scale);
    }
}
