//! Krylov solvers against the dense oracle, plus an exact rational oracle
//! for the dense solver itself.

use groundgap::krylov::{bicg, lsmr, solve_direct, solve_problem, GuessTag, StoppingRule, Termination};
use groundgap::linalg::{self, Matrix};
use groundgap::problems::{generate, EnsembleSpec, Problem, ProblemKind};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

fn sigma_min(a: &Matrix) -> f64 {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice()).singular_values().min()
}

fn ensemble() -> Vec<Problem> {
    let mut out = Vec::new();
    for (i, &n) in [4usize, 8, 16, 35].iter().enumerate() {
        out.extend(generate(&EnsembleSpec::lls(13, 100.max(2 * n), n, (-8, 8), i as u64)).unwrap());
        out.extend(generate(&EnsembleSpec::lse(12, n, (-8, 8), 10 + i as u64)).unwrap());
    }
    out
}

#[test]
fn planted_problems_converge_to_the_direct_solution() {
    let rule = StoppingRule::default();
    let problems = ensemble();
    assert_eq!(problems.len(), 100);
    for (i, p) in problems.iter().enumerate() {
        let n = p.n();
        let rep = solve_problem(p, &vec![0.0; n], &rule, GuessTag::Zero).unwrap();
        assert_eq!(rep.termination, Termination::Converged, "problem {i} ({:?})", p.kind());
        assert_eq!(rep.residual_history.len(), rep.iterations + 1);
        let direct = solve_direct(p.a(), p.b()).unwrap();
        let xs = p.x_star_f64().unwrap();
        assert!(linalg::max_abs(&linalg::sub(&direct, &xs)) <= 1e-8);
        // Consistent systems: A(x − x*) = A·x − b, so the error is bounded
        // by the residual over the smallest singular value.
        let r = linalg::residual_norm(p.a(), &rep.x_final, p.b());
        assert!((r - rep.final_residual()).abs() <= 1e-8 * linalg::norm(p.b()).max(1.0));
        let err = linalg::norm(&linalg::sub(&rep.x_final, &direct));
        assert!(err <= r / sigma_min(p.a()) * (1.0 + 1e-6) + 1e-10, "problem {i}: {err}");
        match p.kind() {
            ProblemKind::Lse => assert!(r <= rule.rtol * linalg::norm(p.b())),
            // Test (1) of the stopping rule with x0 = 0; the Frobenius norm
            // bounds the solver's running estimate of ‖A‖.
            ProblemKind::Lls => {
                let bound = rule.btol * linalg::norm(p.b())
                    + rule.atol * p.a().frobenius_norm() * linalg::norm(&rep.x_final);
                assert!(r <= bound + 1e-8, "problem {i}: {r} > {bound}");
            }
        }

        let seeded = solve_problem(p, &xs, &rule, GuessTag::Custom).unwrap();
        assert_eq!(seeded.iterations, 0);
        let from_direct = solve_problem(p, &direct, &rule, GuessTag::Custom).unwrap();
        assert_eq!(from_direct.iterations, 0, "problem {i}");
        assert!(seeded.iterations <= rep.iterations);
    }
}

#[test]
fn lsmr_residuals_do_not_increase() {
    for p in generate(&EnsembleSpec::lls(20, 60, 12, (-8, 8), 3).with_kappa(100.0)).unwrap() {
        let x0: Vec<f64> = (0..12).map(|k| (k as f64 * 0.7).sin()).collect();
        let rep = lsmr(p.a(), p.b(), &x0, &StoppingRule::default(), GuessTag::Custom).unwrap();
        for w in rep.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn inconsistent_least_squares_reaches_the_normal_equations_solution() {
    let p = &generate(&EnsembleSpec::lls(1, 50, 6, (-4, 4), 8)).unwrap()[0];
    let b: Vec<f64> = p.b().iter().enumerate().map(|(i, v)| v + ((i * 7 % 11) as f64 - 5.0)).collect();
    let rep = lsmr(p.a(), &b, &[0.0; 6], &StoppingRule::default(), GuessTag::Zero).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    let direct = solve_direct(p.a(), &b).unwrap();
    assert!(linalg::norm(&linalg::sub(&rep.x_final, &direct)) <= 1e-4 * linalg::norm(&direct));
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

/// Exact Gaussian elimination over the rationals.
fn exact_solve(a: &Matrix, b: &[f64]) -> Vec<BigRational> {
    let n = a.rows();
    let mut m: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigRational> = a.row(i).iter().map(|&v| rational(v)).collect();
            row.push(rational(b[i]));
            row
        })
        .collect();
    for k in 0..n {
        let piv = (k..n).find(|&i| !m[i][k].is_zero()).unwrap();
        m.swap(k, piv);
        for i in k + 1..n {
            let f = &m[i][k] / &m[k][k];
            let (top, rest) = m.split_at_mut(i);
            for (dst, src) in rest[0][k..=n].iter_mut().zip(&top[k][k..=n]) {
                *dst -= &f * src;
            }
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut s = m[i][n].clone();
        for j in i + 1..n {
            s -= &m[i][j] * &x[j];
        }
        x[i] = s / &m[i][i];
    }
    x
}

#[test]
fn hilbert_system_matches_exact_arithmetic() {
    let n = 6;
    let h = Matrix::from_fn(n, n, |i, j| 1.0 / (i + j + 1) as f64);
    let b = vec![1.0; n];
    let got = solve_direct(&h, &b).unwrap();
    let exact = exact_solve(&h, &b);
    let kappa = groundgap::problems::condition_number(&h).unwrap();
    assert!(kappa > 1e7);
    let norm_exact = exact.iter().map(|v| v.abs().to_f64().unwrap()).fold(0.0, f64::max);
    for (g, e) in got.iter().zip(&exact) {
        let diff = (rational(*g) - e).abs().to_f64().unwrap();
        assert!(diff <= kappa * 1e-14 * norm_exact, "{diff}");
    }
    assert!(BigRational::one() > BigRational::from_integer(BigInt::from(0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reports_are_deterministic(seed in any::<u64>(), n in 2usize..10) {
        let p = &generate(&EnsembleSpec::lse(1, n, (-8, 8), seed)).unwrap()[0];
        let x0 = vec![0.5; n];
        let r1 = bicg(p.a(), p.b(), &x0, &StoppingRule::default(), GuessTag::Custom).unwrap();
        let r2 = bicg(p.a(), p.b(), &x0, &StoppingRule::default(), GuessTag::Custom).unwrap();
        prop_assert_eq!(r1.to_json().unwrap(), r2.to_json().unwrap());
        prop_assert_eq!(r1.residual_history.len(), r1.iterations + 1);
    }
}
