//! Lanczos with full reorthogonalization for the lowest eigenpair of a real
//! symmetric operator, optionally restricted to the orthogonal complement of
//! a set of (already converged) vectors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::tridiagonal;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};

pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);
    /// Upper bound on the spectral radius, used to scale tolerances.
    fn norm_bound(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosConfig {
    /// Absolute residual `‖H y − θ y‖` accepted as converged. The effective
    /// tolerance is never below `1e-14 · norm_bound`.
    pub residual_tol: f64,
    /// Total matrix-vector product budget.
    pub max_matvecs: usize,
    /// Krylov basis size before an explicit restart.
    pub max_basis: usize,
}

pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub matvecs: usize,
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // Classical Gram-Schmidt, twice.
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

pub fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Lowest eigenpair of `P H P` on the complement of `locked`, where `locked`
/// is an orthonormal set (possibly empty).
pub fn lowest<O: SymmetricOperator>(
    op: &O,
    locked: &[Vec<f64>],
    start: Vec<f64>,
    cfg: &LanczosConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Eigenpair> {
    let dim = op.dim();
    let free_dim = dim - locked.len();
    let tol = cfg.residual_tol.max(1e-14 * op.norm_bound());
    let mut matvecs = 0;
    let mut start = start;

    loop {
        let mut q0 = start;
        orthogonalize(&mut q0, locked);
        let mut n0 = norm(&q0);
        if n0 < 1e-8 {
            q0 = random_unit(dim, rng);
            orthogonalize(&mut q0, locked);
            n0 = norm(&q0);
        }
        q0.iter_mut().for_each(|x| *x /= n0);

        let basis_cap = cfg.max_basis.min(free_dim).max(1);
        let mut basis: Vec<Vec<f64>> = vec![q0];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];

        loop {
            let k = basis.len() - 1;
            op.apply_into(&basis[k], &mut w);
            matvecs += 1;
            let a = dot(&basis[k], &w);
            alpha.push(a);
            axpy(-a, &basis[k], &mut w);
            if k > 0 {
                axpy(-beta[k - 1], &basis[k - 1], &mut w);
            }
            orthogonalize(&mut w, locked);
            orthogonalize(&mut w, &basis);
            let b = norm(&w);

            let (theta, y) = tridiagonal::lowest_eigenpair(&alpha, &beta);
            let residual = b * y[k].abs();
            let exhausted = basis.len() >= free_dim;
            if residual <= tol || b <= tol || exhausted {
                let mut vector = vec![0.0; dim];
                for (yi, q) in y.iter().zip(&basis) {
                    axpy(*yi, q, &mut vector);
                }
                let nv = norm(&vector);
                vector.iter_mut().for_each(|x| *x /= nv);
                return Ok(Eigenpair {
                    value: theta,
                    vector,
                    matvecs,
                });
            }
            if matvecs >= cfg.max_matvecs {
                return Err(Error::NoConvergence {
                    matvecs,
                    residual,
                });
            }
            if basis.len() >= basis_cap {
                // Explicit restart from the current Ritz vector.
                let mut ritz = vec![0.0; dim];
                for (yi, q) in y.iter().zip(&basis) {
                    axpy(*yi, q, &mut ritz);
                }
                start = ritz;
                break;
            }
            beta.push(b);
            let next: Vec<f64> = w.iter().map(|x| x / b).collect();
            basis.push(next);
        }
    }
}
