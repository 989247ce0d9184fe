//! Iterative solvers with initial-guess support: LSMR for least squares,
//! BiCG for square systems, and a dense direct solver used as an oracle.
//!
//! A nonzero initial guess `x0` is handled by solving for the correction
//! `Δ` against the shifted right-hand side `r0 = b − A·x0`. Every report
//! stores the true residual `‖A·x_k − b‖` of each iterate, starting with
//! `x0` itself.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::problems::{Problem, ProblemKind};

/// Breakdown threshold on BiCG inner products, relative to the norms of the
/// vectors involved.
pub const BREAKDOWN_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    Breakdown,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
            Termination::Breakdown => "breakdown",
        }
    }
}

/// Where the initial guess came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessTag {
    Zero,
    Quantum,
    Custom,
}

impl GuessTag {
    pub fn as_str(self) -> &'static str {
        match self {
            GuessTag::Zero => "zero",
            GuessTag::Quantum => "quantum",
            GuessTag::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lsmr,
    Bicg,
}

/// Termination parameters. `atol`, `btol` and `conlim` apply to LSMR,
/// `rtol` to BiCG. `max_iters = None` picks the method default
/// (`2·min(m, n)` for LSMR, `10·n` for BiCG).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppingRule {
    pub atol: f64,
    pub btol: f64,
    pub conlim: f64,
    pub rtol: f64,
    pub max_iters: Option<usize>,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            atol: 1e-6,
            btol: 1e-6,
            conlim: 1e8,
            rtol: 1e-5,
            max_iters: None,
        }
    }
}

impl StoppingRule {
    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = Some(max_iters);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub method: Method,
    pub iterations: usize,
    pub termination: Termination,
    #[serde(rename = "residuals", serialize_with = "crate::fmt::ser_vec")]
    pub residual_history: Vec<f64>,
    #[serde(rename = "x", serialize_with = "crate::fmt::ser_vec")]
    pub x_final: Vec<f64>,
    #[serde(rename = "guess")]
    pub initial_guess_tag: GuessTag,
}

impl SolveReport {
    /// True residual of the last iterate.
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history always holds x0")
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn check_inputs(a: &Matrix, b: &[f64], x0: &[f64]) -> Result<()> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            context: "right-hand side",
            expected: a.rows(),
            got: b.len(),
        });
    }
    if x0.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            context: "initial guess",
            expected: a.cols(),
            got: x0.len(),
        });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("initial guess has non-finite entries"));
    }
    Ok(())
}

/// Plane rotation `(c, s, r)` with `c·a + s·b = r`, `−s·a + c·b = 0`.
fn sym_ortho(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        (if a == 0.0 { 1.0 } else { a.signum() }, 0.0, a.abs())
    } else if a == 0.0 {
        (0.0, b.signum(), b.abs())
    } else if b.abs() > a.abs() {
        let tau = a / b;
        let s = b.signum() / (1.0 + tau * tau).sqrt();
        (s * tau, s, b / s)
    } else {
        let tau = b / a;
        let c = a.signum() / (1.0 + tau * tau).sqrt();
        (c, c * tau, a / c)
    }
}

fn scale_in_place(v: &mut [f64], c: f64) {
    for x in v {
        *x *= c;
    }
}

/// LSMR on `min ‖A·x − b‖` started from `x0`.
///
/// Stopping tests follow the published LSMR criteria with `‖b‖` replaced
/// by `‖r0‖`: (1) `‖r‖ ≤ btol·‖r0‖ + atol·‖A‖·‖Δ‖`, (2)
/// `‖Aᵀr‖ ≤ atol·‖A‖·‖r‖`, (3) `cond(A) ≥ conlim`, plus their
/// machine-precision variants. Condition-limit stops are reported as
/// breakdown. Before iterating, `x0` is accepted as is when it passes
/// tests (1) or (2) for the original right-hand side `b`.
pub fn lsmr(a: &Matrix, b: &[f64], x0: &[f64], stop: &StoppingRule, guess: GuessTag) -> Result<SolveReport> {
    check_inputs(a, b, x0)?;
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(Error::invalid(format!("LSMR needs m >= n, got {m} x {n}")));
    }
    let max_iters = stop.max_iters.unwrap_or(2 * m.min(n));
    let r0 = linalg::sub(b, &a.mul_vec(x0));
    let mut history = vec![linalg::norm(&r0)];
    let report = |dx: &[f64], history: Vec<f64>, termination| {
        let x_final: Vec<f64> = x0.iter().zip(dx).map(|(p, q)| p + q).collect();
        SolveReport {
            method: Method::Lsmr,
            iterations: history.len() - 1,
            termination,
            residual_history: history,
            x_final,
            initial_guess_tag: guess,
        }
    };

    let mut u = r0;
    let mut beta = linalg::norm(&u);
    if beta > 0.0 {
        scale_in_place(&mut u, 1.0 / beta);
    }
    let mut v = a.tr_mul_vec(&u);
    let mut alpha = linalg::norm(&v);
    if alpha > 0.0 {
        scale_in_place(&mut v, 1.0 / alpha);
    }
    let mut dx = vec![0.0; n];
    if alpha * beta == 0.0 {
        return Ok(report(&dx, history, Termination::Converged));
    }
    // The shifted tests are relative to ‖r0‖, which cannot notice that a
    // good guess already solves the original problem. Check that first.
    let frob = a.frobenius_norm();
    if beta <= stop.btol * linalg::norm(b) + stop.atol * frob * linalg::norm(x0) || alpha <= stop.atol * frob {
        return Ok(report(&dx, history, Termination::Converged));
    }
    if max_iters == 0 {
        return Ok(report(&dx, history, Termination::MaxIters));
    }

    let normb = beta;
    let ctol = if stop.conlim > 0.0 { 1.0 / stop.conlim } else { 0.0 };
    let mut zetabar = alpha * beta;
    let mut alphabar = alpha;
    let (mut rho, mut rhobar, mut cbar, mut sbar) = (1.0, 1.0, 1.0, 0.0);
    let mut h = v.clone();
    let mut hbar = vec![0.0; n];
    let (mut betadd, mut betad, mut rhodold) = (beta, 0.0, 1.0);
    let (mut tautildeold, mut thetatilde, mut zeta, mut d) = (0.0, 0.0, 0.0, 0.0);
    let mut norm_a2 = alpha * alpha;
    let (mut maxrbar, mut minrbar) = (0.0f64, 1e100f64);

    let termination = loop {
        let itn = history.len();
        let av = a.mul_vec(&v);
        for (ui, avi) in u.iter_mut().zip(&av) {
            *ui = avi - alpha * *ui;
        }
        beta = linalg::norm(&u);
        if beta > 0.0 {
            scale_in_place(&mut u, 1.0 / beta);
            let atu = a.tr_mul_vec(&u);
            for (vi, ai) in v.iter_mut().zip(&atu) {
                *vi = ai - beta * *vi;
            }
            alpha = linalg::norm(&v);
            if alpha > 0.0 {
                scale_in_place(&mut v, 1.0 / alpha);
            }
        }

        // No damping, so the first rotation is trivial.
        let (chat, shat, alphahat) = sym_ortho(alphabar, 0.0);
        let rhoold = rho;
        let (c, s, rho_new) = sym_ortho(alphahat, beta);
        rho = rho_new;
        let thetanew = s * alpha;
        alphabar = c * alpha;

        let rhobarold = rhobar;
        let zetaold = zeta;
        let thetabar = sbar * rho;
        let rhotemp = cbar * rho;
        let (cb, sb, rb) = sym_ortho(cbar * rho, thetanew);
        cbar = cb;
        sbar = sb;
        rhobar = rb;
        zeta = cbar * zetabar;
        zetabar *= -sbar;

        let hb_coef = thetabar * rho / (rhoold * rhobarold);
        for (hb, hi) in hbar.iter_mut().zip(&h) {
            *hb = hi - hb_coef * *hb;
        }
        linalg::axpy(zeta / (rho * rhobar), &hbar, &mut dx);
        let h_coef = thetanew / rho;
        for (hi, vi) in h.iter_mut().zip(&v) {
            *hi = vi - h_coef * *hi;
        }

        // Residual norm estimate.
        let betaacute = chat * betadd;
        let betacheck = -shat * betadd;
        let betahat = c * betaacute;
        betadd = -s * betaacute;
        let thetatildeold = thetatilde;
        let (ctildeold, stildeold, rhotildeold) = sym_ortho(rhodold, thetabar);
        thetatilde = stildeold * rhobar;
        rhodold = ctildeold * rhobar;
        betad = -stildeold * betad + ctildeold * betahat;
        tautildeold = (zetaold - thetatildeold * tautildeold) / rhotildeold;
        let taud = (zeta - thetatilde * tautildeold) / rhodold;
        d += betacheck * betacheck;
        let normr = (d + (betad - taud).powi(2) + betadd * betadd).sqrt();

        norm_a2 += beta * beta;
        let norm_a = norm_a2.sqrt();
        norm_a2 += alpha * alpha;
        maxrbar = maxrbar.max(rhobarold);
        if itn > 1 {
            minrbar = minrbar.min(rhobarold);
        }
        let cond_a = maxrbar.max(rhotemp) / minrbar.min(rhotemp);
        let normar = zetabar.abs();
        let normx = linalg::norm(&dx);

        let x_k: Vec<f64> = x0.iter().zip(&dx).map(|(p, q)| p + q).collect();
        history.push(linalg::residual_norm(a, &x_k, b));

        let test1 = normr / normb;
        let test2 = if norm_a * normr != 0.0 {
            normar / (norm_a * normr)
        } else {
            f64::INFINITY
        };
        let test3 = 1.0 / cond_a;
        let t1 = test1 / (1.0 + norm_a * normx / normb);
        let rtol = stop.btol + stop.atol * norm_a * normx / normb;

        if test1 <= rtol || test2 <= stop.atol || 1.0 + t1 <= 1.0 || 1.0 + test2 <= 1.0 {
            break Termination::Converged;
        }
        if test3 <= ctol || 1.0 + test3 <= 1.0 {
            break Termination::Breakdown;
        }
        if alpha == 0.0 || beta == 0.0 {
            break Termination::Breakdown;
        }
        if itn >= max_iters {
            break Termination::MaxIters;
        }
    };
    Ok(report(&dx, history, termination))
}

/// BiCG on a square system started from `x0`, stopping when the true
/// residual satisfies `‖b − A·x_k‖ ≤ rtol·‖b‖`. On breakdown or budget
/// exhaustion the best iterate seen is returned; the history still holds
/// every iterate.
pub fn bicg(a: &Matrix, b: &[f64], x0: &[f64], stop: &StoppingRule, guess: GuessTag) -> Result<SolveReport> {
    check_inputs(a, b, x0)?;
    let n = a.cols();
    if a.rows() != n {
        return Err(Error::invalid(format!("BiCG needs a square matrix, got {} x {n}", a.rows())));
    }
    let max_iters = stop.max_iters.unwrap_or(10 * n);
    let bnorm = linalg::norm(b);
    if bnorm == 0.0 {
        return Ok(SolveReport {
            method: Method::Bicg,
            iterations: 0,
            termination: Termination::Converged,
            residual_history: vec![0.0],
            x_final: vec![0.0; n],
            initial_guess_tag: guess,
        });
    }
    let tol = stop.rtol * bnorm;
    let mut x = x0.to_vec();
    let mut r = linalg::sub(b, &a.mul_vec(&x));
    let mut history = vec![linalg::norm(&r)];
    let mut best = (history[0], x.clone());
    let finish = |history: Vec<f64>, x_final: Vec<f64>, termination| SolveReport {
        method: Method::Bicg,
        iterations: history.len() - 1,
        termination,
        residual_history: history,
        x_final,
        initial_guess_tag: guess,
    };
    if history[0] <= tol {
        return Ok(finish(history, x, Termination::Converged));
    }
    let mut rt = r.clone();
    let mut p = r.clone();
    let mut pt = rt.clone();
    let mut rho = linalg::dot(&rt, &r);
    if rho.abs() <= BREAKDOWN_TOL * linalg::norm(&rt) * linalg::norm(&r) {
        return Ok(finish(history, x, Termination::Breakdown));
    }
    let termination = loop {
        if history.len() > max_iters {
            break Termination::MaxIters;
        }
        let q = a.mul_vec(&p);
        let qt = a.tr_mul_vec(&pt);
        let pivot = linalg::dot(&pt, &q);
        if pivot.abs() <= BREAKDOWN_TOL * linalg::norm(&pt) * linalg::norm(&q) {
            break Termination::Breakdown;
        }
        let step = rho / pivot;
        linalg::axpy(step, &p, &mut x);
        linalg::axpy(-step, &q, &mut r);
        linalg::axpy(-step, &qt, &mut rt);
        let res = linalg::residual_norm(a, &x, b);
        history.push(res);
        if res < best.0 {
            best = (res, x.clone());
        }
        if res <= tol {
            return Ok(finish(history, x, Termination::Converged));
        }
        let rho_new = linalg::dot(&rt, &r);
        if rho_new.abs() <= BREAKDOWN_TOL * linalg::norm(&rt) * linalg::norm(&r) {
            break Termination::Breakdown;
        }
        let ratio = rho_new / rho;
        rho = rho_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + ratio * *pi;
        }
        for (pi, ri) in pt.iter_mut().zip(&rt) {
            *pi = ri + ratio * *pi;
        }
    };
    Ok(finish(history, best.1, termination))
}

/// Dense oracle: partial-pivot LU for square systems, Cholesky on the
/// normal equations for tall ones.
pub fn solve_direct(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            context: "right-hand side",
            expected: a.rows(),
            got: b.len(),
        });
    }
    match a.rows().cmp(&a.cols()) {
        std::cmp::Ordering::Equal => linalg::lu_solve(a, b),
        std::cmp::Ordering::Greater => linalg::cholesky_solve(&a.gram(), &a.tr_mul_vec(b)),
        std::cmp::Ordering::Less => Err(Error::invalid("underdetermined systems are not supported")),
    }
}

/// LSMR for least squares, BiCG for square systems.
pub fn solve_problem(problem: &Problem, x0: &[f64], stop: &StoppingRule, guess: GuessTag) -> Result<SolveReport> {
    match problem.kind() {
        ProblemKind::Lls => lsmr(problem.a(), problem.b(), x0, stop, guess),
        ProblemKind::Lse => bicg(problem.a(), problem.b(), x0, stop, guess),
    }
}
