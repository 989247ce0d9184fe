//! Browser bindings for the interactive demo page.
//!
//! Every export takes plain numbers and returns a JSON string. The `*_json`
//! functions hold the logic and run natively, so they are tested without a
//! JavaScript engine.

use serde_json::json;
use wasm_bindgen::prelude::*;

use groundgap::encoding::{build_qubo, qubo_to_ising, range_scale_factor, scale_ising, FixedPointEncoding};
use groundgap::hybrid::{compare, run_hybrid, HybridConfig, SamplerChoice};
use groundgap::krylov::{solve_problem, GuessTag};
use groundgap::problems::{generate, EnsembleSpec, Problem};
use groundgap::spectral::{scan_gap, EigenConfig, Schedule};
use groundgap::sweeps::{fit_curve, CurveFamily};

/// Larger models make the page unresponsive.
pub const MAX_DEMO_QUBITS: usize = 12;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn one_problem(m: usize, n: usize, c: usize, kappa: f64, seed: u64) -> Result<(Problem, FixedPointEncoding), String> {
    if n * c > MAX_DEMO_QUBITS {
        return Err(format!("{} qubits requested, the demo allows {MAX_DEMO_QUBITS}", n * c));
    }
    let half = 1i64 << (c.max(2) - 1);
    let mut spec = EnsembleSpec::lls(1, m, n, (-half, half), seed);
    if kappa > 1.0 {
        spec = spec.with_kappa(kappa);
    }
    let problem = generate(&spec).map_err(err)?.remove(0);
    Ok((problem, FixedPointEncoding::twos_complement(c).map_err(err)?))
}

/// Gap curve of one random planted least-squares problem.
pub fn gap_curve_json(m: usize, n: usize, c: usize, kappa: f64, scaled: bool, grid: usize, seed: u64) -> Result<String, String> {
    let (problem, enc) = one_problem(m, n, c, kappa, seed)?;
    let raw = qubo_to_ising(&build_qubo(&problem, &enc));
    let target = if scaled { scale_ising(&raw) } else { raw.clone() };
    let cfg = EigenConfig {
        max_qubits: MAX_DEMO_QUBITS,
        seed,
        ..EigenConfig::default()
    };
    let scan = scan_gap(&target, &Schedule::linear(grid), &cfg).map_err(err)?;
    let gap: Vec<f64> = scan.gaps().collect();
    Ok(json!({
        "num_qubits": n * c,
        "x_star": problem.x_star(),
        "scale_factor": range_scale_factor(&raw).unwrap_or(1.0),
        "s": scan.s,
        "e0": scan.e0,
        "e1": scan.e1,
        "gap": gap,
        "g_min": scan.g_min,
        "s_at_min": scan.s_at_min,
    })
    .to_string())
}

/// Sampler-seeded solve against the zero guess on one planted problem,
/// with both residual histories.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_compare_json(
    m: usize,
    n: usize,
    c: usize,
    annealing: bool,
    reads: usize,
    sweeps: usize,
    post_process: bool,
    seed: u64,
) -> Result<String, String> {
    let (problem, enc) = one_problem(m, n, c, 1.0, seed)?;
    let sampler = if annealing {
        SamplerChoice::Sa { reads, sweeps }
    } else {
        SamplerChoice::Exhaustive
    };
    let mut config = HybridConfig::new(enc, sampler);
    config.post_process = post_process;
    config.seed = seed;
    let seeded = run_hybrid(&problem, &config, 0).map_err(err)?;
    let zero = solve_problem(&problem, &vec![0.0; n], &config.stop, GuessTag::Zero).map_err(err)?;
    let cmp = compare(&problem, &config, 0).map_err(err)?;
    Ok(json!({
        "x_star": problem.x_star(),
        "guess": seeded.guess,
        "best_energy": seeded.samples.best().map(|s| s.energy),
        "iterations_quantum": cmp.iterations_quantum,
        "iterations_zero": cmp.iterations_zero,
        "residuals_quantum": seeded.report.residual_history,
        "residuals_zero": zero.residual_history,
        "verdict_iters": cmp.verdict_iters.as_str(),
        "verdict_residual": cmp.verdict_residual.map_or("unusable", |v| v.as_str()),
    })
    .to_string())
}

/// Fit a curve family to points and sample the fitted curve.
pub fn fit_points_json(xs: &[f64], ys: &[f64], family: &str) -> Result<String, String> {
    let family: CurveFamily = family.parse().map_err(err)?;
    let fit = fit_curve(family, xs, ys).map_err(err)?;
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let curve_x: Vec<f64> = (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect();
    let curve_y: Vec<f64> = curve_x.iter().map(|&x| fit.eval(x)).collect();
    Ok(json!({
        "family": family.as_str(),
        "params": fit.params,
        "relative_error": fit.relative_error,
        "curve_x": curve_x,
        "curve_y": curve_y,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn gap_curve(m: usize, n: usize, c: usize, kappa: f64, scaled: bool, grid: usize, seed: u32) -> Result<String, JsError> {
    gap_curve_json(m, n, c, kappa, scaled, grid, seed as u64).map_err(|e| JsError::new(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn hybrid_compare(
    m: usize,
    n: usize,
    c: usize,
    annealing: bool,
    reads: usize,
    sweeps: usize,
    post_process: bool,
    seed: u32,
) -> Result<String, JsError> {
    hybrid_compare_json(m, n, c, annealing, reads, sweeps, post_process, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fit_points(xs: &[f64], ys: &[f64], family: &str) -> Result<String, JsError> {
    fit_points_json(xs, ys, family).map_err(|e| JsError::new(&e))
}
