//! Sampler-seeded iterative solves and head-to-head comparisons against the
//! zero initial guess.
//!
//! Pipeline per problem: compile the least-squares objective to a QUBO,
//! sample it, optionally run greedy descent on the best read, decode the
//! bits to a real vector and hand that vector to LSMR (least squares) or
//! BiCG (square systems) as the initial guess.

use rayon::prelude::*;
use serde::Serialize;

use crate::encoding::{build_qubo, decode, FixedPointEncoding};
use crate::error::{Error, Result};
use crate::fmt::f17;
use crate::krylov::{solve_problem, GuessTag, SolveReport, StoppingRule, Termination};
use crate::linalg;
use crate::problems::Problem;
use crate::rng::{derive_seed, stage};
use crate::samplers::{greedy_descent, sample_sa, solve_exhaustive, SampleSet};

/// Residuals closer than this are a tie.
pub const RESIDUAL_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerChoice {
    Exhaustive,
    Sa { reads: usize, sweeps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HybridConfig {
    pub encoding: FixedPointEncoding,
    pub sampler: SamplerChoice,
    pub post_process: bool,
    pub stop: StoppingRule,
    pub seed: u64,
}

impl HybridConfig {
    pub fn new(encoding: FixedPointEncoding, sampler: SamplerChoice) -> Self {
        Self {
            encoding,
            sampler,
            post_process: false,
            stop: StoppingRule::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SamplerChoice::Sa { reads, sweeps } = self.sampler {
            if reads == 0 || sweeps == 0 {
                return Err(Error::invalid("annealing needs reads >= 1 and sweeps >= 1"));
            }
        }
        Ok(())
    }
}

/// Output of one seeded solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridRun {
    pub report: SolveReport,
    pub samples: SampleSet,
    /// Bits handed to the decoder (after post-processing, if enabled).
    pub seed_bits: Vec<bool>,
    pub guess: Vec<f64>,
}

/// Sample, decode, and solve from the decoded guess. `problem_index`
/// selects the annealing stream.
pub fn run_hybrid(problem: &Problem, config: &HybridConfig, problem_index: u64) -> Result<HybridRun> {
    config.validate()?;
    let qubo = build_qubo(problem, &config.encoding);
    let samples = match config.sampler {
        SamplerChoice::Exhaustive => solve_exhaustive(&qubo),
        SamplerChoice::Sa { reads, sweeps } => sample_sa(
            &qubo,
            reads,
            sweeps,
            derive_seed(config.seed, stage::ANNEAL, problem_index),
        ),
    }
    .map_err(|e| e.in_stage("sample"))?;
    let best = samples
        .best()
        .ok_or_else(|| Error::invalid("sampler returned no states").in_stage("sample"))?;
    let seed_bits = if config.post_process {
        greedy_descent(&qubo, &best.bits).map_err(|e| e.in_stage("post-process"))?
    } else {
        best.bits.clone()
    };
    let guess = decode(&seed_bits, &config.encoding, problem.n()).map_err(|e| e.in_stage("decode"))?;
    let report = solve_problem(problem, &guess, &config.stop, GuessTag::Quantum).map_err(|e| e.in_stage("solve"))?;
    Ok(HybridRun {
        report,
        samples,
        seed_bits,
        guess,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Quantum,
    Classical,
    Tie,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Quantum => "quantum",
            Verdict::Classical => "classical",
            Verdict::Tie => "tie",
        }
    }
}

/// Metric (i): fewer iterations to converge wins. A run that converged
/// beats one that did not; two non-converged runs tie.
pub fn iteration_verdict(iq: usize, q_converged: bool, iz: usize, z_converged: bool) -> Verdict {
    match (q_converged, z_converged) {
        (true, false) => Verdict::Quantum,
        (false, true) => Verdict::Classical,
        (false, false) => Verdict::Tie,
        (true, true) => match iq.cmp(&iz) {
            std::cmp::Ordering::Less => Verdict::Quantum,
            std::cmp::Ordering::Greater => Verdict::Classical,
            std::cmp::Ordering::Equal => Verdict::Tie,
        },
    }
}

/// Metric (ii): smaller residual after the common iteration budget wins.
pub fn residual_verdict(rq: f64, rz: f64) -> Verdict {
    if (rq - rz).abs() <= RESIDUAL_TIE_TOL {
        Verdict::Tie
    } else if rq < rz {
        Verdict::Quantum
    } else {
        Verdict::Classical
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub problem_id: usize,
    pub iterations_quantum: usize,
    pub iterations_zero: usize,
    pub termination_quantum: Termination,
    pub termination_zero: Termination,
    /// Residuals after `iterations_zero` iterations; `None` when the
    /// baseline did not converge, which makes metric (ii) unusable.
    pub residual_quantum_at_fixed: Option<f64>,
    pub residual_zero_at_fixed: Option<f64>,
    pub verdict_iters: Verdict,
    pub verdict_residual: Option<Verdict>,
}

impl Comparison {
    /// Recompute both verdicts from the stored numbers.
    pub fn recomputed_verdicts(&self) -> (Verdict, Option<Verdict>) {
        let vi = iteration_verdict(
            self.iterations_quantum,
            self.termination_quantum == Termination::Converged,
            self.iterations_zero,
            self.termination_zero == Termination::Converged,
        );
        let vr = match (self.residual_quantum_at_fixed, self.residual_zero_at_fixed) {
            (Some(q), Some(z)) => Some(residual_verdict(q, z)),
            _ => None,
        };
        (vi, vr)
    }
}

fn true_residual(problem: &Problem, report: &SolveReport) -> f64 {
    linalg::residual_norm(problem.a(), &report.x_final, problem.b())
}

/// Seeded solve versus the zero-guess baseline on both metrics.
pub fn compare(problem: &Problem, config: &HybridConfig, problem_id: usize) -> Result<Comparison> {
    let quantum = run_hybrid(problem, config, problem_id as u64)?;
    let zeros = vec![0.0; problem.n()];
    let zero = solve_problem(problem, &zeros, &config.stop, GuessTag::Zero).map_err(|e| e.in_stage("baseline"))?;
    let (rq, rz) = if zero.termination == Termination::Converged {
        let fixed = config.stop.with_max_iters(zero.iterations);
        let q = solve_problem(problem, &quantum.guess, &fixed, GuessTag::Quantum)
            .map_err(|e| e.in_stage("fixed-budget solve"))?;
        let z = solve_problem(problem, &zeros, &fixed, GuessTag::Zero).map_err(|e| e.in_stage("fixed-budget baseline"))?;
        (Some(true_residual(problem, &q)), Some(true_residual(problem, &z)))
    } else {
        (None, None)
    };
    let mut c = Comparison {
        problem_id,
        iterations_quantum: quantum.report.iterations,
        iterations_zero: zero.iterations,
        termination_quantum: quantum.report.termination,
        termination_zero: zero.termination,
        residual_quantum_at_fixed: rq,
        residual_zero_at_fixed: rz,
        verdict_iters: Verdict::Tie,
        verdict_residual: None,
    };
    (c.verdict_iters, c.verdict_residual) = c.recomputed_verdicts();
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub wins_iters: usize,
    pub ties_iters: usize,
    pub losses_iters: usize,
    pub wins_resid: usize,
    pub ties_resid: usize,
    pub losses_resid: usize,
    /// Median of `100·(iters_zero − iters_quantum)/iters_zero` over metric
    /// (i) quantum wins; `null` when there are none.
    #[serde(serialize_with = "ser_opt")]
    pub median_improvement_pct: Option<f64>,
    pub problems: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Successful problems whose baseline did not converge.
    pub unusable_resid: usize,
    /// False when no problem succeeded.
    pub valid: bool,
}

fn ser_opt<S: serde::Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => crate::fmt::ser_f64(v, s),
        None => s.serialize_none(),
    }
}

impl BenchmarkSummary {
    pub fn from_comparisons(comparisons: &[Comparison], failed: usize) -> Self {
        let count = |f: &dyn Fn(&Comparison) -> bool| comparisons.iter().filter(|c| f(c)).count();
        let mut improvements: Vec<f64> = comparisons
            .iter()
            .filter(|c| c.verdict_iters == Verdict::Quantum && c.iterations_zero > 0)
            .map(|c| 100.0 * (c.iterations_zero as f64 - c.iterations_quantum as f64) / c.iterations_zero as f64)
            .collect();
        improvements.sort_by(f64::total_cmp);
        let median_improvement_pct = match improvements.len() {
            0 => None,
            k if k % 2 == 1 => Some(improvements[k / 2]),
            k => Some(0.5 * (improvements[k / 2 - 1] + improvements[k / 2])),
        };
        Self {
            wins_iters: count(&|c| c.verdict_iters == Verdict::Quantum),
            ties_iters: count(&|c| c.verdict_iters == Verdict::Tie),
            losses_iters: count(&|c| c.verdict_iters == Verdict::Classical),
            wins_resid: count(&|c| c.verdict_residual == Some(Verdict::Quantum)),
            ties_resid: count(&|c| c.verdict_residual == Some(Verdict::Tie)),
            losses_resid: count(&|c| c.verdict_residual == Some(Verdict::Classical)),
            median_improvement_pct,
            problems: comparisons.len() + failed,
            succeeded: comparisons.len(),
            failed,
            unusable_resid: count(&|c| c.verdict_residual.is_none()),
            valid: !comparisons.is_empty(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkFailure {
    pub problem_id: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub comparisons: Vec<Comparison>,
    pub failures: Vec<BenchmarkFailure>,
    pub summary: BenchmarkSummary,
}

impl Benchmark {
    /// CSV `problem_id,iters_quantum,iters_zero,res_quantum,res_zero,verdict_iters,verdict_residual`.
    /// Residual cells are empty and the verdict reads `unusable` when the
    /// baseline did not converge.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("problem_id,iters_quantum,iters_zero,res_quantum,res_zero,verdict_iters,verdict_residual\n");
        for c in &self.comparisons {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.problem_id,
                c.iterations_quantum,
                c.iterations_zero,
                c.residual_quantum_at_fixed.map(f17).unwrap_or_default(),
                c.residual_zero_at_fixed.map(f17).unwrap_or_default(),
                c.verdict_iters.as_str(),
                c.verdict_residual.map_or("unusable", Verdict::as_str)
            ));
        }
        out
    }
}

/// Compare every problem of an ensemble. Problems run in parallel and are
/// reported in input order; failures are recorded, not fatal.
pub fn run_benchmark(problems: &[Problem], config: &HybridConfig) -> Result<Benchmark> {
    if problems.is_empty() {
        return Err(Error::invalid("benchmark needs at least one problem"));
    }
    config.validate()?;
    let outcomes: Vec<Result<Comparison>> = problems
        .par_iter()
        .enumerate()
        .map(|(i, p)| compare(p, config, i))
        .collect();
    let mut comparisons = Vec::new();
    let mut failures = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(c) => comparisons.push(c),
            Err(e) => failures.push(BenchmarkFailure {
                problem_id: i,
                message: e.to_string(),
            }),
        }
    }
    let summary = BenchmarkSummary::from_comparisons(&comparisons, failures.len());
    Ok(Benchmark {
        comparisons,
        failures,
        summary,
    })
}
