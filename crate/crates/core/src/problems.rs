//! Planted LSE/LLS instances, random ensembles and the ensemble file format.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{self, stage};

/// Planted solutions must reproduce `b` to this max-norm tolerance.
pub const PLANTED_TOLERANCE: f64 = 1e-9;

/// Singular values below this fraction of the largest mark a matrix as rank
/// deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemKind {
    /// Square linear system of equations.
    #[serde(rename = "LSE")]
    Lse,
    /// Overdetermined linear least squares.
    #[serde(rename = "LLS")]
    Lls,
}

impl ProblemKind {
    fn check_dims(self, m: usize, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("problem needs at least one column"));
        }
        match self {
            ProblemKind::Lse if m != n => Err(Error::invalid(format!(
                "LSE requires a square matrix, got {m}x{n}"
            ))),
            ProblemKind::Lls if m <= n => Err(Error::invalid(format!(
                "LLS requires more rows than columns, got {m}x{n}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Lse => "LSE",
            ProblemKind::Lls => "LLS",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lse" => Ok(ProblemKind::Lse),
            "lls" => Ok(ProblemKind::Lls),
            other => Err(Error::invalid(format!("unknown problem kind '{other}'"))),
        }
    }
}

/// A linear problem `A x ≈ b`, optionally with the integer solution it was
/// planted from.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    kind: ProblemKind,
    a: Matrix,
    b: Vec<f64>,
    x_star: Option<Vec<i64>>,
}

impl Problem {
    pub fn new(kind: ProblemKind, a: Matrix, b: Vec<f64>, x_star: Option<Vec<i64>>) -> Result<Self> {
        kind.check_dims(a.rows(), a.cols())?;
        if b.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                context: "right-hand side",
                expected: a.rows(),
                got: b.len(),
            });
        }
        if !a.is_finite() || b.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("problem contains non-finite entries"));
        }
        if let Some(x) = &x_star {
            if x.len() != a.cols() {
                return Err(Error::DimensionMismatch {
                    context: "planted solution",
                    expected: a.cols(),
                    got: x.len(),
                });
            }
            let err = planted_error(&a, &b, x);
            if err > PLANTED_TOLERANCE {
                return Err(Error::invalid(format!(
                    "planted solution misses b by {err:e} in max norm"
                )));
            }
        }
        Ok(Self { kind, a, b, x_star })
    }

    /// Build a planted problem with `b = A · x_star`.
    pub fn planted(kind: ProblemKind, a: Matrix, x_star: Vec<i64>) -> Result<Self> {
        let xf: Vec<f64> = x_star.iter().map(|&v| v as f64).collect();
        if xf.len() != a.cols() {
            return Err(Error::DimensionMismatch {
                context: "planted solution",
                expected: a.cols(),
                got: xf.len(),
            });
        }
        let b = a.mul_vec(&xf);
        Self::new(kind, a, b, Some(x_star))
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn x_star(&self) -> Option<&[i64]> {
        self.x_star.as_deref()
    }

    pub fn x_star_f64(&self) -> Option<Vec<f64>> {
        self.x_star
            .as_ref()
            .map(|x| x.iter().map(|&v| v as f64).collect())
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }
}

fn planted_error(a: &Matrix, b: &[f64], x: &[i64]) -> f64 {
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    linalg::max_abs(&linalg::sub(&a.mul_vec(&xf), b))
}

/// Recipe for a random ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: ProblemKind,
    pub count: usize,
    pub m: usize,
    pub n: usize,
    /// Half-open integer interval `[lo, hi)` for planted entries.
    pub value_range: (i64, i64),
    #[serde(default, serialize_with = "ser_opt_f64")]
    pub kappa_target: Option<f64>,
    pub seed: u64,
}

fn ser_opt_f64<S: serde::Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => crate::fmt::ser_f64(v, s),
        None => s.serialize_none(),
    }
}

impl EnsembleSpec {
    /// Least-squares ensemble with `count` problems of size `m × n`.
    pub fn lls(count: usize, m: usize, n: usize, value_range: (i64, i64), seed: u64) -> Self {
        Self {
            kind: ProblemKind::Lls,
            count,
            m,
            n,
            value_range,
            kappa_target: None,
            seed,
        }
    }

    pub fn lse(count: usize, n: usize, value_range: (i64, i64), seed: u64) -> Self {
        Self {
            kind: ProblemKind::Lse,
            count,
            m: n,
            n,
            value_range,
            kappa_target: None,
            seed,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa_target = Some(kappa);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("ensemble count must be positive"));
        }
        self.kind.check_dims(self.m, self.n)?;
        let (lo, hi) = self.value_range;
        if lo >= hi {
            return Err(Error::invalid(format!("empty value range [{lo}, {hi})")));
        }
        if let Some(k) = self.kappa_target {
            if !k.is_finite() || k < 1.0 {
                return Err(Error::invalid(format!("condition number target {k} must be >= 1")));
            }
        }
        Ok(())
    }

    /// A single column has one singular value, so any target above 1 is
    /// unattainable and the generated matrices have κ = 1.
    pub fn conditioning_is_degenerate(&self) -> bool {
        self.n == 1 && self.kappa_target.is_some_and(|k| k > 1.0)
    }
}

fn standard_normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn draw_planted(rng: &mut ChaCha8Rng, spec: &EnsembleSpec) -> Vec<i64> {
    let (lo, hi) = spec.value_range;
    let has_nonzero = !(lo == 0 && hi == 1);
    loop {
        let x: Vec<i64> = (0..spec.n).map(|_| rng.random_range(lo..hi)).collect();
        if spec.count > 1 && has_nonzero && x.iter().all(|&v| v == 0) {
            continue;
        }
        return x;
    }
}

/// Dense standard-normal matrices with uniformly drawn integer solutions.
pub fn generate_planted(spec: &EnsembleSpec) -> Result<Vec<Problem>> {
    spec.validate()?;
    if spec.kappa_target.is_some() {
        return Err(Error::invalid(
            "generate_planted does not take a condition number target; use generate_conditioned",
        ));
    }
    (0..spec.count)
        .map(|i| {
            let mut rng = rng::stream(spec.seed, stage::GENERATE, i as u64);
            let a = standard_normal_matrix(&mut rng, spec.m, spec.n);
            let x = draw_planted(&mut rng, spec);
            Problem::planted(spec.kind, a, x)
        })
        .collect()
}

/// Geometrically spaced singular values from 1 up to `kappa`.
pub fn geometric_spectrum(n: usize, kappa: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                kappa
            } else {
                kappa.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Matrices `U Σ Vᵀ` with Haar-like orthonormal factors and a geometric
/// singular-value profile, so that `κ(A)` equals the target.
pub fn generate_conditioned(spec: &EnsembleSpec) -> Result<Vec<Problem>> {
    spec.validate()?;
    let kappa = spec
        .kappa_target
        .ok_or_else(|| Error::invalid("generate_conditioned needs a condition number target"))?;
    let sigma = geometric_spectrum(spec.n, kappa);
    (0..spec.count)
        .map(|i| {
            let mut rng = rng::stream(spec.seed, stage::GENERATE, i as u64);
            let u = linalg::orthonormalize_columns(&standard_normal_matrix(&mut rng, spec.m, spec.n))?;
            let v = linalg::orthonormalize_columns(&standard_normal_matrix(&mut rng, spec.n, spec.n))?;
            let us = Matrix::from_fn(spec.m, spec.n, |r, c| u[(r, c)] * sigma[c]);
            let a = us.matmul(&v.transpose());
            let x = draw_planted(&mut rng, spec);
            Problem::planted(spec.kind, a, x)
        })
        .collect()
}

/// Dispatch on whether the spec asks for a condition number.
pub fn generate(spec: &EnsembleSpec) -> Result<Vec<Problem>> {
    if spec.kappa_target.is_some() {
        generate_conditioned(spec)
    } else {
        generate_planted(spec)
    }
}

/// `σ_max / σ_min`; infinite for rank-deficient input.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    let sv = linalg::singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Err(Error::invalid("condition number of a zero matrix"));
    }
    let smin = *sv.last().unwrap();
    if smin < RANK_TOLERANCE * smax {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

#[derive(Serialize, Deserialize)]
struct ProblemRecord {
    kind: ProblemKind,
    m: usize,
    n: usize,
    #[serde(serialize_with = "crate::fmt::ser_rows")]
    a: Vec<Vec<f64>>,
    #[serde(serialize_with = "crate::fmt::ser_vec")]
    b: Vec<f64>,
    x_star: Option<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    spec: Option<EnsembleSpec>,
    problems: Vec<ProblemRecord>,
}

/// Serialize an ensemble to its JSON document.
pub fn ensemble_to_json(spec: Option<&EnsembleSpec>, problems: &[Problem]) -> Result<String> {
    let file = EnsembleFile {
        spec: spec.cloned(),
        problems: problems
            .iter()
            .map(|p| ProblemRecord {
                kind: p.kind,
                m: p.m(),
                n: p.n(),
                a: p.a.to_rows(),
                b: p.b.clone(),
                x_star: p.x_star.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

/// Parse and validate an ensemble document. Record-level problems are
/// reported with the zero-based record index.
pub fn ensemble_from_json(text: &str) -> Result<(Option<EnsembleSpec>, Vec<Problem>)> {
    let file: EnsembleFile = serde_json::from_str(text)?;
    let mut problems = Vec::with_capacity(file.problems.len());
    for (record, r) in file.problems.into_iter().enumerate() {
        let wrap = |e: Error| Error::InvalidRecord {
            record,
            message: e.to_string(),
        };
        if r.a.len() != r.m || r.a.iter().any(|row| row.len() != r.n) {
            return Err(wrap(Error::invalid(format!(
                "matrix shape does not match m={} n={}",
                r.m, r.n
            ))));
        }
        let a = Matrix::from_rows(&r.a).map_err(wrap)?;
        problems.push(Problem::new(r.kind, a, r.b, r.x_star).map_err(wrap)?);
    }
    Ok((file.spec, problems))
}

pub fn save_ensemble(path: &Path, spec: Option<&EnsembleSpec>, problems: &[Problem]) -> Result<()> {
    std::fs::write(path, ensemble_to_json(spec, problems)?)?;
    Ok(())
}

pub fn load_ensemble(path: &Path) -> Result<(Option<EnsembleSpec>, Vec<Problem>)> {
    ensemble_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_paper_range() {
        let spec = EnsembleSpec::lls(1, 40, 2, (-2, 1), 3);
        let ps = generate_planted(&spec).unwrap();
        assert_eq!(ps.len(), 1);
        let x = ps[0].x_star().unwrap();
        assert!(x.iter().all(|v| (-2..1).contains(v)));
        assert_eq!(ps[0].m(), 40);
    }

    #[test]
    fn planted_only_zero_representable() {
        let spec = EnsembleSpec::lse(1, 3, (0, 1), 1);
        let p = &generate_planted(&spec).unwrap()[0];
        assert_eq!(p.x_star().unwrap(), &[0, 0, 0]);
        assert!(p.b().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_solutions_are_resampled_in_multi_problem_ensembles() {
        let spec = EnsembleSpec::lls(200, 5, 1, (-1, 1), 9);
        for p in generate_planted(&spec).unwrap() {
            assert_eq!(p.x_star().unwrap(), &[-1]);
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let spec = EnsembleSpec::lls(3, 10, 3, (-8, 8), 42);
        assert_eq!(generate_planted(&spec).unwrap(), generate_planted(&spec).unwrap());
        let other = EnsembleSpec { seed: 43, ..spec.clone() };
        assert_ne!(generate_planted(&spec).unwrap(), generate_planted(&other).unwrap());
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(generate_planted(&EnsembleSpec::lls(1, 3, 3, (0, 2), 0)).is_err());
        let mut lse = EnsembleSpec::lse(1, 3, (0, 2), 0);
        lse.m = 4;
        assert!(generate_planted(&lse).is_err());
        assert!(generate_planted(&EnsembleSpec::lls(1, 5, 2, (2, 2), 0)).is_err());
        assert!(generate_planted(&EnsembleSpec::lls(0, 5, 2, (0, 2), 0)).is_err());
    }

    #[test]
    fn kappa_below_one_rejected() {
        let spec = EnsembleSpec::lls(1, 10, 3, (-2, 1), 0).with_kappa(0.5);
        assert!(generate_conditioned(&spec).is_err());
        assert!(generate_conditioned(&EnsembleSpec::lls(1, 10, 3, (-2, 1), 0)).is_err());
        assert!(generate_planted(&EnsembleSpec::lls(1, 10, 3, (-2, 1), 0).with_kappa(2.0)).is_err());
    }

    #[test]
    fn isotropic_conditioning() {
        let spec = EnsembleSpec::lls(2, 12, 4, (-2, 1), 5).with_kappa(1.0);
        for p in generate_conditioned(&spec).unwrap() {
            let sv = linalg::singular_values(p.a());
            for s in sv {
                assert!((s - 1.0).abs() < 1e-13);
            }
            assert!((condition_number(p.a()).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_300_hit_precisely() {
        let spec = EnsembleSpec::lls(3, 40, 4, (-2, 1), 11).with_kappa(300.0);
        for p in generate_conditioned(&spec).unwrap() {
            let k = condition_number(p.a()).unwrap();
            assert!((k - 300.0).abs() <= 300.0 * 1e-6, "kappa {k}");
        }
    }

    #[test]
    fn single_column_is_degenerate() {
        let spec = EnsembleSpec::lls(1, 10, 1, (-2, 1), 0).with_kappa(50.0);
        assert!(spec.conditioning_is_degenerate());
        let p = &generate_conditioned(&spec).unwrap()[0];
        assert!((condition_number(p.a()).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn condition_number_simple_cases() {
        assert!((condition_number(&Matrix::from_diag(&[1.0, 5.0])).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(condition_number(&Matrix::identity(4)).unwrap(), 1.0);
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(condition_number(&singular).unwrap(), f64::INFINITY);
        assert!(condition_number(&Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn empty_ensemble_round_trip() {
        let text = ensemble_to_json(None, &[]).unwrap();
        let (spec, ps) = ensemble_from_json(&text).unwrap();
        assert!(spec.is_none());
        assert!(ps.is_empty());
    }

    #[test]
    fn nan_and_malformed_records_rejected() {
        let nan = r#"{"spec": null, "problems": [{"kind": "LLS", "m": 2, "n": 1, "a": [[1.0], [NaN]], "b": [1.0, 0.0], "x_star": null}]}"#;
        assert!(matches!(ensemble_from_json(nan), Err(Error::Parse { line: 1, .. })));

        let bad_shape = r#"{"spec": null, "problems": [
            {"kind": "LLS", "m": 2, "n": 1, "a": [[1.0], [2.0]], "b": [1.0, 2.0], "x_star": [1]},
            {"kind": "LLS", "m": 2, "n": 1, "a": [[1.0, 3.0], [2.0]], "b": [1.0, 2.0], "x_star": null}
        ]}"#;
        assert!(matches!(
            ensemble_from_json(bad_shape),
            Err(Error::InvalidRecord { record: 1, .. })
        ));

        let wrong_plant = r#"{"spec": null, "problems": [{"kind": "LLS", "m": 2, "n": 1, "a": [[1.0], [2.0]], "b": [1.0, 2.0], "x_star": [2]}]}"#;
        assert!(matches!(
            ensemble_from_json(wrong_plant),
            Err(Error::InvalidRecord { record: 0, .. })
        ));
    }
}
