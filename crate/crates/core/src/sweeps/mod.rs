//! Parameter sweeps of the minimum gap over random ensembles, with median /
//! MAD aggregation and curve fits.
//!
//! Each sweep varies one of precision bits `c`, variables `n`, rows `m` or
//! the condition number `κ` while the others stay fixed. For every value an
//! ensemble of planted least-squares problems is compiled to an Ising model,
//! optionally scaled into hardware range, and scanned for `g_min`.

mod fit;

use rayon::prelude::*;
use serde::Serialize;

use crate::encoding::{build_qubo, qubo_to_ising, range_scale_factor, scale_ising, FixedPointEncoding};
use crate::error::{Error, Result};
use crate::fmt::f17;
use crate::problems::{generate, EnsembleSpec, Problem};
use crate::rng::{derive_seed, stage};
use crate::spectral::{problem_gap, scan_gap, EigenConfig, Schedule};

pub use fit::{fit_curve, nelder_mead, CurveFamily, CurveFit, MIN_STARTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    PrecisionC,
    VariablesN,
    RowsM,
    ConditionKappa,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 4] = [
        SweepParameter::PrecisionC,
        SweepParameter::VariablesN,
        SweepParameter::RowsM,
        SweepParameter::ConditionKappa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::PrecisionC => "precision_c",
            SweepParameter::VariablesN => "variables_n",
            SweepParameter::RowsM => "rows_m",
            SweepParameter::ConditionKappa => "condition_kappa",
        }
    }

    /// Short preset name used on the command line.
    pub fn preset_name(self) -> &'static str {
        match self {
            SweepParameter::PrecisionC => "precision",
            SweepParameter::VariablesN => "variables",
            SweepParameter::RowsM => "rows",
            SweepParameter::ConditionKappa => "condition",
        }
    }

    /// Families fitted to this sweep's medians by default.
    pub fn default_families(self) -> &'static [CurveFamily] {
        match self {
            SweepParameter::PrecisionC | SweepParameter::VariablesN => {
                &[CurveFamily::ExpDecay, CurveFamily::PolyDecay, CurveFamily::Plateau]
            }
            SweepParameter::RowsM | SweepParameter::ConditionKappa => {
                &[CurveFamily::Plateau, CurveFamily::PlateauOffset]
            }
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParameter::ALL
            .into_iter()
            .find(|p| p.as_str() == s || p.preset_name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown sweep {s:?}; expected precision, variables, rows or condition"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    #[serde(serialize_with = "crate::fmt::ser_vec")]
    pub values: Vec<f64>,
    pub per_value: usize,
    /// Rows, columns and bits per variable on the axes that stay fixed.
    pub m: usize,
    pub n: usize,
    pub c: usize,
    /// Half-open range of planted integer entries.
    pub value_range: (i64, i64),
    /// Scale the Ising model into `h ∈ [−2, 2]`, `J ∈ [−1, 1]` before scanning.
    pub scaled: bool,
    /// Also scan the unscaled model and record its `g_min`.
    pub record_unscaled: bool,
    pub grid_points: usize,
    #[serde(skip)]
    pub eigen: EigenConfig,
}

fn int_range(lo: usize, hi: usize, step: usize) -> Vec<f64> {
    (lo..=hi).step_by(step).map(|v| v as f64).collect()
}

impl SweepConfig {
    /// The published sweep setups, with 100 problems per value.
    pub fn preset(parameter: SweepParameter) -> Self {
        let base = Self {
            parameter,
            values: Vec::new(),
            per_value: 100,
            m: 40,
            n: 2,
            c: 2,
            value_range: (-2, 1),
            scaled: true,
            record_unscaled: false,
            grid_points: 100,
            eigen: EigenConfig::default(),
        };
        match parameter {
            SweepParameter::PrecisionC => Self {
                values: int_range(2, 6, 1),
                ..base
            },
            SweepParameter::VariablesN => Self {
                values: int_range(2, 6, 1),
                ..base
            },
            SweepParameter::RowsM => Self {
                values: int_range(10, 300, 10),
                n: 4,
                ..base
            },
            SweepParameter::ConditionKappa => {
                let mut values = int_range(1, 10, 1);
                values.extend(int_range(20, 300, 10));
                Self {
                    values,
                    n: 4,
                    record_unscaled: true,
                    ..base
                }
            }
        }
    }

    pub fn with_per_value(mut self, per_value: usize) -> Self {
        self.per_value = per_value;
        self
    }

    /// `(m, n, c, κ)` for one sweep value.
    pub fn dims(&self, value: f64) -> (usize, usize, usize, Option<f64>) {
        let v = value as usize;
        match self.parameter {
            SweepParameter::PrecisionC => (self.m, self.n, v, None),
            SweepParameter::VariablesN => (self.m, v, self.c, None),
            SweepParameter::RowsM => (v, self.n, self.c, None),
            SweepParameter::ConditionKappa => (self.m, self.n, self.c, Some(value)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep needs at least one value"));
        }
        if self.per_value == 0 {
            return Err(Error::invalid("problems per value must be positive"));
        }
        if self.grid_points < 2 {
            return Err(Error::invalid("gap scan needs at least 2 grid points"));
        }
        for &v in &self.values {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite sweep value {v}")));
            }
            if self.parameter != SweepParameter::ConditionKappa && (v.fract() != 0.0 || v < 1.0) {
                return Err(Error::invalid(format!(
                    "{} values must be positive integers, got {v}",
                    self.parameter.as_str()
                )));
            }
            let (m, n, c, kappa) = self.dims(v);
            if c < 2 {
                return Err(Error::invalid(format!("two's complement needs c >= 2, got {c}")));
            }
            if n * c > self.eigen.max_qubits {
                return Err(Error::invalid(format!(
                    "value {v} needs {} qubits, limit is {}",
                    n * c,
                    self.eigen.max_qubits
                )));
            }
            let mut spec = EnsembleSpec::lls(self.per_value, m, n, self.value_range, 0);
            if let Some(k) = kappa {
                spec = spec.with_kappa(k);
            }
            spec.validate()?;
        }
        Ok(())
    }
}

/// Gap data for one compiled problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSummary {
    /// `g_min` of the scanned model (scaled when the config says so).
    pub g_min: f64,
    pub s_at_min: f64,
    pub g_min_unscaled: Option<f64>,
    /// Gap of the diagonal Hamiltonian at `s = 1`, before and after scaling.
    pub final_gap_unscaled: f64,
    pub final_gap_scaled: f64,
    pub scale_factor: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemRecord {
    pub value: f64,
    pub index: usize,
    pub gaps: GapSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub value: f64,
    /// `None` when the whole ensemble for this value failed to generate.
    pub index: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub median_gmin: f64,
    pub mad_gmin: f64,
    pub n_samples: usize,
    pub median_unscaled_gap: Option<f64>,
    pub median_scale_factor: Option<f64>,
    pub median_gmin_unscaled: Option<f64>,
    pub mad_gmin_unscaled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    pub records: Vec<ProblemRecord>,
    pub failures: Vec<SweepFailure>,
}

impl SweepResult {
    /// CSV `param,value,median_gmin,mad_gmin,n_samples`; the condition
    /// sweep appends `median_unscaled_gap,median_scale_factor` and, when
    /// recorded, `median_gmin_unscaled,mad_gmin_unscaled`.
    pub fn to_csv(&self) -> String {
        let extra = self.parameter == SweepParameter::ConditionKappa;
        let unscaled = self.rows.iter().any(|r| r.median_gmin_unscaled.is_some());
        let mut out = String::from("param,value,median_gmin,mad_gmin,n_samples");
        if extra {
            out.push_str(",median_unscaled_gap,median_scale_factor");
        }
        if unscaled {
            out.push_str(",median_gmin_unscaled,mad_gmin_unscaled");
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(f17).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}",
                self.parameter.as_str(),
                f17(r.value),
                f17(r.median_gmin),
                f17(r.mad_gmin),
                r.n_samples
            ));
            if extra {
                out.push_str(&format!(",{},{}", opt(r.median_unscaled_gap), opt(r.median_scale_factor)));
            }
            if unscaled {
                out.push_str(&format!(",{},{}", opt(r.median_gmin_unscaled), opt(r.mad_gmin_unscaled)));
            }
            out.push('\n');
        }
        out
    }

    /// Per-problem CSV `value,index,g_min,s_at_min,g_min_unscaled,final_gap_unscaled,final_gap_scaled,scale_factor`.
    pub fn records_csv(&self) -> String {
        let mut out = String::from(
            "value,index,g_min,s_at_min,g_min_unscaled,final_gap_unscaled,final_gap_scaled,scale_factor\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                f17(r.value),
                r.index,
                f17(r.gaps.g_min),
                f17(r.gaps.s_at_min),
                r.gaps.g_min_unscaled.map(f17).unwrap_or_default(),
                f17(r.gaps.final_gap_unscaled),
                f17(r.gaps.final_gap_scaled),
                f17(r.gaps.scale_factor)
            ));
        }
        out
    }

    pub fn xs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn medians(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.median_gmin).collect()
    }

    /// Fit `family` to the row medians.
    pub fn fit(&self, family: CurveFamily) -> Result<CurveFit> {
        fit_curve(family, &self.xs(), &self.medians())
    }
}

/// Median (mean of the two middle values for even length) and the median
/// absolute deviation from it.
pub fn median_and_mad(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty list"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("median of a list containing NaN"));
    }
    let med = median(values.to_vec());
    let dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    Ok((med, median(dev)))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Compile, optionally scale, and scan one problem.
pub fn evaluate_problem(
    problem: &Problem,
    enc: &FixedPointEncoding,
    scaled: bool,
    record_unscaled: bool,
    schedule: &Schedule,
    eigen: &EigenConfig,
) -> Result<GapSummary> {
    let raw = qubo_to_ising(&build_qubo(problem, enc));
    let k = range_scale_factor(&raw).unwrap_or(1.0);
    let fitted = scale_ising(&raw);
    let target = if scaled { &fitted } else { &raw };
    let scan = scan_gap(target, schedule, eigen).map_err(|e| e.in_stage("gap scan"))?;
    let unscaled = if record_unscaled && scaled {
        Some(scan_gap(&raw, schedule, eigen).map_err(|e| e.in_stage("unscaled gap scan"))?.g_min)
    } else if record_unscaled {
        Some(scan.g_min)
    } else {
        None
    };
    Ok(GapSummary {
        g_min: scan.g_min,
        s_at_min: scan.s_at_min,
        g_min_unscaled: unscaled,
        final_gap_unscaled: problem_gap(&raw),
        final_gap_scaled: problem_gap(&fitted),
        scale_factor: k,
        degenerate: scan.is_degenerate(),
    })
}

/// Aggregate per-problem records into one row.
pub fn aggregate(parameter: SweepParameter, value: f64, records: &[&ProblemRecord]) -> Result<SweepRow> {
    let g: Vec<f64> = records.iter().map(|r| r.gaps.g_min).collect();
    let (median_gmin, mad_gmin) = median_and_mad(&g)?;
    let kappa = parameter == SweepParameter::ConditionKappa;
    let med = |f: &dyn Fn(&GapSummary) -> f64| -> Result<f64> {
        Ok(median_and_mad(&records.iter().map(|r| f(&r.gaps)).collect::<Vec<_>>())?.0)
    };
    let unscaled: Option<Vec<f64>> = records.iter().map(|r| r.gaps.g_min_unscaled).collect();
    let (median_gmin_unscaled, mad_gmin_unscaled) = match unscaled {
        Some(u) => {
            let (a, b) = median_and_mad(&u)?;
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    Ok(SweepRow {
        value,
        median_gmin,
        mad_gmin,
        n_samples: records.len(),
        median_unscaled_gap: if kappa { Some(med(&|r| r.final_gap_unscaled)?) } else { None },
        median_scale_factor: if kappa { Some(med(&|r| r.scale_factor)?) } else { None },
        median_gmin_unscaled,
        mad_gmin_unscaled,
    })
}

/// Run a sweep. Problems are evaluated in parallel and merged in
/// `(value, index)` order, so the output does not depend on the worker
/// count. Failures are collected instead of aborting the sweep.
pub fn run_sweep(config: &SweepConfig, seed: u64) -> Result<SweepResult> {
    config.validate()?;
    let schedule = Schedule::linear(config.grid_points);
    let mut failures = Vec::new();
    let mut tasks: Vec<(usize, f64, usize, Problem, FixedPointEncoding)> = Vec::new();
    for (vi, &value) in config.values.iter().enumerate() {
        let (m, n, c, kappa) = config.dims(value);
        let mut spec = EnsembleSpec::lls(
            config.per_value,
            m,
            n,
            config.value_range,
            derive_seed(seed, stage::SWEEP, vi as u64),
        );
        if let Some(k) = kappa {
            spec = spec.with_kappa(k);
        }
        let enc = FixedPointEncoding::twos_complement(c)?;
        match generate(&spec) {
            Ok(problems) => {
                tasks.extend(problems.into_iter().enumerate().map(|(i, p)| (vi, value, i, p, enc)));
            }
            Err(e) => failures.push(SweepFailure {
                value,
                index: None,
                message: e.to_string(),
            }),
        }
    }

    let outcomes: Vec<std::result::Result<ProblemRecord, SweepFailure>> = tasks
        .par_iter()
        .map(|(vi, value, i, p, enc)| {
            let flat = (*vi * config.per_value + *i) as u64;
            let eigen = EigenConfig {
                seed: derive_seed(seed, stage::EIGEN_START, flat),
                ..config.eigen
            };
            evaluate_problem(p, enc, config.scaled, config.record_unscaled, &schedule, &eigen)
                .map(|gaps| ProblemRecord {
                    value: *value,
                    index: *i,
                    gaps,
                })
                .map_err(|e| SweepFailure {
                    value: *value,
                    index: Some(*i),
                    message: e.to_string(),
                })
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    let mut rows = Vec::new();
    for &value in &config.values {
        let group: Vec<&ProblemRecord> = records.iter().filter(|r| r.value == value).collect();
        if !group.is_empty() {
            rows.push(aggregate(config.parameter, value, &group)?);
        }
    }
    Ok(SweepResult {
        parameter: config.parameter,
        rows,
        records,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_mad_examples() {
        assert_eq!(median_and_mad(&[1.0, 2.0, 3.0]).unwrap(), (2.0, 1.0));
        assert_eq!(median_and_mad(&[5.0]).unwrap(), (5.0, 0.0));
        assert_eq!(median_and_mad(&[1.0, 1.0, 9.0, 9.0]).unwrap(), (5.0, 4.0));
        assert!(median_and_mad(&[]).is_err());
    }

    #[test]
    fn presets_match_published_setups() {
        let p = SweepConfig::preset(SweepParameter::PrecisionC);
        assert_eq!(p.values, vec![2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!((p.m, p.n), (40, 2));
        let n = SweepConfig::preset(SweepParameter::VariablesN);
        assert_eq!((n.m, n.c), (40, 2));
        let r = SweepConfig::preset(SweepParameter::RowsM);
        assert_eq!(r.values.len(), 30);
        assert_eq!((r.values[0], r.values[29], r.n, r.c), (10.0, 300.0, 4, 2));
        let k = SweepConfig::preset(SweepParameter::ConditionKappa);
        assert_eq!(k.values.len(), 10 + 29);
        assert_eq!((k.m, k.n, k.c), (40, 4, 2));
        assert_eq!(k.per_value, 100);
        for p in SweepParameter::ALL {
            SweepConfig::preset(p).validate().unwrap();
        }
    }

    #[test]
    fn qubit_counts_per_value() {
        let p = SweepConfig::preset(SweepParameter::PrecisionC);
        let (_, n, c, _) = p.dims(2.0);
        assert_eq!(n * c, 4);
        let (_, n, c, _) = p.dims(6.0);
        assert_eq!(n * c, 12);
        let r = SweepConfig::preset(SweepParameter::RowsM);
        assert!(r.values.iter().all(|&v| {
            let (_, n, c, _) = r.dims(v);
            n * c == 8
        }));
    }

    #[test]
    fn identical_problems_have_zero_mad() {
        let spec = EnsembleSpec::lls(1, 40, 2, (-2, 1), 4);
        let p = generate(&spec).unwrap().remove(0);
        let enc = FixedPointEncoding::twos_complement(2).unwrap();
        let gaps = evaluate_problem(&p, &enc, true, false, &Schedule::default(), &EigenConfig::default()).unwrap();
        let rec = ProblemRecord {
            value: 2.0,
            index: 0,
            gaps,
        };
        let row = aggregate(SweepParameter::PrecisionC, 2.0, &[&rec, &rec, &rec]).unwrap();
        assert_eq!(row.mad_gmin, 0.0);
        assert_eq!(row.n_samples, 3);
        assert!(row.median_scale_factor.is_none());
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let mut cfg = SweepConfig::preset(SweepParameter::ConditionKappa).with_per_value(3);
        cfg.values = vec![1.0, 5.0];
        cfg.grid_points = 20;
        let a = run_sweep(&cfg, 11).unwrap();
        let b = run_sweep(&cfg, 11).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.rows.len(), 2);
        assert!(a.failures.is_empty());
        let header = a.to_csv().lines().next().unwrap().to_string();
        assert_eq!(
            header,
            "param,value,median_gmin,mad_gmin,n_samples,median_unscaled_gap,median_scale_factor,\
             median_gmin_unscaled,mad_gmin_unscaled"
        );
        for r in &a.records {
            let g = &r.gaps;
            let want = g.scale_factor * g.final_gap_unscaled;
            assert!((g.final_gap_scaled - want).abs() <= 1e-9 * want.abs().max(1e-300));
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = SweepConfig::preset(SweepParameter::PrecisionC);
        cfg.values = vec![9.0];
        assert!(cfg.validate().is_err());
        cfg.values = vec![2.5];
        assert!(cfg.validate().is_err());
        cfg.values.clear();
        assert!(cfg.validate().is_err());
        let cfg = SweepConfig::preset(SweepParameter::RowsM).with_per_value(0);
        assert!(cfg.validate().is_err());
    }
}
