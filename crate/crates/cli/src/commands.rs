//! Subcommand implementations. Each command writes its outputs below the
//! output directory and registers them with the manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use groundgap::encoding::{build_qubo, qubo_to_ising, scale_ising, range_scale_factor, FixedPointEncoding};
use groundgap::fmt::f17;
use groundgap::hybrid::{run_benchmark, HybridConfig, SamplerChoice};
use groundgap::problems::{generate as generate_ensemble, load_ensemble, save_ensemble, EnsembleSpec, Problem};
use groundgap::rng::{derive_seed, stage};
use groundgap::spectral::{problem_gap, scan_gap, EigenConfig, Schedule};
use groundgap::sweeps::{fit_curve, median_and_mad, run_sweep, CurveFamily, CurveFit, SweepConfig, SweepParameter};

use crate::manifest::{Manifest, Skipped};
use crate::{CliError, FitArgs, GapscanArgs, GenerateArgs, HybridArgs, KindArg, SamplerArg, SweepArgs};

pub struct Context {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Context {
    fn write(&self, manifest: &mut Manifest, relative: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        manifest.output(relative);
        Ok(())
    }
}

fn usage(e: groundgap::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn load(path: &Path) -> Result<Vec<Problem>, CliError> {
    if !path.exists() {
        return Err(CliError::Runtime(format!("input {} does not exist", path.display())));
    }
    let (_, problems) = load_ensemble(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    if problems.is_empty() {
        return Err(CliError::Runtime(format!("{} holds no problems", path.display())));
    }
    Ok(problems)
}

/// Parse `lo:hi` into a half-open integer range.
pub fn parse_range(s: &str) -> Result<(i64, i64), CliError> {
    let bad = || CliError::Usage(format!("--range expects lo:hi with integers lo < hi, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
    if lo >= hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

pub fn generate(ctx: &Context, args: &GenerateArgs, manifest: &mut Manifest) -> Result<(), CliError> {
    let range = parse_range(&args.range)?;
    let mut spec = match args.kind {
        KindArg::Lls => {
            let m = args
                .m
                .ok_or_else(|| CliError::Usage("--m is required for --kind lls".into()))?;
            EnsembleSpec::lls(args.count, m, args.n, range, ctx.seed)
        }
        KindArg::Lse => {
            if args.m.is_some_and(|m| m != args.n) {
                return Err(CliError::Usage("--kind lse is square; --m must equal --n".into()));
            }
            EnsembleSpec::lse(args.count, args.n, range, ctx.seed)
        }
    };
    if let Some(k) = args.kappa {
        spec = spec.with_kappa(k);
    }
    spec.validate().map_err(usage)?;
    manifest.set_config(&spec);
    let problems = generate_ensemble(&spec)?;
    let path = ctx.out_dir.join(&args.output);
    save_ensemble(&path, Some(&spec), &problems)?;
    manifest.output(&args.output);
    if spec.conditioning_is_degenerate() {
        log::warn!("a single column cannot reach condition number {}; matrices have κ = 1", spec.kappa_target.unwrap_or(1.0));
    }
    Ok(())
}

struct GapRow {
    id: usize,
    num_qubits: usize,
    g_min: f64,
    s_at_min: f64,
    final_gap_unscaled: f64,
    final_gap_scaled: f64,
    scale_factor: f64,
}

pub fn gapscan(ctx: &Context, args: &GapscanArgs, manifest: &mut Manifest) -> Result<(), CliError> {
    let enc = FixedPointEncoding::twos_complement(args.bits).map_err(usage)?;
    if args.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    manifest.set_config(&json!({
        "input": args.input.display().to_string(),
        "bits": args.bits,
        "grid": args.grid,
        "scaled": !args.unscaled,
        "max_qubits": args.max_qubits,
    }));
    let problems = load(&args.input)?;
    let schedule = Schedule::linear(args.grid);
    let outcomes: Vec<Result<(GapRow, String), String>> = problems
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let nq = p.n() * enc.bits_per_var();
            if nq > args.max_qubits {
                return Err(format!("needs {nq} qubits, limit is {}", args.max_qubits));
            }
            let raw = qubo_to_ising(&build_qubo(p, &enc));
            let fitted = scale_ising(&raw);
            let target = if args.unscaled { &raw } else { &fitted };
            let eigen = EigenConfig {
                max_qubits: args.max_qubits,
                seed: derive_seed(ctx.seed, stage::EIGEN_START, i as u64),
                ..EigenConfig::default()
            };
            let scan = scan_gap(target, &schedule, &eigen).map_err(|e| e.to_string())?;
            let row = GapRow {
                id: i,
                num_qubits: nq,
                g_min: scan.g_min,
                s_at_min: scan.s_at_min,
                final_gap_unscaled: problem_gap(&raw),
                final_gap_scaled: problem_gap(&fitted),
                scale_factor: range_scale_factor(&raw).unwrap_or(1.0),
            };
            Ok((row, scan.to_csv()))
        })
        .collect();

    let mut rows = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((row, csv)) => {
                ctx.write(manifest, &format!("gapscan/problem_{i:04}.csv"), &csv)?;
                rows.push(row);
            }
            Err(reason) => {
                log::warn!("problem {i} skipped: {reason}");
                manifest.skipped.push(Skipped { problem_id: Some(i), reason });
            }
        }
    }
    let mut out = String::from("problem_id,num_qubits,g_min,s_at_min,final_gap_unscaled,final_gap_scaled,scale_factor\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.id,
            r.num_qubits,
            f17(r.g_min),
            f17(r.s_at_min),
            f17(r.final_gap_unscaled),
            f17(r.final_gap_scaled),
            f17(r.scale_factor)
        ));
    }
    let gmins: Vec<f64> = rows.iter().map(|r| r.g_min).collect();
    if let Ok((med, mad)) = median_and_mad(&gmins) {
        out.push_str(&format!("# median_gmin={},mad_gmin={},n_samples={}\n", f17(med), f17(mad), rows.len()));
    }
    ctx.write(manifest, "gapscan_summary.csv", &out)?;
    if rows.is_empty() {
        return Err(CliError::Runtime("every problem was skipped".into()));
    }
    Ok(())
}

fn parse_families(names: Option<&[String]>, default: &[CurveFamily]) -> Result<Vec<CurveFamily>, CliError> {
    match names {
        None => Ok(default.to_vec()),
        Some(list) if list.iter().any(|s| s == "all") => Ok(CurveFamily::ALL.to_vec()),
        Some(list) => list
            .iter()
            .map(|s| s.parse::<CurveFamily>().map_err(usage))
            .collect(),
    }
}

/// One entry of a fits JSON array.
#[derive(Serialize)]
#[serde(untagged)]
enum FitEntry {
    Fitted(CurveFit),
    Failed { family: CurveFamily, error: String },
}

fn fit_all(families: &[CurveFamily], xs: &[f64], ys: &[f64]) -> Vec<FitEntry> {
    families
        .iter()
        .map(|&family| match fit_curve(family, xs, ys) {
            Ok(f) => FitEntry::Fitted(f),
            Err(e) => FitEntry::Failed {
                family,
                error: e.to_string(),
            },
        })
        .collect()
}

fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn sweep(ctx: &Context, args: &SweepArgs, manifest: &mut Manifest) -> Result<(), CliError> {
    let parameter: SweepParameter = args.name.parse().map_err(usage)?;
    let mut config = SweepConfig::preset(parameter);
    if let Some(k) = args.per_value {
        config.per_value = k;
    }
    if let Some(v) = &args.values {
        config.values = v.clone();
    }
    if let Some(g) = args.grid {
        config.grid_points = g;
    }
    if let Some(m) = args.m {
        config.m = m;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(c) = args.c {
        config.c = c;
    }
    if args.unscaled {
        config.scaled = false;
    }
    config.validate().map_err(usage)?;
    let families = parse_families(args.families.as_deref(), parameter.default_families())?;
    manifest.set_config(&json!({
        "sweep": &config,
        "families": families.iter().map(|f| f.as_str()).collect::<Vec<_>>(),
    }));

    let result = run_sweep(&config, ctx.seed)?;
    for f in &result.failures {
        log::warn!("value {} problem {:?} failed: {}", f.value, f.index, f.message);
        manifest.skipped.push(Skipped {
            problem_id: f.index,
            reason: format!("value {}: {}", f17(f.value), f.message),
        });
    }
    let name = parameter.preset_name();
    ctx.write(manifest, &format!("sweep_{name}.csv"), &result.to_csv())?;
    ctx.write(manifest, &format!("sweep_{name}_problems.csv"), &result.records_csv())?;
    let fits = fit_all(&families, &result.xs(), &result.medians());
    ctx.write(manifest, &format!("sweep_{name}_fits.json"), &pretty(&fits)?)?;
    if result.rows.is_empty() {
        return Err(CliError::Runtime("no sweep value produced any result".into()));
    }
    Ok(())
}

pub fn hybrid(ctx: &Context, args: &HybridArgs, manifest: &mut Manifest) -> Result<(), CliError> {
    let enc = FixedPointEncoding::twos_complement(args.bits).map_err(usage)?;
    let sampler = match args.sampler {
        SamplerArg::Exhaustive => SamplerChoice::Exhaustive,
        SamplerArg::Sa => SamplerChoice::Sa {
            reads: args.reads,
            sweeps: args.sweeps,
        },
    };
    let mut config = HybridConfig::new(enc, sampler);
    config.post_process = args.post_process;
    config.seed = ctx.seed;
    config.validate().map_err(usage)?;
    let tag = match (args.sampler, args.post_process) {
        (SamplerArg::Exhaustive, false) => "exhaustive",
        (SamplerArg::Exhaustive, true) => "exhaustive+PP",
        (SamplerArg::Sa, false) => "sa",
        (SamplerArg::Sa, true) => "sa+PP",
    };
    manifest.set_config(&json!({
        "input": args.input.display().to_string(),
        "hybrid": &config,
        "tag": tag,
    }));
    let problems = load(&args.input)?;
    let bench = run_benchmark(&problems, &config)?;
    for f in &bench.failures {
        log::warn!("problem {} failed: {}", f.problem_id, f.message);
        manifest.skipped.push(Skipped {
            problem_id: Some(f.problem_id),
            reason: f.message.clone(),
        });
    }
    ctx.write(manifest, "hybrid.csv", &bench.to_csv())?;
    ctx.write(manifest, "hybrid_summary.json", &bench.summary.to_json()?)?;
    if !bench.summary.valid {
        return Err(CliError::Runtime("no problem completed; summary is not valid".into()));
    }
    Ok(())
}

/// Pull two named numeric columns from a CSV, skipping `#` comment lines.
pub fn read_columns(text: &str, x: &str, y: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| CliError::Runtime("input has no header".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::Usage(format!("column {name:?} not in header {header:?}")))
    };
    let (xi, yi) = (find(x)?, find(y)?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let cell = |i: usize| -> Result<f64, CliError> {
            cells
                .get(i)
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| CliError::Runtime(format!("line {}: column {} is not a number", lineno + 1, i + 1)))
        };
        xs.push(cell(xi)?);
        ys.push(cell(yi)?);
    }
    Ok((xs, ys))
}

pub fn fit(ctx: &Context, args: &FitArgs, manifest: &mut Manifest) -> Result<(), CliError> {
    let families = if args.family == "all" {
        CurveFamily::ALL.to_vec()
    } else {
        vec![args.family.parse::<CurveFamily>().map_err(usage)?]
    };
    manifest.set_config(&json!({
        "input": args.input.display().to_string(),
        "family": args.family,
        "x": args.x,
        "y": args.y,
    }));
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", args.input.display())))?;
    let (xs, ys) = read_columns(&text, &args.x, &args.y)?;
    if args.family == "all" {
        let fits = fit_all(&families, &xs, &ys);
        ctx.write(manifest, "fits.json", &pretty(&fits)?)?;
    } else {
        let f = fit_curve(families[0], &xs, &ys)?;
        ctx.write(manifest, &format!("fit_{}.json", families[0].as_str()), &f.to_json()?)?;
    }
    Ok(())
}
