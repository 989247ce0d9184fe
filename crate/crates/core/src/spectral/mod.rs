//! Matrix-free transverse-field annealing Hamiltonian and minimum-gap scans.
//!
//! `H(s) = −a(s)/2 · Σ_q σˣ_q + b(s)/2 · (Σ h_q σᶻ_q + Σ J_pq σᶻ_p σᶻ_q)`
//! acts on real state vectors of length `2^nq`. Basis index `z` encodes one
//! qubit per bit (qubit `q` is bit `q` of `z`); bit value 0 is the `σᶻ = +1`
//! eigenstate and bit value 1 is `σᶻ = −1`.

mod lanczos;
mod tridiagonal;

use std::sync::Arc;

use crate::encoding::IsingModel;
use crate::error::{Error, Result};
use crate::fmt::f17;
use crate::rng::{self, stage};

pub use lanczos::{LanczosConfig, SymmetricOperator};

/// Level splittings at or below this are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Up to this dimension a Lanczos run that exhausts its budget of `max(dim / 8, 16)`
/// matvecs falls back to a dense tridiagonal reduction, which is cheaper
/// once the Krylov basis approaches the full space.
pub const DENSE_FALLBACK_MAX_DIM: usize = 512;

fn fallback_budget(dim: usize) -> usize {
    (dim / 8).max(16)
}

/// Largest qubit count accepted by default.
pub const DEFAULT_MAX_QUBITS: usize = 16;

/// Annealing schedule: the coefficient functions and the grid of `s`
/// values at which the spectrum is evaluated.
#[derive(Debug, Clone)]
pub struct Schedule {
    a_of_s: fn(f64) -> f64,
    b_of_s: fn(f64) -> f64,
    grid: Vec<f64>,
}

fn default_a(s: f64) -> f64 {
    2.0 * (1.0 - s)
}

fn default_b(s: f64) -> f64 {
    2.0 * s
}

/// `n` equally spaced points covering `[0, 1]` (endpoints included).
pub fn linspace01(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| if k == n - 1 { 1.0 } else { k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

impl Default for Schedule {
    /// `A(s) = 2(1 − s)`, `B(s) = 2s` on 100 equally spaced points.
    fn default() -> Self {
        Self::linear(100)
    }
}

impl Schedule {
    pub fn linear(points: usize) -> Self {
        Self {
            a_of_s: default_a,
            b_of_s: default_b,
            grid: linspace01(points),
        }
    }

    pub fn custom(a_of_s: fn(f64) -> f64, b_of_s: fn(f64) -> f64, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::invalid("schedule grid is empty"));
        }
        if grid.iter().any(|s| !(0.0..=1.0).contains(s)) || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("schedule grid must be strictly increasing within [0, 1]"));
        }
        Ok(Self { a_of_s, b_of_s, grid })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn a(&self, s: f64) -> f64 {
        (self.a_of_s)(s)
    }

    pub fn b(&self, s: f64) -> f64 {
        (self.b_of_s)(s)
    }
}

/// Ising energies `E(z)` of every basis state (no offset).
pub fn diagonal_energies(ising: &IsingModel) -> Vec<f64> {
    let nq = ising.num_spins();
    let dim = 1usize << nq;
    let h = ising.h();
    let mut e = vec![0.0; dim];
    // Start from all spins up and add one flipped spin at a time.
    let mut all_up: f64 = h.iter().sum();
    for (_, _, j) in ising.couplers() {
        all_up += j;
    }
    e[0] = all_up;
    for z in 1..dim {
        let top = usize::BITS as usize - 1 - z.leading_zeros() as usize;
        let prev = z ^ (1 << top);
        // Flipping qubit `top` from +1 to −1 changes the energy by
        // −2 (h_top + Σ_b J_top,b σ_b).
        let mut field = h[top];
        for b in 0..nq {
            if b != top {
                let sb = if prev >> b & 1 == 0 { 1.0 } else { -1.0 };
                field += ising.coupling(top, b) * sb;
            }
        }
        e[z] = e[prev] - 2.0 * field;
    }
    e
}

/// `H(s)` at one schedule point, acting matrix-free.
#[derive(Debug, Clone)]
pub struct AnnealOperator {
    nq: usize,
    /// `a(s)/2`
    transverse: f64,
    /// `b(s)/2`
    longitudinal: f64,
    diagonal: Arc<Vec<f64>>,
    diag_max: f64,
}

impl AnnealOperator {
    pub fn new(ising: &IsingModel, a: f64, b: f64) -> Self {
        Self::with_diagonal(ising.num_spins(), Arc::new(diagonal_energies(ising)), a, b)
    }

    /// Reuse precomputed diagonal energies (shared across schedule points).
    pub fn with_diagonal(nq: usize, diagonal: Arc<Vec<f64>>, a: f64, b: f64) -> Self {
        assert_eq!(diagonal.len(), 1 << nq, "diagonal length must be 2^nq");
        let diag_max = diagonal.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Self {
            nq,
            transverse: a / 2.0,
            longitudinal: b / 2.0,
            diagonal,
            diag_max,
        }
    }

    pub fn at(ising: &IsingModel, schedule: &Schedule, s: f64) -> Self {
        Self::new(ising, schedule.a(s), schedule.b(s))
    }

    pub fn num_qubits(&self) -> usize {
        self.nq
    }

    pub fn dim(&self) -> usize {
        1 << self.nq
    }

    /// Row-major dense matrix of `H`.
    pub fn to_dense(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut h = vec![0.0; dim * dim];
        for z in 0..dim {
            h[z * dim + z] = self.longitudinal * self.diagonal[z];
            for q in 0..self.nq {
                h[z * dim + (z ^ (1 << q))] = -self.transverse;
            }
        }
        h
    }

    /// `H · v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }
}

impl SymmetricOperator for AnnealOperator {
    fn dim(&self) -> usize {
        1 << self.nq
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let bz = self.longitudinal;
        for ((o, &x), &d) in out.iter_mut().zip(v).zip(self.diagonal.iter()) {
            *o = bz * d * x;
        }
        let ax = self.transverse;
        if ax == 0.0 {
            return;
        }
        // σˣ on qubit q pairs index z with z ^ (1 << q); walk each pair once.
        for q in 0..self.nq {
            let stride = 1usize << q;
            for block in (0..v.len()).step_by(2 * stride) {
                for z in block..block + stride {
                    let w = z + stride;
                    out[z] -= ax * v[w];
                    out[w] -= ax * v[z];
                }
            }
        }
    }

    fn norm_bound(&self) -> f64 {
        self.transverse.abs() * self.nq as f64 + self.longitudinal.abs() * self.diag_max
    }
}

/// Eigensolver settings shared by [`lowest_two`] and [`scan_gap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenConfig {
    pub max_qubits: usize,
    /// Residual tolerance for each Ritz pair; bounds the eigenvalue error.
    pub residual_tol: f64,
    /// Matvec budget per eigenvalue; `None` means `10 · 2^nq`, or `2^nq / 2`
    /// when the dense fallback applies.
    pub max_matvecs: Option<usize>,
    pub max_basis: usize,
    pub seed: u64,
    /// Switch to a dense solve when Lanczos runs out of budget and
    /// `2^nq ≤ DENSE_FALLBACK_MAX_DIM`.
    pub dense_fallback: bool,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            max_qubits: DEFAULT_MAX_QUBITS,
            residual_tol: 1e-10,
            max_matvecs: None,
            max_basis: 300,
            seed: 0,
            dense_fallback: true,
        }
    }
}

/// Two lowest eigenvalues with `e1 ≥ e0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowestTwo {
    pub e0: f64,
    pub e1: f64,
    pub matvecs: usize,
}

impl LowestTwo {
    pub fn gap(&self) -> f64 {
        self.e1 - self.e0
    }
}

/// Ground energy by Lanczos, then the first excited energy by a second
/// Lanczos run deflated against the converged ground vector. `index`
/// selects the start-vector stream.
pub fn lowest_two(op: &AnnealOperator, cfg: &EigenConfig, index: u64) -> Result<LowestTwo> {
    if op.num_qubits() > cfg.max_qubits {
        return Err(Error::invalid(format!(
            "{} qubits exceeds the configured limit of {}",
            op.num_qubits(),
            cfg.max_qubits
        )));
    }
    let dim = op.dim();
    if dim == 1 {
        return Err(Error::invalid("need at least one qubit"));
    }
    let fallback = cfg.dense_fallback && dim <= DENSE_FALLBACK_MAX_DIM;
    let budget = match (cfg.max_matvecs, fallback) {
        (Some(m), true) => m.min(fallback_budget(dim)),
        (Some(m), false) => m,
        (None, true) => fallback_budget(dim),
        (None, false) => 10 * dim,
    };
    let lcfg = LanczosConfig {
        residual_tol: cfg.residual_tol,
        max_matvecs: budget,
        max_basis: cfg.max_basis,
    };
    let mut rng = rng::stream(cfg.seed, stage::EIGEN_START, index);
    let start = lanczos::random_unit(dim, &mut rng);
    let krylov = lanczos::lowest(op, &[], start, &lcfg, &mut rng).and_then(|ground| {
        let start = lanczos::random_unit(dim, &mut rng);
        let locked = vec![ground.vector];
        let excited = lanczos::lowest(op, &locked, start, &lcfg, &mut rng)?;
        Ok(LowestTwo {
            e0: ground.value,
            e1: excited.value.max(ground.value),
            matvecs: ground.matvecs + excited.matvecs,
        })
    });
    match krylov {
        Err(Error::NoConvergence { matvecs, .. }) if fallback => Ok(dense_lowest_two(op, matvecs)),
        other => other,
    }
}

/// Two lowest eigenvalues from a dense tridiagonal reduction.
fn dense_lowest_two(op: &AnnealOperator, matvecs: usize) -> LowestTwo {
    let dim = op.dim();
    let mut h = op.to_dense();
    let (alpha, beta) = tridiagonal::householder_tridiagonalize(&mut h, dim);
    let e0 = tridiagonal::kth_smallest(&alpha, &beta, 0);
    let e1 = tridiagonal::kth_smallest(&alpha, &beta, 1).max(e0);
    LowestTwo { e0, e1, matvecs }
}

/// Exact gap of the diagonal (problem) Hamiltonian: difference between the
/// two smallest diagonal energies, counting repeats.
pub fn problem_gap(ising: &IsingModel) -> f64 {
    two_smallest(&diagonal_energies(ising)).map_or(0.0, |(a, b)| b - a)
}

fn two_smallest(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let (mut lo, mut next) = (f64::INFINITY, f64::INFINITY);
    for &x in xs {
        if x < lo {
            next = lo;
            lo = x;
        } else if x < next {
            next = x;
        }
    }
    Some((lo, next))
}

/// Lowest two levels of `H(s)` across a schedule grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GapScan {
    pub s: Vec<f64>,
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
    pub g_min: f64,
    pub s_at_min: f64,
    /// Grid points where `e1 − e0 ≤ DEGENERACY_TOL`.
    pub degenerate_points: Vec<usize>,
}

impl GapScan {
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.e0.iter().zip(&self.e1).map(|(a, b)| b - a)
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_points.is_empty()
    }

    /// CSV with header `s,e0,e1,gap` and a `# g_min=… at s=…` trailer.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,e0,e1,gap\n");
        for (i, g) in self.gaps().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                f17(self.s[i]),
                f17(self.e0[i]),
                f17(self.e1[i]),
                f17(g)
            ));
        }
        out.push_str(&format!("# g_min={} at s={}\n", f17(self.g_min), f17(self.s_at_min)));
        out
    }
}

/// Evaluate the two lowest levels at every grid point and take the grid
/// minimum of the gap (no interpolation).
pub fn scan_gap(ising: &IsingModel, schedule: &Schedule, cfg: &EigenConfig) -> Result<GapScan> {
    let nq = ising.num_spins();
    if nq > cfg.max_qubits {
        return Err(Error::invalid(format!(
            "{nq} qubits exceeds the configured limit of {}",
            cfg.max_qubits
        )));
    }
    let diag = Arc::new(diagonal_energies(ising));
    let grid = schedule.grid();
    let mut e0 = Vec::with_capacity(grid.len());
    let mut e1 = Vec::with_capacity(grid.len());
    for (k, &s) in grid.iter().enumerate() {
        let op = AnnealOperator::with_diagonal(nq, Arc::clone(&diag), schedule.a(s), schedule.b(s));
        let pair = lowest_two(&op, cfg, k as u64).map_err(|e| Error::ScanPoint {
            s,
            source: Box::new(e),
        })?;
        e0.push(pair.e0);
        e1.push(pair.e1);
    }
    let mut g_min = f64::INFINITY;
    let mut s_at_min = f64::NAN;
    let mut degenerate_points = Vec::new();
    for (k, (&lo, &hi)) in e0.iter().zip(&e1).enumerate() {
        let g = hi - lo;
        if g < g_min {
            g_min = g;
            s_at_min = grid[k];
        }
        if g <= DEGENERACY_TOL {
            degenerate_points.push(k);
        }
    }
    Ok(GapScan {
        s: grid.to_vec(),
        e0,
        e1,
        g_min,
        s_at_min,
        degenerate_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::IsingModel;

    fn single(h: f64) -> IsingModel {
        IsingModel::new(vec![h], &[], 0.0).unwrap()
    }

    #[test]
    fn default_schedule() {
        let s = Schedule::default();
        assert_eq!(s.grid().len(), 100);
        assert_eq!(s.grid()[0], 0.0);
        assert_eq!(s.grid()[99], 1.0);
        assert_eq!(s.a(0.25), 1.5);
        assert_eq!(s.b(0.25), 0.5);
    }

    #[test]
    fn transverse_field_only_at_s0() {
        let op = AnnealOperator::new(&single(1.0), 2.0, 0.0);
        assert_eq!(op.apply(&[1.0, 0.0]).unwrap(), vec![0.0, -1.0]);
    }

    #[test]
    fn problem_only_at_s1() {
        let op = AnnealOperator::new(&single(1.0), 0.0, 2.0);
        assert_eq!(op.apply(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(op.apply(&[0.0, 1.0]).unwrap(), vec![0.0, -1.0]);
    }

    #[test]
    fn apply_rejects_wrong_length() {
        let op = AnnealOperator::new(&single(1.0), 1.0, 1.0);
        assert!(matches!(op.apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn diagonal_matches_direct_energy() {
        let m = IsingModel::new(
            vec![0.3, -1.2, 0.7],
            &[(0, 1, 0.5), (1, 2, -0.25), (0, 2, 0.125)],
            0.0,
        )
        .unwrap();
        let d = diagonal_energies(&m);
        for (z, &e) in d.iter().enumerate() {
            let spins: Vec<bool> = (0..3).map(|q| z >> q & 1 == 0).collect();
            assert!((e - m.energy(&spins)).abs() < 1e-14);
        }
    }

    #[test]
    fn single_qubit_midpoint_closed_form() {
        let op = AnnealOperator::new(&single(1.0), 1.0, 1.0);
        let pair = lowest_two(&op, &EigenConfig::default(), 0).unwrap();
        let r = 0.5f64.sqrt();
        assert!((pair.e0 + r).abs() < 1e-12);
        assert!((pair.e1 - r).abs() < 1e-12);
        assert!((pair.gap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_qubit_scan_minimum_at_half() {
        let grid = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let sched = Schedule::custom(default_a, default_b, grid).unwrap();
        let scan = scan_gap(&single(1.0), &sched, &EigenConfig::default()).unwrap();
        assert!((scan.g_min - 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(scan.s_at_min, 0.5);
        assert!(!scan.is_degenerate());
    }

    #[test]
    fn zero_model_gap_is_transverse_field() {
        let m = IsingModel::new(vec![0.0; 3], &[], 0.0).unwrap();
        let sched = Schedule::linear(11);
        let scan = scan_gap(&m, &sched, &EigenConfig::default()).unwrap();
        for (g, s) in scan.gaps().zip(&scan.s) {
            assert!((g - 2.0 * (1.0 - s)).abs() < 1e-9, "s={s} gap={g}");
        }
        // At s = 1 the zero model is fully degenerate.
        assert!(scan.g_min.abs() < 1e-9);
        assert_eq!(scan.s_at_min, 1.0);
        assert!(scan.degenerate_points.contains(&10));
    }

    #[test]
    fn s1_gap_is_diagonal_gap() {
        let m = IsingModel::new(
            vec![0.4, -0.1, 0.9, -0.6],
            &[(0, 1, 0.3), (2, 3, -0.8), (1, 3, 0.2)],
            0.0,
        )
        .unwrap();
        let op = AnnealOperator::new(&m, 0.0, 2.0);
        let pair = lowest_two(&op, &EigenConfig::default(), 3).unwrap();
        let mut d = diagonal_energies(&m);
        d.sort_by(f64::total_cmp);
        assert!((pair.e0 - d[0]).abs() < 1e-10);
        assert!((pair.e1 - d[1]).abs() < 1e-10);
        assert!((problem_gap(&m) - (d[1] - d[0])).abs() < 1e-14);
    }

    #[test]
    fn qubit_limit_enforced() {
        let m = IsingModel::new(vec![0.1; 5], &[], 0.0).unwrap();
        let cfg = EigenConfig {
            max_qubits: 4,
            ..EigenConfig::default()
        };
        assert!(scan_gap(&m, &Schedule::linear(3), &cfg).is_err());
    }

    #[test]
    fn starved_budget_is_an_error_not_a_value() {
        let m = IsingModel::new(
            vec![0.4, -0.1, 0.9, -0.6, 0.2, 0.3],
            &[(0, 1, 0.3), (2, 3, -0.8), (1, 3, 0.2), (4, 5, 0.6)],
            0.0,
        )
        .unwrap();
        let op = AnnealOperator::new(&m, 1.0, 1.0);
        let cfg = EigenConfig {
            max_matvecs: Some(3),
            dense_fallback: false,
            ..EigenConfig::default()
        };
        assert!(matches!(lowest_two(&op, &cfg, 0), Err(Error::NoConvergence { .. })));
        let rescued = lowest_two(&op, &EigenConfig { dense_fallback: true, ..cfg }, 0).unwrap();
        let exact = lowest_two(&op, &EigenConfig::default(), 0).unwrap();
        assert!((rescued.e0 - exact.e0).abs() < 1e-9 && (rescued.e1 - exact.e1).abs() < 1e-9);
        let scan = scan_gap(&m, &Schedule::linear(3), &cfg);
        assert!(matches!(scan, Err(Error::ScanPoint { .. })));
    }

    #[test]
    fn dense_fallback_matches_lanczos() {
        let m = IsingModel::new(
            vec![40.0, -13.0, 7.5, -22.0, 3.0, 18.0, -9.0],
            &[(0, 1, 30.0), (2, 3, -8.0), (1, 3, 12.0), (4, 5, 25.0), (0, 6, -17.0), (5, 6, 4.0)],
            0.0,
        )
        .unwrap();
        let lanczos_only = EigenConfig {
            dense_fallback: false,
            ..EigenConfig::default()
        };
        let starved = EigenConfig {
            max_matvecs: Some(1),
            ..EigenConfig::default()
        };
        for (k, s) in [0.0, 0.1, 0.4, 0.7, 1.0].into_iter().enumerate() {
            let op = AnnealOperator::new(&m, 2.0 * (1.0 - s), 2.0 * s);
            let a = lowest_two(&op, &lanczos_only, k as u64).unwrap();
            let b = lowest_two(&op, &starved, k as u64).unwrap();
            let scale = 1e-11 * op.norm_bound().max(1.0);
            assert!((a.e0 - b.e0).abs() < scale, "s={s}: {} vs {}", a.e0, b.e0);
            assert!((a.e1 - b.e1).abs() < scale, "s={s}: {} vs {}", a.e1, b.e1);
        }
    }

    #[test]
    fn csv_layout() {
        let scan = scan_gap(&single(1.0), &Schedule::linear(3), &EigenConfig::default()).unwrap();
        let csv = scan.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "s,e0,e1,gap");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("# g_min="));
        assert!(lines[4].contains(" at s="));
    }
}
