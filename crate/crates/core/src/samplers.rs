//! Classical samplers for QUBO models: exhaustive enumeration, simulated
//! annealing and greedy steepest descent.
//!
//! All energies are offset-exclusive (`F′(q)`). Sample sets are ordered by
//! energy, ties broken by the bit vector in lexicographic order
//! (`false < true`, first bit most significant).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;

use crate::encoding::QuboModel;
use crate::error::{Error, Result};
use crate::fmt::f17;
use crate::rng::{self, stage};

/// Largest model [`solve_exhaustive`] accepts.
pub const MAX_EXHAUSTIVE_BITS: usize = 24;

pub const DEFAULT_TOP_K: usize = 16;

/// Initial inverse temperature of the annealing ramp.
pub const BETA_COLD_START: f64 = 0.1;

/// `β_hot · max|ΔE|` at the end of the ramp, so the worst uphill move is
/// accepted with probability about `e^(−10)`.
pub const FINAL_BARRIER: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerTag {
    Exhaustive,
    SimulatedAnnealing,
}

impl SamplerTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerTag::Exhaustive => "exhaustive",
            SamplerTag::SimulatedAnnealing => "sa",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub bits: Vec<bool>,
    pub energy: f64,
}

/// Samples sorted ascending by `(energy, bits)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    samples: Vec<Sample>,
    reads: usize,
    sampler: SamplerTag,
}

fn order(a: &Sample, b: &Sample) -> Ordering {
    a.energy.total_cmp(&b.energy).then_with(|| a.bits.cmp(&b.bits))
}

impl SampleSet {
    /// Sorts `samples` into canonical order.
    pub fn new(mut samples: Vec<Sample>, reads: usize, sampler: SamplerTag) -> Self {
        samples.sort_by(order);
        Self {
            samples,
            reads,
            sampler,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn best(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of reads (annealing) or assignments evaluated (exhaustive).
    pub fn reads(&self) -> usize {
        self.reads
    }

    pub fn sampler(&self) -> SamplerTag {
        self.sampler
    }

    /// Largest difference between a stored energy and a fresh evaluation.
    pub fn max_energy_error(&self, q: &QuboModel) -> f64 {
        self.samples
            .iter()
            .map(|s| (q.energy(&s.bits) - s.energy).abs())
            .fold(0.0, f64::max)
    }

    /// CSV `rank,energy,bits`, rank starting at 1, bits as a 0/1 string.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,energy,bits\n");
        for (i, s) in self.samples.iter().enumerate() {
            let bits: String = s.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
            out.push_str(&format!("{},{},{}\n", i + 1, f17(s.energy), bits));
        }
        out
    }
}

/// Per-bit local fields `v_a + Σ_b w_ab q_b`; flipping bit `a` changes the
/// energy by `±field[a]`.
fn local_fields(q: &QuboModel, bits: &[bool]) -> Vec<f64> {
    let n = q.num_bits();
    let lin = q.linear();
    (0..n)
        .map(|a| {
            let mut f = lin[a];
            for (b, &on) in bits.iter().enumerate() {
                if on && b != a {
                    f += q.coupling(a, b);
                }
            }
            f
        })
        .collect()
}

fn flip(q: &QuboModel, bits: &mut [bool], fields: &mut [f64], a: usize) {
    bits[a] = !bits[a];
    let sign = if bits[a] { 1.0 } else { -1.0 };
    for (b, f) in fields.iter_mut().enumerate() {
        if b != a {
            *f += sign * q.coupling(a, b);
        }
    }
}

#[derive(PartialEq)]
struct Candidate {
    energy: f64,
    index: u64,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.energy
            .total_cmp(&other.energy)
            .then_with(|| self.index.cmp(&other.index))
    }
}

/// [`solve_exhaustive_top`] with the default `top_k`.
pub fn solve_exhaustive(q: &QuboModel) -> Result<SampleSet> {
    solve_exhaustive_top(q, DEFAULT_TOP_K)
}

/// Enumerate all `2^num_bits` assignments in Gray-code order and keep the
/// `top_k` lowest. Kept energies are re-evaluated from scratch.
pub fn solve_exhaustive_top(q: &QuboModel, top_k: usize) -> Result<SampleSet> {
    let nb = q.num_bits();
    if nb > MAX_EXHAUSTIVE_BITS {
        return Err(Error::invalid(format!(
            "exhaustive search limited to {MAX_EXHAUSTIVE_BITS} bits, model has {nb}"
        )));
    }
    if top_k == 0 {
        return Err(Error::invalid("top_k must be positive"));
    }
    let total = 1u64 << nb;
    let mut bits = vec![false; nb];
    let mut fields = local_fields(q, &bits);
    let mut energy = 0.0;
    let mut heap = BinaryHeap::with_capacity(top_k + 1);
    let mut index = 0u64;
    // Slack so that accumulated rounding cannot evict a true top-k state.
    let keep = top_k.saturating_mul(2).max(top_k + 4);
    for step in 0..total {
        if step > 0 {
            let pos = step.trailing_zeros() as usize;
            let a = nb - 1 - pos;
            energy += if bits[a] { -fields[a] } else { fields[a] };
            flip(q, &mut bits, &mut fields, a);
            index ^= 1 << pos;
        }
        let cand = Candidate { energy, index };
        if heap.len() < keep {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
    }
    let samples = heap
        .into_iter()
        .map(|c| {
            let bits = crate::encoding::bits_from_index(c.index, nb);
            let energy = q.energy(&bits);
            Sample { bits, energy }
        })
        .collect();
    let mut set = SampleSet::new(samples, total as usize, SamplerTag::Exhaustive);
    set.samples.truncate(top_k);
    Ok(set)
}

/// Upper bound on `|ΔE|` for any single flip from any state.
pub fn max_flip_delta(q: &QuboModel) -> f64 {
    let n = q.num_bits();
    let lin = q.linear();
    (0..n)
        .map(|a| {
            let (mut pos, mut neg) = (lin[a].max(0.0), lin[a].min(0.0));
            for b in 0..n {
                let w = q.coupling(a, b);
                if w > 0.0 {
                    pos += w;
                } else {
                    neg += w;
                }
            }
            pos.max(-neg)
        })
        .fold(0.0, f64::max)
}

/// Inverse temperatures for each sweep: geometric from
/// [`BETA_COLD_START`] to `FINAL_BARRIER / max|ΔE|`. If the end point is
/// below the start, the ramp starts there instead.
pub fn beta_schedule(q: &QuboModel, sweeps: usize) -> Vec<f64> {
    let dmax = max_flip_delta(q);
    let hot = if dmax > 0.0 {
        FINAL_BARRIER / dmax
    } else {
        BETA_COLD_START
    };
    let start = BETA_COLD_START.min(hot);
    if sweeps == 1 {
        return vec![hot];
    }
    let ratio = (hot / start).ln() / (sweeps - 1) as f64;
    (0..sweeps)
        .map(|k| {
            if k == sweeps - 1 {
                hot
            } else {
                start * (ratio * k as f64).exp()
            }
        })
        .collect()
}

fn anneal_once(q: &QuboModel, betas: &[f64], seed: u64, read: usize) -> Sample {
    let nb = q.num_bits();
    let mut rng = rng::stream(seed, stage::ANNEAL, read as u64);
    let mut bits: Vec<bool> = (0..nb).map(|_| rng.random_bool(0.5)).collect();
    let mut fields = local_fields(q, &bits);
    for &beta in betas {
        for a in 0..nb {
            let delta = if bits[a] { -fields[a] } else { fields[a] };
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                flip(q, &mut bits, &mut fields, a);
            }
        }
    }
    let energy = q.energy(&bits);
    Sample { bits, energy }
}

/// Independent single-flip Metropolis restarts, one per read, each on its
/// own derived stream. Returns the final state of every read.
pub fn sample_sa(q: &QuboModel, reads: usize, sweeps: usize, seed: u64) -> Result<SampleSet> {
    if reads == 0 {
        return Err(Error::invalid("reads must be at least 1"));
    }
    if sweeps == 0 {
        return Err(Error::invalid("sweeps must be at least 1"));
    }
    let betas = beta_schedule(q, sweeps);
    let samples: Vec<Sample> = (0..reads)
        .into_par_iter()
        .map(|r| anneal_once(q, &betas, seed, r))
        .collect();
    Ok(SampleSet::new(samples, reads, SamplerTag::SimulatedAnnealing))
}

/// Steepest single-flip descent; ties go to the lowest bit index. Stops at
/// the first state no single flip improves.
pub fn greedy_descent(q: &QuboModel, bits: &[bool]) -> Result<Vec<bool>> {
    if bits.len() != q.num_bits() {
        return Err(Error::DimensionMismatch {
            context: "greedy descent bit vector",
            expected: q.num_bits(),
            got: bits.len(),
        });
    }
    let mut bits = bits.to_vec();
    loop {
        let fields = local_fields(q, &bits);
        let mut best: Option<(usize, f64)> = None;
        for (a, &f) in fields.iter().enumerate() {
            let delta = if bits[a] { -f } else { f };
            if delta < 0.0 && best.is_none_or(|(_, d)| delta < d) {
                best = Some((a, delta));
            }
        }
        match best {
            Some((a, _)) => bits[a] = !bits[a],
            None => return Ok(bits),
        }
    }
}
