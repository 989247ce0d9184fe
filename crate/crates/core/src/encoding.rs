//! Fixed-point QUBO compilation, QUBO → Ising conversion, hardware-range
//! scaling and bitstring decoding.
//!
//! Each real variable `x_j` is represented by `c` bits as
//! `x_j = −2^(p+1)·q_sign + Σ_{θ=o..p} 2^θ·q_θ`. Bits are ordered
//! variable-major; within a variable the sign bit comes first, followed by
//! the exponents in descending order.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problems::Problem;

/// Contiguous exponent range `[lo, hi]` plus an optional two's-complement
/// sign bit of weight `−2^(hi+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct FixedPointEncoding {
    lo: i32,
    hi: i32,
    has_sign: bool,
}

impl FixedPointEncoding {
    pub fn new(lo: i32, hi: i32, has_sign: bool) -> Result<Self> {
        if lo > hi {
            return Err(Error::invalid(format!("empty exponent range [{lo}, {hi}]")));
        }
        if hi >= 52 || lo <= -1022 {
            return Err(Error::invalid(format!("exponent range [{lo}, {hi}] out of bounds")));
        }
        Ok(Self { lo, hi, has_sign })
    }

    /// Build from an explicit exponent set, which must be a contiguous run of
    /// integers (in any order).
    pub fn from_exponents(theta: &[i32], has_sign: bool) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::invalid(if has_sign {
                "a sign bit needs at least one exponent to define its weight"
            } else {
                "encoding has no exponents and no sign bit"
            }));
        }
        let mut t = theta.to_vec();
        t.sort_unstable();
        t.dedup();
        if t.len() != theta.len() || t.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::invalid(format!("exponent set {theta:?} is not a contiguous range")));
        }
        Self::new(t[0], *t.last().unwrap(), has_sign)
    }

    /// Two's-complement integers in `[−2^(c−1), 2^(c−1))`: exponents
    /// `0..=c−2` plus a sign bit. Requires `c ≥ 2`.
    pub fn twos_complement(bits: usize) -> Result<Self> {
        if bits < 2 {
            return Err(Error::invalid("two's complement encoding needs at least 2 bits"));
        }
        Self::new(0, bits as i32 - 2, true)
    }

    /// Exponents in bit order (descending).
    pub fn exponents(&self) -> impl Iterator<Item = i32> {
        (self.lo..=self.hi).rev()
    }

    pub fn has_sign(&self) -> bool {
        self.has_sign
    }

    pub fn bits_per_var(&self) -> usize {
        (self.hi - self.lo + 1) as usize + usize::from(self.has_sign)
    }

    /// Bit weights of one variable, in bit order.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.bits_per_var());
        if self.has_sign {
            w.push(-(2f64.powi(self.hi + 1)));
        }
        w.extend(self.exponents().map(|e| 2f64.powi(e)));
        w
    }

    /// Smallest and largest representable values of one variable.
    pub fn range(&self) -> (f64, f64) {
        let w = self.weights();
        let lo = w.iter().filter(|&&x| x < 0.0).sum();
        let hi = w.iter().filter(|&&x| x > 0.0).sum();
        (lo, hi)
    }
}

/// Which variable a bit belongs to and the weight it carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitInfo {
    pub var: usize,
    pub weight: f64,
}

/// `F′(q) = Σ v_a q_a + Σ_{a<b} w_ab q_a q_b`, plus the constant `offset`
/// that makes `F′(q) + offset = ‖A·decode(q) − b‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    num_bits: usize,
    linear: Vec<f64>,
    /// Dense strictly-upper-triangular storage, row-major `num_bits²`.
    quadratic: Vec<f64>,
    offset: f64,
    bit_map: Vec<BitInfo>,
}

impl QuboModel {
    /// A model with no bit map, mainly for tests and samplers.
    pub fn from_parts(linear: Vec<f64>, pairs: &[(usize, usize, f64)], offset: f64) -> Result<Self> {
        let n = linear.len();
        let mut quadratic = vec![0.0; n * n];
        for &(i, j, w) in pairs {
            let (i, j) = if i < j { (i, j) } else { (j, i) };
            if i == j || j >= n {
                return Err(Error::invalid(format!("bad coupler ({i}, {j}) for {n} bits")));
            }
            quadratic[i * n + j] += w;
        }
        Ok(Self {
            num_bits: n,
            linear,
            quadratic,
            offset,
            bit_map: Vec::new(),
        })
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn bit_map(&self) -> &[BitInfo] {
        &self.bit_map
    }

    /// `w_ab` for `a ≠ b` in either order; zero on the diagonal.
    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => self.quadratic[a * self.num_bits + b],
            std::cmp::Ordering::Greater => self.quadratic[b * self.num_bits + a],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Nonzero couplers `(a, b, w_ab)` with `a < b`.
    pub fn couplers(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.num_bits;
        (0..n).flat_map(move |a| {
            (a + 1..n).filter_map(move |b| {
                let w = self.quadratic[a * n + b];
                (w != 0.0).then_some((a, b, w))
            })
        })
    }

    /// Full symmetric coupling matrix with a zero diagonal.
    pub fn symmetric_couplings(&self) -> Matrix {
        Matrix::from_fn(self.num_bits, self.num_bits, |a, b| self.coupling(a, b))
    }

    /// `F′(q)`, without the offset.
    pub fn energy(&self, bits: &[bool]) -> f64 {
        assert_eq!(bits.len(), self.num_bits, "bit vector length mismatch");
        let n = self.num_bits;
        let mut e = 0.0;
        for a in 0..n {
            if !bits[a] {
                continue;
            }
            e += self.linear[a];
            let row = &self.quadratic[a * n..(a + 1) * n];
            for b in a + 1..n {
                if bits[b] {
                    e += row[b];
                }
            }
        }
        e
    }

    /// `F′(q) + offset`.
    pub fn total_energy(&self, bits: &[bool]) -> f64 {
        self.energy(bits) + self.offset
    }

    /// Energy change from flipping bit `a`.
    pub fn flip_delta(&self, bits: &[bool], a: usize) -> f64 {
        let mut field = self.linear[a];
        for (b, &on) in bits.iter().enumerate() {
            if on && b != a {
                field += self.coupling(a, b);
            }
        }
        if bits[a] {
            -field
        } else {
            field
        }
    }

    pub fn to_export(&self) -> ModelExport {
        ModelExport {
            num_bits: self.num_bits,
            linear: self.linear.clone(),
            quadratic: self.couplers().collect(),
            offset: self.offset,
            scale: 1.0,
        }
    }
}

/// `F(σ) = Σ h_a σ_a + Σ_{a<b} J_ab σ_a σ_b` over `σ ∈ {−1, +1}`, plus an
/// offset so that `F(σ) + offset` equals the QUBO's total energy at
/// `q = (σ + 1)/2`, times `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    h: Vec<f64>,
    /// Dense strictly-upper-triangular storage.
    j: Vec<f64>,
    offset: f64,
    scale: f64,
}

impl IsingModel {
    pub fn new(h: Vec<f64>, pairs: &[(usize, usize, f64)], offset: f64) -> Result<Self> {
        let n = h.len();
        let mut j = vec![0.0; n * n];
        for &(a, b, w) in pairs {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            if a == b || b >= n {
                return Err(Error::invalid(format!("bad coupler ({a}, {b}) for {n} spins")));
            }
            j[a * n + b] += w;
        }
        Ok(Self {
            h,
            j,
            offset,
            scale: 1.0,
        })
    }

    pub fn num_spins(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        let n = self.h.len();
        match a.cmp(&b) {
            std::cmp::Ordering::Less => self.j[a * n + b],
            std::cmp::Ordering::Greater => self.j[b * n + a],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    pub fn couplers(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.h.len();
        (0..n).flat_map(move |a| {
            (a + 1..n).filter_map(move |b| {
                let w = self.j[a * n + b];
                (w != 0.0).then_some((a, b, w))
            })
        })
    }

    pub fn max_abs_h(&self) -> f64 {
        self.h.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_j(&self) -> f64 {
        self.j.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `F(σ)` without the offset; `spins[a]` is `true` for `σ_a = +1`.
    pub fn energy(&self, spins: &[bool]) -> f64 {
        assert_eq!(spins.len(), self.h.len(), "spin vector length mismatch");
        let n = self.h.len();
        let sig = |a: usize| if spins[a] { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for a in 0..n {
            let sa = sig(a);
            e += self.h[a] * sa;
            let row = &self.j[a * n..(a + 1) * n];
            let mut acc = 0.0;
            for (b, &jab) in row.iter().enumerate().skip(a + 1) {
                acc += jab * sig(b);
            }
            e += sa * acc;
        }
        e
    }

    /// `F(σ) + offset`.
    pub fn total_energy(&self, spins: &[bool]) -> f64 {
        self.energy(spins) + self.offset
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs_h() == 0.0 && self.max_abs_j() == 0.0
    }

    pub fn to_export(&self) -> ModelExport {
        ModelExport {
            num_bits: self.h.len(),
            linear: self.h.clone(),
            quadratic: self.couplers().collect(),
            offset: self.offset,
            scale: self.scale,
        }
    }
}

/// Compile `‖A x − b‖²` over fixed-point encoded `x` into a QUBO.
///
/// With `s`, `t` the weights of bits `(j, s)` and `(k, t)`:
/// `v = s²·(AᵀA)_jj − 2s·(Aᵀb)_j` and `w = 2st·(AᵀA)_jk`, which is the
/// row-summed form of `Σ_i sA_ij(sA_ij − 2b_i)` and `2st Σ_i A_ij A_ik`.
/// Bit pairs within the same variable use `j = k`.
pub fn build_qubo(problem: &Problem, enc: &FixedPointEncoding) -> QuboModel {
    let a = problem.a();
    let n = problem.n();
    let gram = a.gram();
    let atb = a.tr_mul_vec(problem.b());
    let weights = enc.weights();
    let bit_map: Vec<BitInfo> = (0..n)
        .flat_map(|var| weights.iter().map(move |&weight| BitInfo { var, weight }))
        .collect();
    let nb = bit_map.len();
    let linear = bit_map
        .iter()
        .map(|bi| bi.weight * bi.weight * gram[(bi.var, bi.var)] - 2.0 * bi.weight * atb[bi.var])
        .collect();
    let mut quadratic = vec![0.0; nb * nb];
    for (p, bp) in bit_map.iter().enumerate() {
        for (q, bq) in bit_map.iter().enumerate().skip(p + 1) {
            quadratic[p * nb + q] = 2.0 * bp.weight * bq.weight * gram[(bp.var, bq.var)];
        }
    }
    let offset = problem.b().iter().map(|x| x * x).sum();
    QuboModel {
        num_bits: nb,
        linear,
        quadratic,
        offset,
        bit_map,
    }
}

/// Substitute `q_a = (σ_a + 1)/2`: `h_a = v_a/2 + Σ_b w_ab/4`,
/// `J_ab = w_ab/4`, and the constant `Σ v_a/2 + Σ w_ab/4` joins the offset.
pub fn qubo_to_ising(q: &QuboModel) -> IsingModel {
    let n = q.num_bits;
    let mut h: Vec<f64> = q.linear.iter().map(|v| v / 2.0).collect();
    let mut j = vec![0.0; n * n];
    let mut constant: f64 = q.linear.iter().sum::<f64>() / 2.0;
    for a in 0..n {
        for b in a + 1..n {
            let w = q.quadratic[a * n + b];
            if w == 0.0 {
                continue;
            }
            j[a * n + b] = w / 4.0;
            h[a] += w / 4.0;
            h[b] += w / 4.0;
            constant += w / 4.0;
        }
    }
    IsingModel {
        h,
        j,
        offset: q.offset + constant,
        scale: 1.0,
    }
}

/// The uniform factor `k = min(2/max|h|, 1/max|J|)` that brings a model into
/// `h ∈ [−2, 2]`, `J ∈ [−1, 1]`. An absent class imposes no constraint.
pub fn range_scale_factor(m: &IsingModel) -> Option<f64> {
    let mh = m.max_abs_h();
    let mj = m.max_abs_j();
    let kh = (mh > 0.0).then(|| 2.0 / mh);
    let kj = (mj > 0.0).then(|| 1.0 / mj);
    match (kh, kj) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Multiply `h`, `J` and the offset by [`range_scale_factor`]. The set of
/// minimizing spin configurations is unchanged. All-zero models come back
/// unchanged.
pub fn scale_ising(m: &IsingModel) -> IsingModel {
    let Some(k) = range_scale_factor(m) else {
        return m.clone();
    };
    IsingModel {
        h: m.h.iter().map(|x| x * k).collect(),
        j: m.j.iter().map(|x| x * k).collect(),
        offset: m.offset * k,
        scale: m.scale * k,
    }
}

/// Recover the real vector encoded by `bits`.
pub fn decode(bits: &[bool], enc: &FixedPointEncoding, n: usize) -> Result<Vec<f64>> {
    let c = enc.bits_per_var();
    if bits.len() != n * c {
        return Err(Error::DimensionMismatch {
            context: "decode bit vector",
            expected: n * c,
            got: bits.len(),
        });
    }
    let w = enc.weights();
    Ok(bits
        .chunks(c)
        .map(|chunk| chunk.iter().zip(&w).filter(|(&b, _)| b).map(|(_, &wt)| wt).sum())
        .collect())
}

/// Bits encoding `x` exactly, if every entry is representable.
pub fn encode(x: &[f64], enc: &FixedPointEncoding) -> Option<Vec<bool>> {
    let w = enc.weights();
    let c = w.len();
    let mut out = Vec::with_capacity(x.len() * c);
    for &xi in x {
        let mut rest = xi;
        let mut bits = vec![false; c];
        let mut k = 0;
        if enc.has_sign() && rest < 0.0 {
            bits[0] = true;
            rest -= w[0];
            k = 1;
        } else if enc.has_sign() {
            k = 1;
        }
        for (b, &wt) in bits.iter_mut().zip(&w).skip(k) {
            if rest >= wt {
                *b = true;
                rest -= wt;
            }
        }
        if rest != 0.0 {
            return None;
        }
        out.extend(bits);
    }
    Some(out)
}

/// Bit vector from the low `len` bits of `index`, first bit most significant.
pub fn bits_from_index(index: u64, len: usize) -> Vec<bool> {
    (0..len).map(|a| (index >> (len - 1 - a)) & 1 == 1).collect()
}

/// JSON export shared by QUBO and Ising models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelExport {
    pub num_bits: usize,
    #[serde(serialize_with = "crate::fmt::ser_vec")]
    pub linear: Vec<f64>,
    #[serde(serialize_with = "ser_triplets")]
    pub quadratic: Vec<(usize, usize, f64)>,
    #[serde(serialize_with = "crate::fmt::ser_f64")]
    pub offset: f64,
    #[serde(serialize_with = "crate::fmt::ser_f64")]
    pub scale: f64,
}

fn ser_triplets<S: Serializer>(t: &[(usize, usize, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    struct Triplet(usize, usize, f64);
    impl Serialize for Triplet {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            struct V(f64);
            impl Serialize for V {
                fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                    crate::fmt::ser_f64(&self.0, s)
                }
            }
            let mut seq = s.serialize_seq(Some(3))?;
            seq.serialize_element(&self.0)?;
            seq.serialize_element(&self.1)?;
            seq.serialize_element(&V(self.2))?;
            seq.end()
        }
    }
    let mut seq = s.serialize_seq(Some(t.len()))?;
    for &(i, j, v) in t {
        seq.serialize_element(&Triplet(i, j, v))?;
    }
    seq.end()
}

impl ModelExport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
