//! Combinatorics of the diamond hierarchical lattice `D_n`.
//!
//! `D_0` is a single edge `A–B`; `D_{n+1}` replaces every edge of `D_n` by
//! `b` parallel branches of `s` edges. The lattice itself is never built:
//! sizes come from closed forms and paths are encoded as choice trees.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts whose natural log exceeds this are only kept in log form.
pub const EXACT_LOG_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeParams {
    b: usize,
    s: usize,
}

impl LatticeParams {
    pub fn new(b: usize, s: usize) -> Result<Self> {
        if b < 2 || s < 2 {
            return Err(Error::InvalidLattice { b, s });
        }
        Ok(Self { b, s })
    }

    /// Branches per edge.
    pub fn b(&self) -> usize {
        self.b
    }

    /// Segments per branch.
    pub fn s(&self) -> usize {
        self.s
    }

    /// Number of branch choices describing one path of `Γ_n`,
    /// `(s^n − 1)/(s − 1)`.
    pub fn choices(&self, n: u32) -> u64 {
        let mut c = 0u64;
        for _ in 0..n {
            c = c.saturating_mul(self.s as u64).saturating_add(1);
        }
        c
    }

    /// Interior sites visited by any path of `Γ_n`, `s^n − 1`.
    pub fn path_sites(&self, n: u32) -> f64 {
        (self.s as f64).powi(n as i32) - 1.0
    }

    /// `|V_n| = (bs)^{n−1} b (s−1)` as a float.
    pub fn generation_size_f64(&self, n: u32) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let bs = (self.b * self.s) as f64;
        bs.powi(n as i32 - 1) * (self.b * (self.s - 1)) as f64
    }

    /// `|D_n ∖ {A, B}|` as a float.
    pub fn lattice_size_f64(&self, n: u32) -> f64 {
        (1..=n).map(|i| self.generation_size_f64(i)).sum()
    }
}

/// An exact count, or its natural log once it no longer fits comfortably.
#[derive(Debug, Clone, PartialEq)]
pub enum Count {
    Exact(BigUint),
    Log(f64),
}

impl Count {
    fn from_exact(v: BigUint) -> Self {
        Count::Exact(v)
    }

    /// Natural logarithm (−∞ for zero).
    pub fn ln(&self) -> f64 {
        match self {
            Count::Log(l) => *l,
            Count::Exact(v) => big_ln(v),
        }
    }

    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            Count::Exact(v) => Some(v),
            Count::Log(_) => None,
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.exact().and_then(|v| v.to_u64())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Count::Exact(v) => v.to_f64().unwrap_or(f64::INFINITY),
            Count::Log(l) => l.exp(),
        }
    }
}

fn big_ln(v: &BigUint) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().unwrap().ln();
    }
    // keep the top 64 bits
    let shift = bits - 64;
    let top = (v >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `|V_n|`, the number of vertices added at generation `n ≥ 1`.
pub fn generation_size(params: LatticeParams, n: u32) -> Result<Count> {
    if n == 0 {
        return Err(Error::GenerationZero);
    }
    let (b, s) = (params.b as f64, params.s as f64);
    let log = (n - 1) as f64 * (b * s).ln() + b.ln() + (s - 1.0).ln();
    if log > EXACT_LOG_LIMIT {
        return Ok(Count::Log(log));
    }
    let bs = BigUint::from(params.b * params.s);
    Ok(Count::from_exact(
        bs.pow(n - 1) * BigUint::from(params.b * (params.s - 1)),
    ))
}

/// `|D_n ∖ {A, B}| = (s−1) b ((sb)^n − 1)/(sb − 1)`.
pub fn lattice_size(params: LatticeParams, n: u32) -> Count {
    if n == 0 {
        return Count::Exact(BigUint::zero());
    }
    let (b, s) = (params.b as f64, params.s as f64);
    let sb = s * b;
    let log = ((s - 1.0) * b).ln() + n as f64 * sb.ln() + (-(-(n as f64) * sb.ln()).exp()).ln_1p()
        - (sb - 1.0).ln();
    if log > EXACT_LOG_LIMIT {
        return Count::Log(log);
    }
    let sb_big = BigUint::from(params.s * params.b);
    let num = BigUint::from((params.s - 1) * params.b) * (sb_big.pow(n) - BigUint::one());
    Count::from_exact(num / BigUint::from(params.s * params.b - 1))
}

/// `|Γ_n| = b^{(s^n−1)/(s−1)}`.
pub fn path_count(params: LatticeParams, n: u32) -> Count {
    let choices = params.choices(n);
    let log = choices as f64 * (params.b as f64).ln();
    if log > EXACT_LOG_LIMIT {
        return Count::Log(log);
    }
    Count::from_exact(BigUint::from(params.b).pow(choices as u32))
}

/// `ln |Γ_n|` without materializing the count.
pub fn log_path_count(params: LatticeParams, n: u32) -> f64 {
    params.choices(n) as f64 * (params.b as f64).ln()
}

/// A directed path of `Γ_n` as its tree of branch choices.
///
/// Layout is depth-first: the branch taken across the top edge, then the
/// codes of the `s` sub-edges of that branch in order, each laid out the same
/// way. A depth-`n` code therefore has `(s^n − 1)/(s − 1)` entries and the
/// `j`-th sub-edge code starts at `1 + j·c(n−1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathCode {
    depth: u32,
    s: usize,
    choices: Vec<u8>,
}

impl PathCode {
    pub fn new(params: LatticeParams, depth: u32, choices: Vec<u8>) -> Result<Self> {
        let expected = params.choices(depth);
        if choices.len() as u64 != expected {
            return Err(Error::InvalidArgument(format!(
                "path code of depth {depth} needs {expected} choices, got {}",
                choices.len()
            )));
        }
        if let Some(&c) = choices.iter().find(|&&c| c as usize >= params.b) {
            return Err(Error::InvalidArgument(format!(
                "branch choice {c} outside 0..{}",
                params.b
            )));
        }
        Ok(Self {
            depth,
            s: params.s,
            choices,
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn choices(&self) -> &[u8] {
        &self.choices
    }

    /// Branch taken across the top edge (`None` at depth 0).
    pub fn top(&self) -> Option<usize> {
        self.choices.first().map(|&c| c as usize)
    }

    /// Choices of the `j`-th sub-edge of the chosen branch.
    pub fn sub(&self, j: usize) -> &[u8] {
        sub_slice(&self.choices, self.s, j)
    }

    /// Restriction `γ|_m` to the coarser lattice `D_m`.
    pub fn restrict(&self, m: u32) -> PathCode {
        let m = m.min(self.depth);
        let mut out = Vec::new();
        restrict_into(&self.choices, self.s, m, &mut out);
        PathCode {
            depth: m,
            s: self.s,
            choices: out,
        }
    }

    /// Lexicographic rank among all codes of the same depth, i.e. the
    /// choices read as a base-`b` numeral, first choice most significant.
    pub fn rank(&self, b: usize) -> u64 {
        self.choices
            .iter()
            .fold(0u64, |acc, &c| acc * b as u64 + c as u64)
    }
}

fn sub_slice(code: &[u8], s: usize, j: usize) -> &[u8] {
    let inner = (code.len() - 1) / s;
    let start = 1 + j * inner;
    &code[start..start + inner]
}

fn restrict_into(code: &[u8], s: usize, m: u32, out: &mut Vec<u8>) {
    if m == 0 || code.is_empty() {
        return;
    }
    out.push(code[0]);
    for j in 0..s {
        restrict_into(sub_slice(code, s, j), s, m - 1, out);
    }
}

/// Draw a path uniformly from `Γ_n`.
pub fn sample_uniform_path<R: Rng + ?Sized>(params: LatticeParams, n: u32, rng: &mut R) -> PathCode {
    let len = params.choices(n) as usize;
    let choices = (0..len)
        .map(|_| rng.random_range(0..params.b) as u8)
        .collect();
    PathCode {
        depth: n,
        s: params.s,
        choices,
    }
}

/// Every path of `Γ_n`, in rank order.
pub fn enumerate_paths(params: LatticeParams, n: u32) -> impl Iterator<Item = PathCode> {
    let len = params.choices(n) as usize;
    let total = path_count(params, n).to_u64().expect("Γ_n too large to enumerate");
    let b = params.b as u64;
    (0..total).map(move |mut r| {
        let mut choices = vec![0u8; len];
        for slot in choices.iter_mut().rev() {
            *slot = (r % b) as u8;
            r /= b;
        }
        PathCode {
            depth: n,
            s: params.s,
            choices,
        }
    })
}

/// Number of interior sites shared by two paths of equal depth.
pub fn overlap(p1: &PathCode, p2: &PathCode) -> Result<u64> {
    if p1.depth != p2.depth {
        return Err(Error::DepthMismatch(p1.depth, p2.depth));
    }
    Ok(overlap_codes(&p1.choices, &p2.choices, p1.s))
}

fn overlap_codes(a: &[u8], b: &[u8], s: usize) -> u64 {
    if a.is_empty() || a[0] != b[0] {
        return 0;
    }
    (s as u64 - 1)
        + (0..s)
            .map(|j| overlap_codes(sub_slice(a, s, j), sub_slice(b, s, j), s))
            .sum::<u64>()
}

/// `P^{⊗2}`-expected overlap `O_n`, from `O_n = (s·O_{n−1} + s − 1)/b`.
pub fn expected_overlap(params: LatticeParams, n: u32) -> f64 {
    let (b, s) = (params.b as f64, params.s as f64);
    (0..n).fold(0.0, |o, _| (s * o + s - 1.0) / b)
}

/// `lim O_n = (s−1)/(b−s)` when `b > s`.
pub fn expected_overlap_limit(params: LatticeParams) -> Option<f64> {
    (params.b > params.s).then(|| (params.s - 1) as f64 / (params.b - params.s) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::CounterRng;

    fn p(b: usize, s: usize) -> LatticeParams {
        LatticeParams::new(b, s).unwrap()
    }

    #[test]
    fn rejects_degenerate_lattices() {
        assert!(LatticeParams::new(1, 2).is_err());
        assert!(LatticeParams::new(2, 1).is_err());
    }

    #[test]
    fn generation_sizes() {
        assert_eq!(generation_size(p(3, 2), 1).unwrap().to_u64(), Some(3));
        assert_eq!(generation_size(p(2, 2), 2).unwrap().to_u64(), Some(8));
        assert_eq!(generation_size(p(2, 3), 1).unwrap().to_u64(), Some(4));
        assert_eq!(generation_size(p(2, 2), 0), Err(Error::GenerationZero));
    }

    #[test]
    fn lattice_sizes() {
        assert_eq!(lattice_size(p(2, 2), 1).to_u64(), Some(2));
        assert_eq!(lattice_size(p(4, 3), 0).to_u64(), Some(0));
        assert_eq!(lattice_size(p(3, 2), 2).to_u64(), Some(21));
    }

    #[test]
    fn generations_sum_to_lattice() {
        for b in 2..=4 {
            for s in 2..=4 {
                let par = p(b, s);
                let mut acc = BigUint::zero();
                for n in 1..=12 {
                    acc += generation_size(par, n).unwrap().exact().unwrap();
                    assert_eq!(lattice_size(par, n).exact(), Some(&acc), "b={b} s={s} n={n}");
                    assert!((par.lattice_size_f64(n) / acc.to_f64().unwrap() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn path_counts() {
        assert_eq!(path_count(p(3, 2), 2).to_u64(), Some(27));
        assert_eq!(path_count(p(5, 7), 0).to_u64(), Some(1));
        assert_eq!(path_count(p(2, 3), 2).to_u64(), Some(16));
    }

    #[test]
    fn huge_counts_switch_to_log_form() {
        let par = p(2, 2);
        let c = path_count(par, 12);
        assert!(matches!(c, Count::Log(_)));
        assert_eq!(c.ln(), 4095.0 * 2f64.ln());
        let c = path_count(par, 9);
        assert!(matches!(c, Count::Exact(_)));
        assert!((c.ln() / (511.0 * 2f64.ln()) - 1.0).abs() < 1e-12);
        let l = lattice_size(p(4, 4), 300);
        assert!(matches!(l, Count::Log(_)));
        assert!((l.ln() - (12f64.ln() + 300.0 * 16f64.ln() - 15f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn empty_path_at_depth_zero() {
        let mut rng = CounterRng::new(1);
        let code = sample_uniform_path(p(2, 2), 0, &mut rng);
        assert!(code.choices().is_empty());
        assert_eq!(code.top(), None);
    }

    #[test]
    fn overlap_examples() {
        let par = p(2, 2);
        let a = PathCode::new(par, 1, vec![0]).unwrap();
        let b = PathCode::new(par, 1, vec![1]).unwrap();
        assert_eq!(overlap(&a, &b).unwrap(), 0);
        let a = PathCode::new(par, 2, vec![0, 0, 0]).unwrap();
        let b = PathCode::new(par, 2, vec![0, 1, 1]).unwrap();
        assert_eq!(overlap(&a, &b).unwrap(), 1);
        for n in 0..5 {
            let mut rng = CounterRng::new(n as u64);
            let q = p(3, 3);
            let c = sample_uniform_path(q, n, &mut rng);
            assert_eq!(overlap(&c, &c).unwrap(), 3u64.pow(n) - 1);
        }
        let c = PathCode::new(par, 1, vec![0]).unwrap();
        assert_eq!(overlap(&a, &c), Err(Error::DepthMismatch(2, 1)));
    }

    #[test]
    fn expected_overlap_values() {
        assert_eq!(expected_overlap(p(2, 2), 0), 0.0);
        assert!((expected_overlap(p(2, 2), 3) - 1.5).abs() < 1e-15);
        assert_eq!(expected_overlap_limit(p(4, 2)), Some(0.5));
        assert!((expected_overlap(p(4, 2), 60) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn expected_overlap_by_enumeration() {
        // exact average over all ordered pairs
        for (b, s, n) in [(2, 2, 2), (2, 3, 2), (3, 2, 2)] {
            let par = p(b, s);
            let paths: Vec<_> = enumerate_paths(par, n).collect();
            let total: u64 = paths
                .iter()
                .flat_map(|x| paths.iter().map(move |y| overlap(x, y).unwrap()))
                .sum();
            let mean = total as f64 / (paths.len() * paths.len()) as f64;
            assert!((mean - expected_overlap(par, n)).abs() < 1e-12);
        }
    }

    #[test]
    fn restriction_and_rank() {
        let par = p(2, 2);
        let code = PathCode::new(par, 2, vec![1, 0, 1]).unwrap();
        assert_eq!(code.restrict(1).choices(), &[1]);
        assert_eq!(code.restrict(0).choices(), &[] as &[u8]);
        assert_eq!(code.rank(2), 0b101);
        for (i, c) in enumerate_paths(p(3, 2), 2).enumerate() {
            assert_eq!(c.rank(3), i as u64);
        }
    }
}
