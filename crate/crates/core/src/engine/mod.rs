//! Exact quenched partition functions.
//!
//! `Z_{n+1} = Σ_i Z^{(i,1)}_n ⋯ Z^{(i,s)}_n · e^{βω_{i,1}} ⋯ e^{βω_{i,s−1}}`:
//! a depth-`k` edge combines `b` branches, each the product of its `s`
//! sub-edge partition functions and the weights of the `s − 1` sites joining
//! them. Everything is kept in log form; the environment is read from an
//! [`Environment`] on demand and never stored.

mod coarse;
mod population;

pub use coarse::{CoarseProfile, DEFAULT_ENUMERATION_BUDGET, DEFAULT_M_MAX};
pub use population::log_w_population;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::counter::{derive, mix64, CounterRng, EdgeAddr};
use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::lattice::{log_path_count, LatticeParams};

/// Default cap on `(bs)^n` per sample.
pub const DEFAULT_SITE_BUDGET: f64 = 2e7;

const BOND_SALT: u64 = 0xB0D0_B0D0_1234_5678;

/// Source of disorder values, addressed by edge.
pub trait Environment: Sync {
    type Sites<'a>: Iterator<Item = f64>
    where
        Self: 'a;

    /// Site variables created when `edge` is replaced by its branches,
    /// branch-major: item `i·(s−1) + j` sits between segments `j` and
    /// `j + 1` of branch `i`. Only the first `b(s−1)` items are read.
    fn sites(&self, edge: EdgeAddr) -> Self::Sites<'_>;

    fn fill_sites(&self, edge: EdgeAddr, out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(self.sites(edge)) {
            *o = w;
        }
    }

    /// Bond variable of a depth-0 edge (bond-disorder model only).
    fn bond(&self, edge: EdgeAddr) -> f64;
}

/// Environment drawn lazily from a counter-based stream keyed by
/// `(seed, edge address)`.
#[derive(Debug, Clone, Copy)]
pub struct SampledEnvironment<'a> {
    model: &'a DisorderModel,
    key: u64,
}

impl<'a> SampledEnvironment<'a> {
    pub fn new(model: &'a DisorderModel, seed: u64) -> Self {
        Self {
            model,
            key: mix64(seed ^ 0xE4F1_2C3B_5A69_7D8E),
        }
    }
}

/// Endless stream of one edge's site variables.
pub struct SiteStream<'a> {
    model: &'a DisorderModel,
    rng: CounterRng,
}

impl Iterator for SiteStream<'_> {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        Some(self.model.sample(&mut self.rng))
    }
}

impl Environment for SampledEnvironment<'_> {
    type Sites<'a>
        = SiteStream<'a>
    where
        Self: 'a;

    #[inline]
    fn sites(&self, edge: EdgeAddr) -> SiteStream<'_> {
        SiteStream {
            model: self.model,
            rng: CounterRng::new(self.key ^ edge.key()),
        }
    }

    #[inline]
    fn bond(&self, edge: EdgeAddr) -> f64 {
        let mut rng = CounterRng::new(derive(self.key ^ edge.key(), BOND_SALT));
        self.model.sample(&mut rng)
    }
}

/// One exact evaluation of `log Z_n` and `log W_n` on a sampled environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchedSample {
    pub n: u32,
    pub beta: f64,
    pub log_z: f64,
    pub log_w: f64,
    pub seed: u64,
}

#[inline]
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// A lattice together with its disorder law.
#[derive(Debug, Clone)]
pub struct Polymer {
    params: LatticeParams,
    model: DisorderModel,
    site_budget: f64,
}

impl Polymer {
    pub fn new(params: LatticeParams, model: DisorderModel) -> Self {
        Self {
            params,
            model,
            site_budget: DEFAULT_SITE_BUDGET,
        }
    }

    pub fn with_site_budget(mut self, budget: f64) -> Self {
        self.site_budget = budget;
        self
    }

    pub fn params(&self) -> LatticeParams {
        self.params
    }

    pub fn model(&self) -> &DisorderModel {
        &self.model
    }

    pub fn site_budget(&self) -> f64 {
        self.site_budget
    }

    pub fn environment(&self, seed: u64) -> SampledEnvironment<'_> {
        SampledEnvironment::new(&self.model, seed)
    }

    /// Work estimate for one depth-`n` sample, `(bs)^n`.
    pub fn site_visits(&self, n: u32) -> f64 {
        ((self.params.b() * self.params.s()) as f64).powi(n as i32)
    }

    pub fn check_budget(&self, n: u32) -> Result<()> {
        let needed = self.site_visits(n);
        if needed > self.site_budget {
            return Err(Error::BudgetExceeded {
                what: "quenched recursion",
                needed,
                budget: self.site_budget,
            });
        }
        Ok(())
    }

    /// `log Q Z_n = (s^n − 1) λ(β) + log |Γ_n|` (site disorder).
    pub fn log_annealed_z(&self, n: u32, beta: f64) -> f64 {
        self.params.path_sites(n) * self.model.log_mgf(beta) + log_path_count(self.params, n)
    }

    /// `log Q Z_n = s^n λ(β) + log |Γ_n|` (bond disorder).
    pub fn log_annealed_z_bond(&self, n: u32, beta: f64) -> f64 {
        (self.params.s() as f64).powi(n as i32) * self.model.log_mgf(beta)
            + log_path_count(self.params, n)
    }

    fn check_beta(beta: f64) -> Result<()> {
        if beta.is_finite() && beta >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("beta must be finite and >= 0, got {beta}")))
        }
    }

    /// Exact `log Z_n` for the environment of `seed`.
    pub fn quenched_log_z(&self, n: u32, beta: f64, seed: u64) -> Result<QuenchedSample> {
        Self::check_beta(beta)?;
        self.check_budget(n)?;
        Ok(self.sample_unchecked(n, beta, seed))
    }

    pub(crate) fn sample_unchecked(&self, n: u32, beta: f64, seed: u64) -> QuenchedSample {
        let env = self.environment(seed);
        let log_z = self.log_z_in(&env, n, beta);
        QuenchedSample {
            n,
            beta,
            log_z,
            log_w: log_z - self.log_annealed_z(n, beta),
            seed,
        }
    }

    /// `log Z_n` in an arbitrary environment, rooted at `A–B`.
    pub fn log_z_in<E: Environment>(&self, env: &E, n: u32, beta: f64) -> f64 {
        self.edge_log_z_in(env, EdgeAddr::ROOT, n, beta)
    }

    /// `log Z` of the depth-`depth` sub-lattice hanging below `edge`.
    pub fn edge_log_z_in<E: Environment>(&self, env: &E, edge: EdgeAddr, depth: u32, beta: f64) -> f64 {
        SiteRecursion::new(env, self.params, &self.model, beta).log_z(edge, depth)
    }

    /// Exact `log Z_n` of the bond-disorder model, where each depth-0 edge
    /// carries `e^{βω_e}` and the joining sites carry nothing.
    pub fn bond_quenched_log_z(&self, n: u32, beta: f64, seed: u64) -> Result<QuenchedSample> {
        Self::check_beta(beta)?;
        self.check_budget(n)?;
        let env = self.environment(seed);
        let log_z = self.bond_log_z_in(&env, n, beta);
        Ok(QuenchedSample {
            n,
            beta,
            log_z,
            log_w: log_z - self.log_annealed_z_bond(n, beta),
            seed,
        })
    }

    pub fn bond_log_z_in<E: Environment>(&self, env: &E, n: u32, beta: f64) -> f64 {
        bond_log_z(env, self.params.b(), self.params.s(), beta, EdgeAddr::ROOT, n)
    }
}

type Branches = SmallVec<[f64; 16]>;

/// Site-disorder recursion over one environment.
///
/// Edges of depth up to `linear_depth` are evaluated with plain products and
/// sums of `e^{βω}`, one `exp` per site and no `ln`; everything above works
/// in log form. A linear value outside `[e^{−R}, e^{R}]` poisons its parent
/// with NaN and the edge is redone in log form, so the split only affects
/// speed.
pub(crate) struct SiteRecursion<'e, E> {
    env: &'e E,
    b: usize,
    s: usize,
    beta: f64,
    linear_depth: u32,
    lo: f64,
    hi: f64,
}

impl<'e, E: Environment> SiteRecursion<'e, E> {
    pub(crate) fn new(env: &'e E, params: LatticeParams, model: &DisorderModel, beta: f64) -> Self {
        let (b, s) = (params.b(), params.s());
        let r = 300.0 / s as f64;
        // keep the typical size of a linear edge value well inside the range
        let rate = (b as f64).ln() / (s - 1) as f64 + model.log_mgf(beta) + beta;
        let mut linear_depth = 1;
        while linear_depth < 30 && (s as f64).powi(linear_depth as i32 + 1) * rate <= r / 2.0 {
            linear_depth += 1;
        }
        Self {
            env,
            b,
            s,
            beta,
            linear_depth,
            lo: (-r).exp(),
            hi: r.exp(),
        }
    }

    pub(crate) fn log_z(&self, edge: EdgeAddr, depth: u32) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        if depth <= self.linear_depth {
            let v = self.linear(edge, depth);
            if !v.is_nan() {
                return v.ln();
            }
            return self.log_domain(edge, depth, true);
        }
        self.log_domain(edge, depth, false)
    }

    /// `Z` below `edge`, or NaN once any partial value leaves the safe range.
    fn linear(&self, edge: EdgeAddr, depth: u32) -> f64 {
        let mut sites = self.env.sites(edge);
        let mut z = 0.0;
        for i in 0..self.b {
            let h: f64 = sites.by_ref().take(self.s - 1).sum();
            let mut prod = (self.beta * h).exp();
            if depth > 1 {
                for j in 0..self.s {
                    prod *= self.linear(edge.child(i, j, self.s), depth - 1);
                }
            }
            z += prod;
        }
        if z >= self.lo && z <= self.hi {
            z
        } else {
            f64::NAN
        }
    }

    fn log_domain(&self, edge: EdgeAddr, depth: u32, force_log: bool) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        let (b, s) = (self.b, self.s);
        let mut sites = self.env.sites(edge);
        let mut branches: Branches = SmallVec::with_capacity(b);
        for i in 0..b {
            let mut acc = self.beta * sites.by_ref().take(s - 1).sum::<f64>();
            if depth > 1 {
                for j in 0..s {
                    let child = edge.child(i, j, s);
                    acc += if force_log {
                        self.log_domain(child, depth - 1, true)
                    } else {
                        self.log_z(child, depth - 1)
                    };
                }
            }
            branches.push(acc);
        }
        log_sum_exp(&branches)
    }
}

/// Pure log-domain recursion; the reference the fast path is tested against.
#[cfg(test)]
fn site_log_z_reference<E: Environment>(env: &E, b: usize, s: usize, beta: f64, edge: EdgeAddr, depth: u32) -> f64 {
    if depth == 0 {
        return 0.0;
    }
    let k = s - 1;
    let mut sites = vec![0.0; b * k];
    env.fill_sites(edge, &mut sites);
    let mut branches = Vec::with_capacity(b);
    for i in 0..b {
        let mut acc = beta * sites[i * k..(i + 1) * k].iter().sum::<f64>();
        for j in 0..s {
            acc += site_log_z_reference(env, b, s, beta, edge.child(i, j, s), depth - 1);
        }
        branches.push(acc);
    }
    log_sum_exp(&branches)
}

fn bond_log_z<E: Environment>(env: &E, b: usize, s: usize, beta: f64, edge: EdgeAddr, depth: u32) -> f64 {
    if depth == 0 {
        return beta * env.bond(edge);
    }
    let mut branches: Branches = SmallVec::with_capacity(b);
    for i in 0..b {
        let acc = (0..s)
            .map(|j| bond_log_z(env, b, s, beta, edge.child(i, j, s), depth - 1))
            .sum::<f64>();
        branches.push(acc);
    }
    log_sum_exp(&branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct FixedRoot(Vec<f64>);

    impl Environment for FixedRoot {
        type Sites<'a> = std::iter::Copied<std::slice::Iter<'a, f64>>;
        fn sites(&self, edge: EdgeAddr) -> Self::Sites<'_> {
            assert_eq!(edge, EdgeAddr::ROOT);
            self.0.iter().copied()
        }
        fn bond(&self, _: EdgeAddr) -> f64 {
            unreachable!()
        }
    }

    fn polymer(b: usize, s: usize) -> Polymer {
        Polymer::new(LatticeParams::new(b, s).unwrap(), DisorderModel::Gaussian)
    }

    #[test]
    fn beta_zero_counts_paths() {
        for (b, s) in [(2, 2), (3, 2), (2, 3)] {
            let p = polymer(b, s);
            for n in 0..6 {
                let q = p.quenched_log_z(n, 0.0, 17).unwrap();
                let exact = log_path_count(p.params(), n);
                assert_abs_diff_eq!(q.log_z, exact, epsilon = 1e-9 * exact.max(1.0));
                assert_abs_diff_eq!(q.log_w, 0.0, epsilon = 1e-9 * exact.max(1.0));
            }
        }
    }

    #[test]
    fn depth_zero_is_trivial() {
        let q = polymer(2, 2).quenched_log_z(0, 1.3, 5).unwrap();
        assert_eq!(q.log_z, 0.0);
        assert_eq!(q.log_w, 0.0);
    }

    #[test]
    fn single_diamond_with_fixed_sites() {
        let p = polymer(2, 2);
        let (w1, w2) = (0.37, -1.2);
        let got = p.log_z_in(&FixedRoot(vec![w1, w2]), 1, 1.0);
        assert_abs_diff_eq!(got, (w1.exp() + w2.exp()).ln(), epsilon = 1e-14);
    }

    #[test]
    fn budget_guard() {
        let p = polymer(2, 2).with_site_budget(1e3);
        assert!(p.quenched_log_z(4, 1.0, 0).is_ok());
        assert!(matches!(p.quenched_log_z(5, 1.0, 0), Err(Error::BudgetExceeded { .. })));
        assert!(p.quenched_log_z(2, -1.0, 0).is_err());
    }

    #[test]
    fn linear_fast_path_matches_log_domain() {
        let models = [DisorderModel::Gaussian, DisorderModel::bernoulli(0.2).unwrap(), DisorderModel::Uniform];
        for (b, s) in [(2, 2), (4, 2), (2, 4), (3, 3)] {
            let params = LatticeParams::new(b, s).unwrap();
            let n = if s == 2 { 7 } else { 4 };
            for model in &models {
                for beta in [0.0, 0.3, 1.0, 4.0, 40.0] {
                    let env = SampledEnvironment::new(model, 99);
                    let fast = SiteRecursion::new(&env, params, model, beta).log_z(EdgeAddr::ROOT, n);
                    let slow = site_log_z_reference(&env, b, s, beta, EdgeAddr::ROOT, n);
                    assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "({b},{s}) β={beta}: {fast} vs {slow}");
                }
            }
        }
    }

    #[test]
    fn overflowing_sites_fall_back_to_log_form() {
        struct Huge;
        impl Environment for Huge {
            type Sites<'a> = std::vec::IntoIter<f64>;
            fn sites(&self, edge: EdgeAddr) -> Self::Sites<'_> {
                let sign = if edge.key().is_multiple_of(2) { 1.0 } else { -1.0 };
                (0..2).map(|i| sign * (300.0 + i as f64)).collect::<Vec<_>>().into_iter()
            }
            fn bond(&self, _: EdgeAddr) -> f64 {
                unreachable!()
            }
        }
        let params = LatticeParams::new(2, 2).unwrap();
        let fast = SiteRecursion::new(&Huge, params, &DisorderModel::Gaussian, 1.0).log_z(EdgeAddr::ROOT, 4);
        let slow = site_log_z_reference(&Huge, 2, 2, 1.0, EdgeAddr::ROOT, 4);
        assert!(fast.is_finite());
        assert!((fast - slow).abs() <= 1e-12 * slow.abs());
    }

    #[test]
    fn reproducible_per_seed() {
        let p = polymer(3, 2);
        let a = p.quenched_log_z(5, 0.8, 123).unwrap();
        let b = p.quenched_log_z(5, 0.8, 123).unwrap();
        let c = p.quenched_log_z(5, 0.8, 124).unwrap();
        assert_eq!(a.log_z.to_bits(), b.log_z.to_bits());
        assert_ne!(a.log_z, c.log_z);
    }

    #[test]
    fn bond_beta_zero_and_normalization() {
        let p = polymer(2, 3);
        for n in 0..5 {
            let q = p.bond_quenched_log_z(n, 0.0, 3).unwrap();
            assert_abs_diff_eq!(q.log_z, log_path_count(p.params(), n), epsilon = 1e-9);
            let q = p.bond_quenched_log_z(n, 0.7, 3).unwrap();
            assert_abs_diff_eq!(q.log_w, q.log_z - p.log_annealed_z_bond(n, 0.7), epsilon = 0.0);
        }
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_abs_diff_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln(), epsilon = 1e-12);
    }
}
