//! Polymer measure seen on a coarse lattice.
//!
//! For `g ∈ Γ_m` and `n ≥ m`, `μ_n(γ|_m = g) = Z_n^{(g)} / Z_n` where
//! `Z_n^{(g)}` collects all fine paths through `g`. Each of the `s^m` edges
//! of `D_m` on `g` carries an independent depth-`(n−m)` partition function,
//! so `log Z_n^{(g)} = β H_m(g) + Σ_e log Z_{n−m}(e)`.

use smallvec::SmallVec;

use super::{log_sum_exp, Environment, Polymer, SiteRecursion};
use crate::counter::EdgeAddr;
use crate::error::{Error, Result};
use crate::lattice::{log_path_count, path_count, LatticeParams, PathCode};

/// Deepest coarse lattice enumerated by default.
pub const DEFAULT_M_MAX: u32 = 3;

/// Largest `|Γ_m|` enumerated by default.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1 << 20;

/// Distribution of the coarse-grained path `γ|_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseProfile {
    pub m: u32,
    /// Normalized log-probabilities, indexed by [`PathCode::rank`].
    pub log_probs: Vec<f64>,
    /// Log of the normalizing sum before normalization.
    pub log_norm: f64,
    pub mu_max: f64,
}

impl CoarseProfile {
    fn from_log_weights(m: u32, mut w: Vec<f64>) -> Self {
        let log_norm = log_sum_exp(&w);
        let mut mu_max = 0.0f64;
        for x in &mut w {
            *x -= log_norm;
            mu_max = mu_max.max(x.exp());
        }
        Self {
            m,
            log_probs: w,
            log_norm,
            mu_max,
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_probs.iter().map(|x| x.exp()).collect()
    }

    pub fn probability(&self, code: &PathCode, b: usize) -> f64 {
        self.log_probs[code.rank(b) as usize].exp()
    }

    /// Push the distribution forward to `Γ_k`, `k ≤ m`, through `γ ↦ γ|_k`.
    pub fn project(&self, params: LatticeParams, k: u32) -> CoarseProfile {
        let b = params.b();
        let target = path_count(params, k.min(self.m)).to_u64().unwrap() as usize;
        let mut buckets: Vec<SmallVec<[f64; 8]>> = vec![SmallVec::new(); target];
        for (code, &lp) in crate::lattice::enumerate_paths(params, self.m).zip(&self.log_probs) {
            buckets[code.restrict(k).rank(b) as usize].push(lp);
        }
        let w = buckets.iter().map(|v| log_sum_exp(v)).collect();
        CoarseProfile::from_log_weights(k.min(self.m), w)
    }
}

impl Polymer {
    fn check_enumeration(&self, m: u32) -> Result<()> {
        if m > DEFAULT_M_MAX {
            return Err(Error::BudgetExceeded {
                what: "coarse depth",
                needed: m as f64,
                budget: DEFAULT_M_MAX as f64,
            });
        }
        let size = log_path_count(self.params(), m).exp();
        if size > DEFAULT_ENUMERATION_BUDGET as f64 {
            return Err(Error::BudgetExceeded {
                what: "coarse path enumeration",
                needed: size,
                budget: DEFAULT_ENUMERATION_BUDGET as f64,
            });
        }
        Ok(())
    }

    /// `μ_n(γ|_m = ·)` for the environment of `seed`.
    pub fn coarse_marginal(&self, n: u32, m: u32, beta: f64, seed: u64) -> Result<CoarseProfile> {
        if m > n {
            return Err(Error::InvalidArgument(format!("coarse depth {m} exceeds n = {n}")));
        }
        Self::check_beta(beta)?;
        self.check_enumeration(m)?;
        self.check_budget(n)?;
        let env = self.environment(seed);
        Ok(self.coarse_marginal_in(&env, n, m, beta))
    }

    pub fn coarse_marginal_in<E: Environment>(&self, env: &E, n: u32, m: u32, beta: f64) -> CoarseProfile {
        let (b, s) = (self.params().b(), self.params().s());
        let rec = SiteRecursion::new(env, self.params(), self.model(), beta);
        let leaf = |edge: EdgeAddr| rec.log_z(edge, n - m);
        let site = |w: f64| beta * w;
        let w = coarse_weights(env, b, s, EdgeAddr::ROOT, m, &leaf, &site);
        CoarseProfile::from_log_weights(m, w)
    }

    /// Depth-`k` approximation of the infinite-volume measure on `Γ_n`:
    /// weights `e^{βH_n(g) − (s^n−1)λ(β)} Π_e W_k(e)`, every `W_∞` of the
    /// limit replaced by the depth-`k` martingale of its edge. This is
    /// `μ_{n+k}(γ|_n = ·)` on a shared environment, and `log_norm` is
    /// `log W_{n+k}` up to the constant `log |Γ_n|`.
    pub fn weak_disorder_prefix(&self, n: u32, k: u32, beta: f64, seed: u64) -> Result<CoarseProfile> {
        Self::check_beta(beta)?;
        self.check_enumeration(n)?;
        self.check_budget(n + k)?;
        let env = self.environment(seed);
        Ok(self.weak_disorder_prefix_in(&env, n, k, beta))
    }

    pub fn weak_disorder_prefix_in<E: Environment>(&self, env: &E, n: u32, k: u32, beta: f64) -> CoarseProfile {
        let (b, s) = (self.params().b(), self.params().s());
        let lambda = self.model().log_mgf(beta);
        let log_qz_k = self.log_annealed_z(k, beta);
        let rec = SiteRecursion::new(env, self.params(), self.model(), beta);
        let leaf = |edge: EdgeAddr| rec.log_z(edge, k) - log_qz_k;
        let site = |w: f64| beta * w - lambda;
        let w = coarse_weights(env, b, s, EdgeAddr::ROOT, n, &leaf, &site);
        CoarseProfile::from_log_weights(n, w)
    }
}

/// Log-weights of every coarse path below `edge`, in rank order.
fn coarse_weights<E, L, S>(env: &E, b: usize, s: usize, edge: EdgeAddr, coarse: u32, leaf: &L, site: &S) -> Vec<f64>
where
    E: Environment,
    L: Fn(EdgeAddr) -> f64,
    S: Fn(f64) -> f64,
{
    if coarse == 0 {
        return vec![leaf(edge)];
    }
    let mut sites = env.sites(edge);
    let mut out = Vec::new();
    for i in 0..b {
        let base: f64 = sites.by_ref().take(s - 1).map(site).sum();
        let subs: Vec<Vec<f64>> = (0..s)
            .map(|j| coarse_weights(env, b, s, edge.child(i, j, s), coarse - 1, leaf, site))
            .collect();
        // sub-edge codes as base-`len` digits, first sub-edge most significant
        let len = subs[0].len();
        for r in 0..len.pow(s as u32) {
            let mut rem = r;
            let mut acc = base;
            for sub in subs.iter().rev() {
                acc += sub[rem % len];
                rem /= len;
            }
            out.push(acc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderModel;
    use crate::lattice::enumerate_paths;
    use approx::assert_abs_diff_eq;

    fn polymer(b: usize, s: usize) -> Polymer {
        Polymer::new(LatticeParams::new(b, s).unwrap(), DisorderModel::Gaussian)
    }

    #[test]
    fn beta_zero_is_uniform() {
        let p = polymer(2, 3);
        let prof = p.coarse_marginal(4, 2, 0.0, 9).unwrap();
        let size = path_count(p.params(), 2).to_u64().unwrap() as f64;
        assert_eq!(prof.log_probs.len(), size as usize);
        assert_abs_diff_eq!(prof.mu_max, 1.0 / size, epsilon = 1e-12);
    }

    #[test]
    fn normalized_and_consistent_with_full_partition_function() {
        for (b, s) in [(2, 2), (3, 2), (2, 3)] {
            let p = polymer(b, s);
            for m in 0..=2 {
                let prof = p.coarse_marginal(4, m, 0.9, 77).unwrap();
                let total: f64 = prof.probabilities().iter().sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
                let z = p.quenched_log_z(4, 0.9, 77).unwrap().log_z;
                assert_abs_diff_eq!(prof.log_norm, z, epsilon = 1e-9 * z.abs());
            }
        }
    }

    #[test]
    fn coarse_order_matches_rank() {
        // with a leaf value that encodes the sub-edge address, each coarse
        // code must land at its rank
        let p = polymer(2, 2);
        let prof = p.coarse_marginal(3, 2, 1.0, 4).unwrap();
        let env = p.environment(4);
        let paths: Vec<_> = enumerate_paths(p.params(), 2).collect();
        let mut brute: Vec<f64> = Vec::new();
        for code in &paths {
            let mut h = 0.0;
            let mut sites = [0.0; 2];
            env.fill_sites(EdgeAddr::ROOT, &mut sites);
            let i = code.top().unwrap();
            h += sites[i];
            let mut leaves = 0.0;
            for j in 0..2 {
                let e = EdgeAddr::ROOT.child(i, j, 2);
                let mut sub = [0.0; 2];
                env.fill_sites(e, &mut sub);
                let c = code.sub(j)[0] as usize;
                h += sub[c];
                for jj in 0..2 {
                    leaves += p.edge_log_z_in(&env, e.child(c, jj, 2), 1, 1.0);
                }
            }
            brute.push(h + leaves);
        }
        let norm = log_sum_exp(&brute);
        for (r, w) in brute.iter().enumerate() {
            assert_abs_diff_eq!(prof.log_probs[r], w - norm, epsilon = 1e-10);
        }
    }

    #[test]
    fn weak_prefix_depth_zero_uses_site_energies_only() {
        let p = polymer(2, 2);
        let prof = p.weak_disorder_prefix(2, 0, 0.8, 5).unwrap();
        let coarse = p.coarse_marginal(2, 2, 0.8, 5).unwrap();
        for (a, b) in prof.log_probs.iter().zip(&coarse.log_probs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let uniform = p.weak_disorder_prefix(2, 3, 0.0, 5).unwrap();
        assert_abs_diff_eq!(uniform.mu_max, 1.0 / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn weak_prefix_equals_fine_marginal() {
        let p = polymer(3, 2);
        for k in 0..4 {
            let a = p.weak_disorder_prefix(2, k, 0.6, 31).unwrap();
            let b = p.coarse_marginal(2 + k, 2, 0.6, 31).unwrap();
            for (x, y) in a.log_probs.iter().zip(&b.log_probs) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn enumeration_guards() {
        let p = polymer(2, 2);
        assert!(p.coarse_marginal(3, 4, 1.0, 0).is_err());
        assert!(p.coarse_marginal(5, 4, 1.0, 0).is_err());
        let big = polymer(6, 3);
        assert!(matches!(big.coarse_marginal(3, 3, 1.0, 0), Err(Error::BudgetExceeded { .. })));
    }
}
