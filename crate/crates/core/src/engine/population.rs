//! Pool approximation of the law of `W_n`.
//!
//! `W_{n+1} = (1/b) Σ_i Π_j W_n^{(i,j)} Π_{j<s} A^{(i,j)}` in distribution,
//! with `A = e^{βω − λ(β)}`. A pool of `M` values stands in for the law at
//! each level; the next level resamples its `W_n` factors from the pool.
//! Cost is `n·M·b·s` regardless of depth, which is what makes depths far past
//! the exact recursion reachable. Pool members share ancestors, so they are
//! only approximately independent.
//!
//! Sampling error in the pool mean is raised to the power `s` at every level,
//! so each level is rescaled to unit empirical mean (`Q W_n = 1` exactly).

use rand::Rng;
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::counter::{derive, CounterRng};
use crate::disorder::DisorderModel;
use crate::error::{Error, Result};
use crate::lattice::LatticeParams;

use super::log_sum_exp;

/// `log W_n` for a pool of `pool` members after `n` levels.
pub fn log_w_population(
    params: LatticeParams,
    model: &DisorderModel,
    n: u32,
    beta: f64,
    pool: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if pool < 2 {
        return Err(Error::InvalidArgument("population needs at least 2 members".into()));
    }
    let (b, s) = (params.b(), params.s());
    let lambda = model.log_mgf(beta);
    let log_b = (b as f64).ln();
    let mut current = vec![0.0f64; pool];
    for level in 0..n {
        let level_key = derive(seed, level as u64);
        let prev = &current;
        current = (0..pool)
            .into_par_iter()
            .map(|k| {
                let mut rng = CounterRng::new(derive(level_key, k as u64));
                let mut branches: SmallVec<[f64; 16]> = SmallVec::with_capacity(b);
                for _ in 0..b {
                    let mut acc = 0.0;
                    for _ in 0..s {
                        acc += prev[rng.random_range(0..pool)];
                    }
                    for _ in 0..s - 1 {
                        acc += beta * model.sample(&mut rng) - lambda;
                    }
                    branches.push(acc);
                }
                log_sum_exp(&branches) - log_b
            })
            .collect::<Vec<f64>>();
        let log_mean = log_sum_exp(&current) - (pool as f64).ln();
        current.iter_mut().for_each(|x| *x -= log_mean);
    }
    Ok(current)
}
