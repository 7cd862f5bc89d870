//! Oracles that walk every path of a small lattice explicitly.

#![allow(dead_code)]

use diamond_core::counter::EdgeAddr;
use diamond_core::lattice::{enumerate_paths, LatticeParams};
use diamond_core::{DisorderModel, Environment};

pub fn models() -> Vec<DisorderModel> {
    vec![
        DisorderModel::Gaussian,
        DisorderModel::Uniform,
        DisorderModel::Bernoulli { p: 0.5 },
        DisorderModel::Bernoulli { p: 0.2 },
    ]
}

pub const SMALL_LATTICES: &[(usize, usize)] = &[(2, 2), (2, 3), (3, 2)];

/// Energy of the path whose choices are `code`, hanging below `edge`.
pub fn path_energy<E: Environment>(env: &E, s: usize, code: &[u8], edge: EdgeAddr, bond: bool) -> f64 {
    if code.is_empty() {
        return if bond { env.bond(edge) } else { 0.0 };
    }
    let i = code[0] as usize;
    let own: f64 = if bond {
        0.0
    } else {
        env.sites(edge).skip(i * (s - 1)).take(s - 1).sum()
    };
    let inner = (code.len() - 1) / s;
    own + (0..s)
        .map(|j| {
            let sub = &code[1 + j * inner..1 + (j + 1) * inner];
            path_energy(env, s, sub, edge.child(i, j, s), bond)
        })
        .sum::<f64>()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `β H_n(γ)` for every path, in rank order.
pub fn scaled_energies<E: Environment>(env: &E, params: LatticeParams, n: u32, beta: f64, bond: bool) -> Vec<f64> {
    enumerate_paths(params, n)
        .map(|p| beta * path_energy(env, params.s(), p.choices(), EdgeAddr::ROOT, bond))
        .collect()
}

pub fn enumerated_log_z<E: Environment>(env: &E, params: LatticeParams, n: u32, beta: f64, bond: bool) -> f64 {
    log_sum_exp(&scaled_energies(env, params, n, beta, bond))
}

/// `μ_n(γ|_m = g)` for every `g`, by summing path weights.
pub fn enumerated_marginal<E: Environment>(env: &E, params: LatticeParams, n: u32, m: u32, beta: f64) -> Vec<f64> {
    let w = scaled_energies(env, params, n, beta, false);
    let log_z = log_sum_exp(&w);
    let cells = params.b().pow(params.choices(m) as u32);
    let mut out = vec![0.0; cells];
    for (p, lw) in enumerate_paths(params, n).zip(&w) {
        out[p.restrict(m).rank(params.b()) as usize] += (lw - log_z).exp();
    }
    out
}
