//! Monte Carlo drivers with error bars.
//!
//! Sample `k` of a run uses the environment of `sample_seed(seed, k)`.
//! Samples are computed in parallel on the current rayon pool and collected
//! in index order, and every reduction is sequential, so results do not
//! depend on the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_THETA;
use crate::counter::{sample_seed, CounterRng};
use crate::disorder::{check_theta, DisorderModel};
use crate::engine::{log_w_population, Polymer, QuenchedSample};
use crate::error::{Error, Result};
use crate::lattice::{overlap, sample_uniform_path, LatticeParams};
use crate::stats::{jackknife_variance, max_window_mass, mean, skewness, Estimate};

/// Sample count and master seed of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSpec {
    pub samples: usize,
    pub seed: u64,
}

impl RunSpec {
    pub fn new(samples: usize, seed: u64) -> Result<Self> {
        if samples < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 samples, got {samples}")));
        }
        Ok(Self { samples, seed })
    }

    pub fn seed_of(&self, k: usize) -> u64 {
        sample_seed(self.seed, k as u64)
    }

    fn map<T: Send, F: Fn(u64) -> T + Sync>(&self, f: F) -> Vec<T> {
        (0..self.samples).into_par_iter().map(|k| f(self.seed_of(k))).collect()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must be finite and >= 0, got {beta}")))
    }
}

/// Independent quenched samples, in index order.
pub fn quenched_samples(polymer: &Polymer, n: u32, beta: f64, run: RunSpec) -> Result<Vec<QuenchedSample>> {
    check_beta(beta)?;
    polymer.check_budget(n)?;
    Ok(run.map(|seed| polymer.sample_unchecked(n, beta, seed)))
}

/// Bond-disorder counterpart of [`quenched_samples`].
pub fn bond_samples(polymer: &Polymer, n: u32, beta: f64, run: RunSpec) -> Result<Vec<QuenchedSample>> {
    check_beta(beta)?;
    polymer.check_budget(n)?;
    Ok(run.map(|seed| polymer.bond_quenched_log_z(n, beta, seed).expect("checked above")))
}

fn s_pow(polymer: &Polymer, n: u32) -> f64 {
    (polymer.params().s() as f64).powi(n as i32)
}

/// `(1/s^n) log Z_n`.
pub fn mc_free_energy(polymer: &Polymer, n: u32, beta: f64, run: RunSpec) -> Result<Estimate> {
    let scale = s_pow(polymer, n);
    let xs: Vec<f64> = quenched_samples(polymer, n, beta, run)?.iter().map(|q| q.log_z / scale).collect();
    Ok(Estimate::from_samples(&xs, run.seed))
}

/// `(1/s^n) log Z_n` of the bond-disorder model.
pub fn mc_bond_free_energy(polymer: &Polymer, n: u32, beta: f64, run: RunSpec) -> Result<Estimate> {
    let scale = s_pow(polymer, n);
    let xs: Vec<f64> = bond_samples(polymer, n, beta, run)?.iter().map(|q| q.log_z / scale).collect();
    Ok(Estimate::from_samples(&xs, run.seed))
}

/// Free-energy gap at depth `n`: `−s^{−n} log W_n`, i.e. the finite-volume
/// annealed free energy minus `(1/s^n) log Z_n`.
pub fn mc_gap(polymer: &Polymer, n: u32, beta: f64, run: RunSpec) -> Result<Estimate> {
    let scale = s_pow(polymer, n);
    let xs: Vec<f64> = quenched_samples(polymer, n, beta, run)?.iter().map(|q| -q.log_w / scale).collect();
    Ok(Estimate::from_samples(&xs, run.seed))
}

/// Mean of `W_n`, which the martingale property pins at 1; `extra.skew`
/// reports how heavy the upper tail is.
pub fn mc_mean_w(polymer: &Polymer, n: u32, beta: f64, run: RunSpec) -> Result<Estimate> {
    let w: Vec<f64> = quenched_samples(polymer, n, beta, run)?.iter().map(|q| q.log_w.exp()).collect();
    let skew = skewness(&w);
    Ok(Estimate::from_samples(&w, run.seed).with("skew", skew))
}

/// Sample variance of `W_n`, jackknife standard error.
pub fn mc_variance_w(polymer: &Polymer, n: u32, beta: f64, run: RunSpec) -> Result<Estimate> {
    let w: Vec<f64> = quenched_samples(polymer, n, beta, run)?.iter().map(|q| q.log_w.exp()).collect();
    Ok(variance_estimate(&w, run.seed))
}

fn variance_estimate(xs: &[f64], seed: u64) -> Estimate {
    let (var, se) = jackknife_variance(xs);
    Estimate {
        mean: var,
        stderr: se,
        n_samples: xs.len(),
        seed,
        extra: Default::default(),
    }
}

/// `u_n = Q W_n^θ`.
pub fn mc_fractional_moment(polymer: &Polymer, n: u32, beta: f64, theta: f64, run: RunSpec) -> Result<Estimate> {
    check_theta(theta)?;
    let xs: Vec<f64> = quenched_samples(polymer, n, beta, run)?.iter().map(|q| (theta * q.log_w).exp()).collect();
    Ok(Estimate::from_samples(&xs, run.seed))
}

/// `u_n` from the pool approximation, for depths out of exact reach. The
/// error bar treats pool members as independent, which they are not quite.
pub fn pool_fractional_moment(
    params: LatticeParams,
    model: &DisorderModel,
    n: u32,
    beta: f64,
    theta: f64,
    pool: usize,
    seed: u64,
) -> Result<Estimate> {
    check_theta(theta)?;
    check_beta(beta)?;
    let xs: Vec<f64> = log_w_population(params, model, n, beta, pool, seed)?
        .iter()
        .map(|lw| (theta * lw).exp())
        .collect();
    Ok(Estimate::from_samples(&xs, seed))
}

/// Sample variance of `log Z_n`, jackknife standard error.
pub fn mc_var_log_z(polymer: &Polymer, n: u32, beta: f64, run: RunSpec) -> Result<Estimate> {
    let xs: Vec<f64> = quenched_samples(polymer, n, beta, run)?.iter().map(|q| q.log_z).collect();
    Ok(variance_estimate(&xs, run.seed))
}

/// Window width for the anti-concentration scan: `ε(s/b)^{n/2}` for `b < s`,
/// `ε√n` for `b = s`, and `ε` otherwise.
pub fn anti_concentration_width(params: LatticeParams, n: u32, eps: f64) -> f64 {
    let (b, s) = (params.b() as f64, params.s() as f64);
    match params.b().cmp(&params.s()) {
        std::cmp::Ordering::Less => eps * (s / b).powf(n as f64 / 2.0),
        std::cmp::Ordering::Equal => eps * (n as f64).sqrt(),
        std::cmp::Ordering::Greater => eps,
    }
}

/// Largest fraction of `log Z_n` samples in any window of width
/// [`anti_concentration_width`].
pub fn anti_concentration(polymer: &Polymer, n: u32, beta: f64, eps: f64, run: RunSpec) -> Result<f64> {
    if !polymer.model().is_gaussian() {
        return Err(Error::UnsupportedModel {
            required: "Gaussian disorder",
            model: polymer.model().name(),
        });
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let xs: Vec<f64> = quenched_samples(polymer, n, beta, run)?.iter().map(|q| q.log_z).collect();
    Ok(max_window_mass(&xs, anti_concentration_width(polymer.params(), n, eps)))
}

/// `exp(−ε^{2/3} s^{n/3}/4)`.
pub fn concentration_bound(params: LatticeParams, n: u32, eps: f64) -> f64 {
    (-eps.powf(2.0 / 3.0) * (params.s() as f64).powf(n as f64 / 3.0) / 4.0).exp()
}

/// Fraction of samples with `|log Z_n − mean| > s^n ε`.
pub fn concentration_check(polymer: &Polymer, n: u32, beta: f64, eps: f64, run: RunSpec) -> Result<f64> {
    let xs: Vec<f64> = quenched_samples(polymer, n, beta, run)?.iter().map(|q| q.log_z).collect();
    let m = mean(&xs);
    let cut = s_pow(polymer, n) * eps;
    Ok(xs.iter().filter(|x| (*x - m).abs() > cut).count() as f64 / xs.len() as f64)
}

/// Step of the centered difference in [`energy_mean`].
pub const ENERGY_STEP: f64 = 1e-4;

/// `(1/s^n) μ_n(H_n) = (1/s^n) ∂_β log Z_n`, by a centered difference on a
/// shared environment.
pub fn energy_mean(polymer: &Polymer, n: u32, beta: f64, run: RunSpec) -> Result<Estimate> {
    check_beta(beta)?;
    polymer.check_budget(n)?;
    let scale = s_pow(polymer, n);
    let h = ENERGY_STEP;
    let xs = run.map(|seed| {
        let env = polymer.environment(seed);
        let up = polymer.log_z_in(&env, n, beta + h);
        let down = polymer.log_z_in(&env, n, beta - h);
        (up - down) / (2.0 * h * scale)
    });
    Ok(Estimate::from_samples(&xs, run.seed))
}

/// Mean of `sup_g μ_n(γ|_m = g)` over environments.
pub fn localization_statistic(polymer: &Polymer, n: u32, m: u32, beta: f64, run: RunSpec) -> Result<Estimate> {
    // validates m, n, β and the budgets once
    polymer.coarse_marginal(n, m, beta, run.seed_of(0))?;
    let xs = run.map(|seed| {
        let env = polymer.environment(seed);
        polymer.coarse_marginal_in(&env, n, m, beta).mu_max
    });
    Ok(Estimate::from_samples(&xs, run.seed))
}

/// Mean overlap of two independent uniform paths.
pub fn mc_overlap(params: LatticeParams, n: u32, run: RunSpec) -> Result<Estimate> {
    let xs = run.map(|seed| {
        let mut rng = CounterRng::new(seed);
        let a = sample_uniform_path(params, n, &mut rng);
        let b = sample_uniform_path(params, n, &mut rng);
        overlap(&a, &b).expect("equal depths") as f64
    });
    Ok(Estimate::from_samples(&xs, run.seed))
}

/// Axis of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Beta(Vec<f64>),
    N(Vec<u32>),
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Beta(_) => "beta",
            Axis::N(_) => "n",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::Beta(v) => v.clone(),
            Axis::N(v) => v.iter().map(|&n| n as f64).collect(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Axis::Beta(v) => v.len(),
            Axis::N(v) => v.len(),
        }
    }
}

/// A sweep: one estimator over a grid of `β` or `n`, the other held fixed.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub polymer: Polymer,
    pub axis: Axis,
    pub beta: f64,
    pub n: u32,
    pub theta: f64,
    pub m: u32,
    pub run: RunSpec,
}

impl SweepSpec {
    pub fn new(polymer: Polymer, axis: Axis, run: RunSpec) -> Self {
        Self {
            polymer,
            axis,
            beta: 0.0,
            n: 0,
            theta: DEFAULT_THETA,
            m: 1,
            run,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub estimator: String,
    pub axis_name: String,
    pub axis: Vec<f64>,
    pub estimates: Vec<Estimate>,
    pub b: usize,
    pub s: usize,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// Estimators reachable by name from [`sweep`].
pub const ESTIMATORS: &[&str] = &[
    "free-energy",
    "gap",
    "bond-free-energy",
    "mean-w",
    "variance-w",
    "fractional-moment",
    "var-log-z",
    "energy",
    "localization",
];

pub fn sweep(spec: &SweepSpec, estimator: &str) -> Result<SweepResult> {
    if !ESTIMATORS.contains(&estimator) {
        return Err(Error::UnknownEstimator(estimator.to_string()));
    }
    if spec.axis.len() == 0 {
        return Err(Error::InvalidArgument("sweep axis is empty".into()));
    }
    let points: Vec<(u32, f64)> = match &spec.axis {
        Axis::Beta(bs) => bs.iter().map(|&b| (spec.n, b)).collect(),
        Axis::N(ns) => ns.iter().map(|&n| (n, spec.beta)).collect(),
    };
    let p = &spec.polymer;
    let estimates = points
        .iter()
        .map(|&(n, beta)| match estimator {
            "free-energy" => mc_free_energy(p, n, beta, spec.run),
            "gap" => mc_gap(p, n, beta, spec.run),
            "bond-free-energy" => mc_bond_free_energy(p, n, beta, spec.run),
            "mean-w" => mc_mean_w(p, n, beta, spec.run),
            "variance-w" => mc_variance_w(p, n, beta, spec.run),
            "fractional-moment" => mc_fractional_moment(p, n, beta, spec.theta, spec.run),
            "var-log-z" => mc_var_log_z(p, n, beta, spec.run),
            "energy" => energy_mean(p, n, beta, spec.run),
            "localization" => localization_statistic(p, n, spec.m, beta, spec.run),
            _ => unreachable!(),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        estimator: estimator.to_string(),
        axis_name: spec.axis.name().to_string(),
        axis: spec.axis.values(),
        estimates,
        b: p.params().b(),
        s: p.params().s(),
        model: p.model().name(),
        theta: (estimator == "fractional-moment").then_some(spec.theta),
    })
}
