//! One table builder per subcommand. Rows run over `beta` (outer) and `n`.

use rayon::prelude::*;

use diamond_core::analysis::{
    bounds_report, exact_chain, fractional_bound_sequence_log, log_strong_disorder_threshold,
    percolation_map_derivative, percolation_pc, percolation_variance_level, variance_iterate,
};
use diamond_core::estimators::{
    anti_concentration_width, bond_samples, concentration_bound, energy_mean, localization_statistic,
    mc_fractional_moment, mc_overlap, mc_variance_w, quenched_samples, RunSpec,
};
use diamond_core::lattice::expected_overlap;
use diamond_core::stats::{jackknife_variance, max_window_mass, mean};
use diamond_core::{Estimate, Polymer};

use crate::config::RunConfig;
use crate::output::{Cell, Table};
use crate::CliError;

pub const COMMANDS: &[&str] = &[
    "free-energy",
    "variance",
    "fractional",
    "bounds",
    "percolation",
    "fluctuations",
    "overlap",
    "localization",
    "weak-measure",
    "bond-model",
];

fn polymer(c: &RunConfig) -> Polymer {
    Polymer::new(c.params(), c.model.build().expect("validated")).with_site_budget(c.site_budget)
}

fn run_spec(c: &RunConfig) -> RunSpec {
    RunSpec::new(c.samples, c.seed).expect("validated")
}

fn grid(c: &RunConfig) -> impl Iterator<Item = (f64, u32)> + '_ {
    c.beta.iter().flat_map(move |&b| c.n.iter().map(move |&n| (b, n)))
}

fn s_pow(c: &RunConfig, n: u32) -> f64 {
    (c.s as f64).powi(n as i32)
}

/// Site visits of the whole run, `samples · Σ (bs)^n` over the grid.
pub fn planned_visits(c: &RunConfig) -> f64 {
    let p = polymer(c);
    let per_beta: f64 = c.n.iter().map(|&n| p.site_visits(n)).sum();
    per_beta * c.beta.len() as f64 * c.samples as f64
}

/// Fails with a budget error if any single sample is over the budget.
pub fn check_budget(c: &RunConfig) -> Result<(), CliError> {
    let p = polymer(c);
    let deepest = c.n.iter().copied().max().unwrap_or(0);
    let extra = if c.command == "weak-measure" { c.k } else { 0 };
    p.check_budget(deepest + extra).map_err(CliError::from)
}

pub fn run(c: &RunConfig) -> Result<Table, CliError> {
    match c.command.as_str() {
        "free-energy" => free_energy(c),
        "variance" => variance(c),
        "fractional" => fractional(c),
        "bounds" => bounds(c),
        "percolation" => percolation(c),
        "fluctuations" => fluctuations(c),
        "overlap" => overlap(c),
        "localization" => localization(c),
        "weak-measure" => weak_measure(c),
        "bond-model" => bond_model(c),
        other => Err(CliError::Config(format!("unknown subcommand `{other}`"))),
    }
}

fn est_cells(e: &Estimate) -> [Cell; 2] {
    [e.mean.into(), e.stderr.into()]
}

fn free_energy(c: &RunConfig) -> Result<Table, CliError> {
    let p = polymer(c);
    let mut t = Table::new(&["beta", "n", "mean", "stderr", "annealed", "gap", "gap_stderr", "exact"]);
    for (beta, n) in grid(c) {
        let q = quenched_samples(&p, n, beta, run_spec(c))?;
        let scale = s_pow(c, n);
        let fe = Estimate::from_samples(&q.iter().map(|x| x.log_z / scale).collect::<Vec<_>>(), c.seed);
        let gap = Estimate::from_samples(&q.iter().map(|x| -x.log_w / scale).collect::<Vec<_>>(), c.seed);
        let annealed = p.log_annealed_z(n, beta) / scale;
        let [m, se] = est_cells(&fe);
        let [g, gse] = est_cells(&gap);
        t.push(vec![beta.into(), n.into(), m, se, annealed.into(), g, gse, (beta == 0.0).then_some(annealed).into()]);
    }
    Ok(t)
}

fn variance(c: &RunConfig) -> Result<Table, CliError> {
    let p = polymer(c);
    let mut t = Table::new(&["beta", "n", "gamma", "v_recursion", "v_mc", "v_mc_stderr"]);
    for (beta, n) in grid(c) {
        let track = variance_iterate(c.params(), p.model(), beta, n);
        let e = mc_variance_w(&p, n, beta, run_spec(c))?;
        let [m, se] = est_cells(&e);
        t.push(vec![beta.into(), n.into(), p.model().gamma(beta).into(), track.v[n as usize].into(), m, se]);
    }
    Ok(t)
}

fn fractional(c: &RunConfig) -> Result<Table, CliError> {
    let p = polymer(c);
    let mut t = Table::new(&["beta", "theta", "n", "log_u_chain", "f_chain", "u_mc", "u_mc_stderr", "f_mc", "strong_chain"]);
    for &beta in &c.beta {
        let deepest = c.n.iter().copied().max().unwrap_or(0);
        let chain = exact_chain(c.params(), p.model(), c.theta, beta, deepest)?;
        let bounds = fractional_bound_sequence_log(c.params(), p.model(), c.theta, beta, &chain)?;
        let log_thr = log_strong_disorder_threshold(c.params(), p.model(), c.theta, beta)?;
        for &n in &c.n {
            let u = mc_fractional_moment(&p, n, beta, c.theta, run_spec(c))?;
            let f_mc = (u.mean.ln() - log_thr) / (c.theta * s_pow(c, n));
            let k = n as usize;
            t.push(vec![
                beta.into(),
                c.theta.into(),
                n.into(),
                chain[k].into(),
                bounds.f[k].into(),
                u.mean.into(),
                u.stderr.into(),
                f_mc.into(),
                bounds.strong[k].into(),
            ]);
        }
    }
    Ok(t)
}

fn bounds(c: &RunConfig) -> Result<Table, CliError> {
    let p = polymer(c);
    let mut t = Table::new(&[
        "beta",
        "theta",
        "n",
        "annealed",
        "gamma",
        "gamma_star",
        "beta2",
        "l2_region",
        "p_c",
        "iii_margin",
        "iv_margin",
        "inhomogeneous_margin",
        "f_n",
        "certifies_strong",
        "gap_lower",
        "gap_upper",
    ]);
    for (beta, n) in grid(c) {
        let r = bounds_report(c.params(), p.model(), beta, c.theta, n)?;
        let margin = |x: Option<diamond_core::analysis::Criterion>| Cell::from(x.map(|k| k.margin));
        t.push(vec![
            beta.into(),
            c.theta.into(),
            n.into(),
            r.annealed.into(),
            r.gamma.into(),
            r.gamma_star.into(),
            r.beta2.value.into(),
            r.beta2.l2_region.into(),
            r.p_c.into(),
            r.criteria.iii.margin.into(),
            margin(r.criteria.iv),
            margin(r.criteria.inhomogeneous),
            r.f_n.last().copied().into(),
            r.certifies_strong_disorder.into(),
            r.gap.map(|g| g.lower).into(),
            r.gap.map(|g| g.upper).into(),
        ]);
    }
    Ok(t)
}

fn percolation(c: &RunConfig) -> Result<Table, CliError> {
    let params = c.params();
    let pc = percolation_pc(params)?;
    let mut t = Table::new(&["b", "s", "p_c", "slope", "variance_level"]);
    t.push(vec![
        c.b.into(),
        c.s.into(),
        Cell::Fixed(pc, 12),
        percolation_map_derivative(params, pc).into(),
        percolation_variance_level(params)?.into(),
    ]);
    Ok(t)
}

fn fluctuations(c: &RunConfig) -> Result<Table, CliError> {
    let p = polymer(c);
    let gaussian = p.model().is_gaussian();
    let mut t = Table::new(&[
        "beta",
        "n",
        "var_log_z",
        "var_stderr",
        "window",
        "window_mass",
        "mass_cap",
        "tail_fraction",
        "tail_bound",
    ]);
    for (beta, n) in grid(c) {
        let log_z: Vec<f64> = quenched_samples(&p, n, beta, run_spec(c))?.iter().map(|q| q.log_z).collect();
        let (v, se) = jackknife_variance(&log_z);
        let width = anti_concentration_width(c.params(), n, c.eps);
        let (mass, cap) = if gaussian && beta > 0.0 {
            (Some(max_window_mass(&log_z, width)), Some(8.0 * c.eps / beta))
        } else {
            (None, None)
        };
        let m = mean(&log_z);
        let cut = s_pow(c, n) * c.tail_eps;
        let tail = log_z.iter().filter(|x| (*x - m).abs() > cut).count() as f64 / log_z.len() as f64;
        t.push(vec![
            beta.into(),
            n.into(),
            v.into(),
            se.into(),
            width.into(),
            mass.into(),
            cap.into(),
            tail.into(),
            concentration_bound(c.params(), n, c.tail_eps).into(),
        ]);
    }
    Ok(t)
}

fn overlap(c: &RunConfig) -> Result<Table, CliError> {
    let mut t = Table::new(&["n", "exact", "mc", "mc_stderr"]);
    for &n in &c.n {
        let e = mc_overlap(c.params(), n, run_spec(c))?;
        let [m, se] = est_cells(&e);
        t.push(vec![n.into(), expected_overlap(c.params(), n).into(), m, se]);
    }
    Ok(t)
}

fn localization(c: &RunConfig) -> Result<Table, CliError> {
    let p = polymer(c);
    let mut t = Table::new(&["beta", "n", "m", "mu_max", "stderr"]);
    for (beta, n) in grid(c) {
        let e = localization_statistic(&p, n, c.m, beta, run_spec(c))?;
        let [m, se] = est_cells(&e);
        t.push(vec![beta.into(), n.into(), c.m.into(), m, se]);
    }
    Ok(t)
}

fn weak_measure(c: &RunConfig) -> Result<Table, CliError> {
    let p = polymer(c);
    let run = run_spec(c);
    let mut t = Table::new(&["beta", "n", "k", "mu_max", "mu_max_stderr", "energy", "energy_stderr", "lambda_prime"]);
    for (beta, n) in grid(c) {
        // validates n, k and the budgets before the parallel loop
        p.weak_disorder_prefix(n, c.k, beta, run.seed_of(0))?;
        let mu: Vec<f64> = (0..c.samples)
            .into_par_iter()
            .map(|i| p.weak_disorder_prefix_in(&p.environment(run.seed_of(i)), n, c.k, beta).mu_max)
            .collect();
        let mu = Estimate::from_samples(&mu, c.seed);
        let energy = energy_mean(&p, n + c.k, beta, run)?;
        let [m, mse] = est_cells(&mu);
        let [e, ese] = est_cells(&energy);
        t.push(vec![beta.into(), n.into(), c.k.into(), m, mse, e, ese, p.model().log_mgf_d1(beta).into()]);
    }
    Ok(t)
}

fn bond_model(c: &RunConfig) -> Result<Table, CliError> {
    let p = polymer(c);
    let mut t = Table::new(&["beta", "n", "mean", "stderr", "annealed", "gap", "gap_stderr"]);
    for (beta, n) in grid(c) {
        let q = bond_samples(&p, n, beta, run_spec(c))?;
        let scale = s_pow(c, n);
        let fe = Estimate::from_samples(&q.iter().map(|x| x.log_z / scale).collect::<Vec<_>>(), c.seed);
        let gap = Estimate::from_samples(&q.iter().map(|x| -x.log_w / scale).collect::<Vec<_>>(), c.seed);
        let [m, se] = est_cells(&fe);
        let [g, gse] = est_cells(&gap);
        t.push(vec![beta.into(), n.into(), m, se, (p.log_annealed_z_bond(n, beta) / scale).into(), g, gse]);
    }
    Ok(t)
}
