//! End-to-end numerical checks.
//!
//! Each criterion runs at fixed parameters, sample counts and seeds, so its
//! outcome is reproducible; every tolerance is a constant below. Criterion 14
//! (byte-identical CLI output) needs the binary and lives with the CLI.

use std::fmt;
use std::time::Instant;

use crate::analysis::{
    annealed_free_energy, beta2, exact_chain, fractional_bound_sequence_log, log_inhomogeneous_tilt_bound,
    log_strong_disorder_threshold, marginal_certificate_depth, percolation_map, percolation_map_derivative,
    percolation_pc, variance_iterate, DEFAULT_C4,
};
use crate::counter::{derive, CounterRng, EdgeAddr};
use crate::disorder::{DisorderModel, TiltSchedule};
use crate::engine::{Environment, Polymer};
use crate::estimators::{
    anti_concentration_width, energy_mean, localization_statistic, mc_fractional_moment, mc_gap, mc_mean_w,
    mc_overlap, mc_variance_w, pool_fractional_moment, quenched_samples, RunSpec,
};
use crate::lattice::{expected_overlap, expected_overlap_limit, path_count, LatticeParams};
use crate::stats::{jackknife_variance, max_window_mass, ols_slope, wls_slope, Estimate};
use rand::Rng;

/// Master seed of the suite.
pub const SEED: u64 = 0x5EED_D1A4_0000_0001;
/// Standard errors allowed in every estimate-vs-target comparison.
pub const SIGMAS: f64 = 4.0;
/// Agreement of the recursion with path enumeration.
pub const ENUMERATION_TOL: f64 = 1e-9;
/// Agreement of `p_c(2,2)` with `(√5−1)/2`, and of `F(p_c)` with `p_c`.
pub const PC_TOL: f64 = 1e-10;
/// Absolute floor for the weak-disorder free-energy comparison.
pub const WEAK_FLOOR: f64 = 0.01;
/// Relative tolerance on the strong-disorder slope `2/α = 4`.
pub const SLOPE_REL_TOL: f64 = 0.2;
/// Consistency of nested weak-disorder prefix profiles.
pub const PREFIX_TOL: f64 = 1e-10;
/// Absolute floor for the energy law of large numbers.
pub const ENERGY_FLOOR: f64 = 0.02;
/// Level the localization statistic must pass at the deepest `n`.
pub const LOCALIZATION_LEVEL: f64 = 0.9;
/// Slack for the exact fractional-moment chain, relative to `max(1, |f_n|)`.
pub const CHAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// One entry per failed sub-check.
    pub failures: Vec<String>,
    pub seconds: f64,
    pub limit: Option<f64>,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let limit = self.limit.map(|l| format!(" / limit {l:.0} s")).unwrap_or_default();
        write!(
            f,
            "C{:02} {} {}: {} [{:.1} s{}]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds,
            limit
        )
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    /// Wall-clock limit in seconds.
    pub limit: Option<f64>,
    check: fn() -> Check,
}

pub const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "recursion vs path enumeration", limit: Some(10.0), check: c01_enumeration },
    Criterion { id: 2, name: "percolation fixed point", limit: Some(1.0), check: c02_percolation },
    Criterion { id: 3, name: "variance recursion vs Monte Carlo", limit: Some(120.0), check: c03_variance },
    Criterion { id: 4, name: "martingale normalization", limit: Some(60.0), check: c04_martingale },
    Criterion { id: 5, name: "weak-disorder free energy", limit: Some(300.0), check: c05_weak_disorder },
    Criterion { id: 6, name: "strong-disorder gap exponent", limit: Some(600.0), check: c06_strong_scaling },
    Criterion { id: 7, name: "marginal gap decay", limit: Some(600.0), check: c07_marginal },
    Criterion { id: 8, name: "fractional-moment monotonicity", limit: None, check: c08_fractional },
    Criterion { id: 9, name: "tilt-bound certificate", limit: None, check: c09_tilt_certificate },
    Criterion { id: 10, name: "overlap", limit: None, check: c10_overlap },
    Criterion { id: 11, name: "fluctuation growth", limit: None, check: c11_fluctuations },
    Criterion { id: 12, name: "localization trend", limit: None, check: c12_localization },
    Criterion { id: 13, name: "weak-disorder measure", limit: None, check: c13_weak_measure },
];

impl Criterion {
    pub fn run(&self) -> Outcome {
        let start = Instant::now();
        let check = (self.check)();
        let seconds = start.elapsed().as_secs_f64();
        let mut check = check;
        let in_time = self.limit.is_none_or(|l| seconds <= l);
        if !in_time {
            check.count += 1;
            check.failures.push(format!("over time limit ({seconds:.1} s)"));
        }
        let detail = check.summary();
        Outcome {
            id: self.id,
            name: self.name,
            passed: check.passed() && in_time,
            detail,
            failures: check.failures,
            seconds,
            limit: self.limit,
        }
    }
}

pub fn criterion(id: u8) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

/// Runs every criterion in order, handing each outcome to `report` as it
/// completes.
pub fn run_all(mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    CRITERIA
        .iter()
        .map(|c| {
            let o = c.run();
            report(&o);
            o
        })
        .collect()
}

#[derive(Default)]
struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
    count: usize,
}

impl Check {
    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.count += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn passed(&self) -> bool {
        self.failures.is_empty() && self.count > 0
    }

    fn summary(&self) -> String {
        let mut out = format!("{}/{} checks", self.count - self.failures.len(), self.count);
        if !self.notes.is_empty() {
            out.push_str("; ");
            out.push_str(&self.notes.join(", "));
        }
        if !self.failures.is_empty() {
            out.push_str("; failed: ");
            out.push_str(&self.failures.join("; "));
        }
        out
    }
}

fn lattice(b: usize, s: usize) -> LatticeParams {
    LatticeParams::new(b, s).expect("valid lattice")
}

fn gaussian(b: usize, s: usize) -> Polymer {
    Polymer::new(lattice(b, s), DisorderModel::Gaussian).with_site_budget(f64::INFINITY)
}

fn run(samples: usize, tag: u64) -> RunSpec {
    RunSpec::new(samples, derive(SEED, tag)).expect("at least two samples")
}

/// `|est − target|` in standard errors; infinite if the error bar is zero
/// and the values differ.
fn z_score(est: &Estimate, target: f64) -> f64 {
    let d = (est.mean - target).abs();
    if d == 0.0 {
        0.0
    } else {
        d / est.stderr
    }
}

fn stable_log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Energy of every path of the depth-`depth` lattice below `edge`, one entry
/// per path, listed explicitly.
fn path_energies<E: Environment>(env: &E, b: usize, s: usize, edge: EdgeAddr, depth: u32, bond: bool) -> Vec<f64> {
    if depth == 0 {
        return vec![if bond { env.bond(edge) } else { 0.0 }];
    }
    let sites: Vec<f64> = if bond {
        vec![0.0; b * (s - 1)]
    } else {
        env.sites(edge).take(b * (s - 1)).collect()
    };
    let mut out = Vec::new();
    for i in 0..b {
        let mut partial = vec![sites[i * (s - 1)..(i + 1) * (s - 1)].iter().sum::<f64>()];
        for j in 0..s {
            let sub = path_energies(env, b, s, edge.child(i, j, s), depth - 1, bond);
            partial = partial.iter().flat_map(|p| sub.iter().map(move |e| p + e)).collect();
        }
        out.extend(partial);
    }
    out
}

/// `log Z_n` by listing every path and its energy; the oracle for the
/// recursion on small lattices.
pub fn brute_force_log_z<E: Environment>(env: &E, params: LatticeParams, n: u32, beta: f64, bond: bool) -> f64 {
    let energies = path_energies(env, params.b(), params.s(), EdgeAddr::ROOT, n, bond);
    let scaled: Vec<f64> = energies.iter().map(|h| beta * h).collect();
    stable_log_sum_exp(&scaled)
}

/// Number of paths the enumeration lists, for cross-checking the path count.
pub fn brute_force_path_count<E: Environment>(env: &E, params: LatticeParams, n: u32) -> usize {
    path_energies(env, params.b(), params.s(), EdgeAddr::ROOT, n, false).len()
}

fn c01_enumeration() -> Check {
    let mut c = Check::default();
    let models = [DisorderModel::Gaussian, DisorderModel::Uniform, DisorderModel::Bernoulli { p: 0.3 }];
    let mut worst = 0.0f64;
    for (b, s) in [(2, 2), (2, 3), (3, 2)] {
        let params = lattice(b, s);
        for n in 1..=3 {
            for (mi, model) in models.iter().enumerate() {
                let polymer = Polymer::new(params, model.clone());
                for k in 0..100u64 {
                    let seed = derive(SEED, 1_000 + k);
                    let env = polymer.environment(seed);
                    let beta = 0.25 + 0.5 * (k % 4) as f64 + mi as f64 * 0.1;
                    if mi == 0 && k == 0 {
                        let listed = brute_force_path_count(&env, params, n) as u64;
                        c.require(path_count(params, n).to_u64() == Some(listed), || {
                            format!("({b},{s}) n={n}: enumeration lists {listed} paths")
                        });
                    }
                    for bond in [false, true] {
                        let fast = if bond {
                            polymer.bond_log_z_in(&env, n, beta)
                        } else {
                            polymer.log_z_in(&env, n, beta)
                        };
                        let slow = brute_force_log_z(&env, params, n, beta, bond);
                        let err = (fast - slow).abs() / slow.abs().max(1.0);
                        worst = worst.max(err);
                        c.require(err <= ENUMERATION_TOL, || {
                            format!("({b},{s}) n={n} {} bond={bond} seed {k}: {fast} vs {slow}", model.name())
                        });
                    }
                }
            }
        }
    }
    c.note(format!("worst relative error {worst:.1e}"));
    c
}

fn c02_percolation() -> Check {
    let mut c = Check::default();
    // 1−(1−x²)² − x = −x(x−1)(x²+x−1), so the interior root solves x²+x−1 = 0
    let root = (5f64.sqrt() - 1.0) / 2.0;
    let p22 = lattice(2, 2);
    for x in [0.1, 0.37, 0.9] {
        let poly = -x * (x - 1.0) * (x * x + x - 1.0);
        c.require((percolation_map(p22, x) - x - poly).abs() < 1e-14, || format!("factorization off at {x}"));
    }
    match percolation_pc(p22) {
        Ok(pc) => {
            c.require((pc - root).abs() <= PC_TOL, || format!("p_c(2,2) = {pc:.15}"));
            c.note(format!("p_c(2,2) = {pc:.12}"));
        }
        Err(e) => c.require(false, || format!("p_c(2,2): {e}")),
    }
    for b in 2..=4 {
        for s in 2..=4 {
            let params = lattice(b, s);
            match percolation_pc(params) {
                Ok(pc) => {
                    let fp = percolation_map(params, pc);
                    let slope = percolation_map_derivative(params, pc);
                    c.require((fp - pc).abs() <= PC_TOL && slope > 1.0, || {
                        format!("({b},{s}): F(p_c) − p_c = {:.1e}, F'(p_c) = {slope}", fp - pc)
                    });
                }
                Err(e) => c.require(false, || format!("({b},{s}): {e}")),
            }
        }
    }
    c
}

fn c03_variance() -> Check {
    let mut c = Check::default();
    let mut worst = 0.0f64;
    for (b, s) in [(2, 2), (4, 2), (2, 3)] {
        let p = gaussian(b, s);
        for beta in [0.1, 0.3] {
            let exact = variance_iterate(p.params(), p.model(), beta, 6);
            for n in 1..=6u32 {
                let est = mc_variance_w(&p, n, beta, run(10_000, 3_000 + n as u64)).expect("in budget");
                let v = exact.v[n as usize];
                let z = z_score(&est, v);
                worst = worst.max(z);
                c.require(z <= SIGMAS, || format!("({b},{s}) β={beta} n={n}: {:.5} ± {:.5} vs {v:.5}", est.mean, est.stderr));
            }
        }
    }
    c.note(format!("worst {worst:.2}σ"));
    c
}

fn c04_martingale() -> Check {
    let mut c = Check::default();
    for (b, s, beta, n) in [(4, 2, 0.3, 6), (2, 3, 0.5, 6)] {
        let est = mc_mean_w(&gaussian(b, s), n, beta, run(10_000, 4_000)).expect("in budget");
        let z = z_score(&est, 1.0);
        c.note(format!("({b},{s}) W̄ = {:.4} ± {:.4}", est.mean, est.stderr));
        c.require(z <= SIGMAS, || format!("({b},{s}) β={beta} n={n}: {z:.2}σ from 1"));
    }
    c
}

fn c05_weak_disorder() -> Check {
    let mut c = Check::default();
    let (beta, n) = (0.3, 10);
    let p = gaussian(4, 2);
    match beta2(p.params(), p.model()) {
        Ok(b2) => c.require(beta < b2.value, || format!("β = {beta} is not below β₂ = {}", b2.value)),
        Err(e) => c.require(false, || format!("β₂: {e}")),
    }
    let est = crate::estimators::mc_free_energy(&p, n, beta, run(12, 5_000)).expect("in budget");
    let target = (1.0 - 2f64.powi(-(n as i32))) * annealed_free_energy(p.params(), p.model(), beta);
    let diff = (est.mean - target).abs();
    c.note(format!("p̂_10 = {:.5} ± {:.1e}, target {target:.5}", est.mean, est.stderr));
    c.require(diff < (SIGMAS * est.stderr).max(WEAK_FLOOR), || format!("off by {diff:.4}"));
    c
}

fn c06_strong_scaling() -> Check {
    let mut c = Check::default();
    let p = gaussian(2, 4);
    let betas = [0.5, 0.35, 0.25];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, &beta) in betas.iter().enumerate() {
        let est = mc_gap(&p, 9, beta, run(24, 6_000 + k as u64)).expect("in budget");
        c.require(est.mean > SIGMAS * est.stderr, || format!("β={beta}: gap {:.2e} ± {:.1e} not positive", est.mean, est.stderr));
        x.push(beta.ln());
        y.push(est.mean.max(f64::MIN_POSITIVE).ln());
    }
    let (slope, _) = ols_slope(&x, &y);
    c.note(format!("slope {slope:.3}"));
    c.require((slope - 4.0).abs() <= SLOPE_REL_TOL * 4.0, || format!("slope {slope:.3} outside 4 ± 20%"));
    c
}

fn c07_marginal() -> Check {
    let mut c = Check::default();
    let p = gaussian(2, 2);
    let betas = [1.0, 0.8, 0.6];
    let gaps: Vec<Estimate> = betas
        .iter()
        .enumerate()
        .map(|(k, &beta)| mc_gap(&p, 10, beta, run(1_000, 7_000 + k as u64)).expect("in budget"))
        .collect();
    for (beta, g) in betas.iter().zip(&gaps) {
        c.require(g.mean > SIGMAS * g.stderr, || format!("β={beta}: gap {:.2e} ± {:.1e} not positive", g.mean, g.stderr));
    }
    // faster than β⁴ across the grid
    let ratio = gaps[0].mean / gaps[2].mean;
    let power = (betas[0] / betas[2]).powi(4);
    c.require(ratio > power, || format!("gap(1.0)/gap(0.6) = {ratio:.3} ≤ {power:.3}"));
    // local log-log slopes steepen as β falls, which no fixed power does
    let slope = |i: usize| (gaps[i].mean / gaps[i + 1].mean).ln() / (betas[i] / betas[i + 1]).ln();
    let (hi, lo) = (slope(0), slope(1));
    c.require(lo > hi, || format!("local slopes {hi:.3} then {lo:.3} do not steepen"));
    c.note(format!("ratio {ratio:.2} vs β⁴ ratio {power:.2}, local slopes {hi:.2} → {lo:.2}"));
    c
}

fn c08_fractional() -> Check {
    let mut c = Check::default();
    let models = [DisorderModel::Gaussian, DisorderModel::Uniform, DisorderModel::Bernoulli { p: 0.5 }];
    let mut rng = CounterRng::new(derive(SEED, 8_000));
    for _ in 0..20 {
        let params = lattice(rng.random_range(2..=6), rng.random_range(2..=6));
        let model = &models[rng.random_range(0..models.len())];
        let beta = rng.random_range(0.05..2.0);
        let theta = rng.random_range(0.05..0.95);
        let chain = exact_chain(params, model, theta, beta, 12).expect("θ in range");
        let f = fractional_bound_sequence_log(params, model, theta, beta, &chain).expect("finite chain").f;
        let ok = f.windows(2).all(|w| w[1] <= w[0] + CHAIN_TOL * w[0].abs().max(1.0));
        c.require(ok, || format!("({},{}) {} β={beta:.3} θ={theta:.3}: {f:?}", params.b(), params.s(), model.name()));
    }
    let (p, beta, theta) = (gaussian(2, 2), 1.0, 0.5);
    let log_thr = log_strong_disorder_threshold(p.params(), p.model(), theta, beta).expect("θ in range");
    let mut prev: Option<(f64, f64)> = None;
    for n in 0..=6u32 {
        let u = mc_fractional_moment(&p, n, beta, theta, run(10_000, 8_100)).expect("in budget");
        let scale = theta * 2f64.powi(n as i32);
        let f = (u.mean.ln() - log_thr) / scale;
        let se = u.stderr / (u.mean * scale);
        if let Some((fp, sp)) = prev {
            let slack = SIGMAS * (se * se + sp * sp).sqrt();
            c.require(f <= fp + slack, || format!("f̂_{n} = {f:.5} > f̂_{} = {fp:.5} + {slack:.1e}", n - 1));
        }
        prev = Some((f, se));
    }
    c
}

fn c09_tilt_certificate() -> Check {
    let mut c = Check::default();
    let (p, theta) = (gaussian(2, 2), 0.5);
    for beta in [0.5, 1.0] {
        let n = match marginal_certificate_depth(beta, DEFAULT_C4) {
            Ok(n) => n,
            Err(e) => {
                c.require(false, || format!("β={beta}: {e}"));
                continue;
            }
        };
        let schedule = TiltSchedule::marginal(2, n);
        let log_bound = log_inhomogeneous_tilt_bound(p.params(), n, beta, theta, &schedule).expect("matching schedule");
        let log_thr = log_strong_disorder_threshold(p.params(), p.model(), theta, beta).expect("θ in range");
        c.require(log_bound < log_thr, || format!("β={beta} n={n}: log ū = {log_bound:.4} ≥ threshold {log_thr:.4}"));
        // exact recursion where it fits, the pool beyond that
        let u = if p.site_visits(n) <= 1e6 {
            mc_fractional_moment(&p, n, beta, theta, run(4_000, 9_000))
        } else {
            pool_fractional_moment(p.params(), p.model(), n, beta, theta, 200_000, derive(SEED, 9_001))
        }
        .expect("in budget");
        let bound = log_bound.exp();
        c.note(format!("β={beta}: n={n}, ū = {bound:.4}, û = {:.4} ± {:.1e}", u.mean, u.stderr));
        c.require(bound >= u.mean - SIGMAS * u.stderr, || format!("β={beta}: bound {bound:.4} below estimate {:.4}", u.mean));
    }
    c
}

fn c10_overlap() -> Check {
    let mut c = Check::default();
    let mut worst = 0.0f64;
    for (b, s) in [(2, 2), (2, 3), (4, 2)] {
        let params = lattice(b, s);
        for n in 1..=6u32 {
            let est = mc_overlap(params, n, run(100_000, 10_000 + n as u64)).expect("enough pairs");
            let z = z_score(&est, expected_overlap(params, n));
            worst = worst.max(z);
            c.require(z <= SIGMAS, || format!("({b},{s}) n={n}: {:.4} vs {:.4}", est.mean, expected_overlap(params, n)));
        }
    }
    c.note(format!("worst {worst:.2}σ"));
    // b < s: geometric growth at rate s/b
    let p23 = lattice(2, 3);
    let r = expected_overlap(p23, 41) / expected_overlap(p23, 40);
    c.require((r - 1.5).abs() < 1e-6, || format!("(2,3) growth ratio {r}"));
    // b = s: linear growth
    let p22 = lattice(2, 2);
    let r = expected_overlap(p22, 80) / expected_overlap(p22, 40);
    c.require((r - 2.0).abs() < 1e-12, || format!("(2,2) O_80/O_40 = {r}"));
    // b > s: convergence to (s−1)/(b−s)
    let p42 = lattice(4, 2);
    let limit = expected_overlap_limit(p42).expect("b > s");
    let r = expected_overlap(p42, 60) / limit;
    c.require((r - 1.0).abs() < 1e-12, || format!("(4,2) O_60/limit = {r}"));
    c
}

fn c11_fluctuations() -> Check {
    let mut c = Check::default();
    let (beta, eps) = (1.0, 0.05);
    let p = gaussian(2, 4);
    let mut vars = Vec::new();
    for n in 4..=8u32 {
        let samples = quenched_samples(&p, n, beta, run(500, 11_000)).expect("in budget");
        let log_z: Vec<f64> = samples.iter().map(|q| q.log_z).collect();
        vars.push(jackknife_variance(&log_z));
        if n == 8 {
            let mass = max_window_mass(&log_z, anti_concentration_width(p.params(), n, eps));
            let cap = 8.0 * eps / beta;
            let sigma = (cap * (1.0 - cap) / log_z.len() as f64).sqrt();
            c.note(format!("window mass {mass:.3} vs {cap}"));
            c.require(mass <= cap + SIGMAS * sigma, || format!("window mass {mass:.3} above {cap} + 4σ"));
        }
    }
    for (k, w) in vars.windows(2).enumerate() {
        let ((v0, s0), (v1, s1)) = (w[0], w[1]);
        let r = v1 / v0;
        let sr = r * ((s0 / v0).powi(2) + (s1 / v1).powi(2)).sqrt();
        c.require(r >= 2.0 - SIGMAS * sr, || format!("(2,4) Var ratio n={}→{}: {r:.3} ± {sr:.3}", k + 4, k + 5));
    }
    let p = gaussian(2, 2);
    let (mut ns, mut vs, mut ses) = (Vec::new(), Vec::new(), Vec::new());
    for n in 4..=10u32 {
        let samples = quenched_samples(&p, n, beta, run(1_000, 11_100)).expect("in budget");
        let (v, se) = jackknife_variance(&samples.iter().map(|q| q.log_z).collect::<Vec<_>>());
        ns.push(n as f64);
        vs.push(v);
        ses.push(se);
    }
    let (slope, se) = wls_slope(&ns, &vs, &ses);
    c.note(format!("(2,2) Var slope {slope:.2} ± {se:.2}"));
    c.require(slope > SIGMAS * se, || format!("(2,2) Var(log Z_n) slope {slope:.3} ± {se:.3}"));
    // at least linear: exponent of Var in n is ≥ 1
    let log_n: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let log_v: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let rel: Vec<f64> = ses.iter().zip(&vs).map(|(se, v)| se / v).collect();
    let (exponent, ese) = wls_slope(&log_n, &log_v, &rel);
    c.note(format!("exponent {exponent:.2} ± {ese:.2}"));
    c.require(exponent >= 1.0 - SIGMAS * ese, || format!("(2,2) Var(log Z_n) ~ n^{exponent:.2} ± {ese:.2}"));
    c
}

fn c12_localization() -> Check {
    let mut c = Check::default();
    let p = gaussian(2, 2);
    let ns = [2u32, 4, 6, 8];
    let mus: Vec<f64> = ns
        .iter()
        .map(|&n| localization_statistic(&p, n, 1, 1.0, run(1_000, 12_000)).expect("in budget").mean)
        .collect();
    c.note(format!("μ_max {mus:.3?}"));
    c.require(mus.windows(2).all(|w| w[1] > w[0]), || "not increasing".into());
    let last = *mus.last().unwrap();
    c.require(last > LOCALIZATION_LEVEL, || format!("μ_max(8) = {last:.4}"));
    c
}

fn c13_weak_measure() -> Check {
    let mut c = Check::default();
    let mut worst = 0.0f64;
    for (b, s) in [(2, 2), (3, 2), (2, 3)] {
        let p = gaussian(b, s);
        for k in 0..5u64 {
            let env = p.environment(derive(SEED, 13_000 + k));
            for (n, depth) in [(1u32, 3u32), (2, 3), (2, 4)] {
                let coarse = p.weak_disorder_prefix_in(&env, n, depth, 0.4);
                let fine = p.weak_disorder_prefix_in(&env, n + 1, depth - 1, 0.4).project(p.params(), n);
                let err = coarse
                    .probabilities()
                    .iter()
                    .zip(fine.probabilities())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(err);
                c.require(err <= PREFIX_TOL, || format!("({b},{s}) n={n}: prefix mismatch {err:.1e}"));
            }
        }
    }
    c.note(format!("prefix mismatch ≤ {worst:.1e}"));
    let p = gaussian(4, 2);
    let beta = 0.2;
    let est = energy_mean(&p, 8, beta, run(50, 13_100)).expect("in budget");
    let target = p.model().log_mgf_d1(beta);
    let diff = (est.mean - target).abs();
    c.note(format!("energy {:.4} ± {:.1e} vs λ' = {target}", est.mean, est.stderr));
    c.require(diff <= (SIGMAS * est.stderr).max(ENERGY_FLOOR), || format!("energy off by {diff:.4}"));
    c
}
