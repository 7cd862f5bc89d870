//! Closed-form recursions, thresholds and rigorous bounds.
//!
//! Nothing here samples. Every quantity is an exact evaluation of a formula
//! or a scalar root found by bisection.

use serde::{Deserialize, Serialize};

use crate::disorder::{check_theta, DisorderModel, TiltSchedule};
use crate::error::{Error, Result};
use crate::lattice::LatticeParams;

/// Bisection tolerance on the bracket width.
pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_MAX_ITER: usize = 200;

/// Default `θ` for fractional moments.
pub const DEFAULT_THETA: f64 = 0.5;
/// Default constant in the homogeneous certificate depth.
pub const DEFAULT_C3: f64 = 3.0;
/// Default constant in the marginal certificate depth `⌈(c₄/β)²⌉`.
pub const DEFAULT_C4: f64 = 2.5;

/// Root of `f` in `[lo, hi]`, which must bracket a sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.signum() != fhi.signum()) || flo.is_nan() || fhi.is_nan() {
        return Err(Error::BracketFailure { lo, hi });
    }
    for _ in 0..ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ROOT_TOL {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `f(β) = λ(β) + log b/(s−1)`.
pub fn annealed_free_energy(params: LatticeParams, model: &DisorderModel, beta: f64) -> f64 {
    model.log_mgf(beta) + log_b_per_segment(params)
}

fn log_b_per_segment(params: LatticeParams) -> f64 {
    (params.b() as f64).ln() / (params.s() - 1) as f64
}

/// `v_0 = 0, …, v_n` of the second-moment recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTrack {
    pub v: Vec<f64>,
    /// The iteration overflowed and `v` stops early.
    pub diverged: bool,
}

/// Above this the track is cut off as divergent.
const VARIANCE_CAP: f64 = 1e250;

impl VarianceTrack {
    /// Smallest `n` with `v_n ≥ ε`.
    pub fn first_exceeding(&self, eps: f64) -> Option<u32> {
        self.v.iter().position(|&v| v >= eps).map(|i| i as u32)
    }

    /// Largest `n` with `v_n < level`, provided the track later reaches
    /// `level`; `None` if it never does within the track.
    pub fn last_below(&self, level: f64) -> Option<u32> {
        self.first_exceeding(level).map(|n| n.saturating_sub(1))
    }
}

/// One step `v ↦ (e^{(s−1)γ}(v+1)^s − 1)/b`.
pub fn variance_step(params: LatticeParams, gamma: f64, v: f64) -> f64 {
    let (b, s) = (params.b() as f64, params.s() as f64);
    // expm1 keeps small-β tracks accurate
    ((s - 1.0) * gamma + s * v.ln_1p()).exp_m1() / b
}

pub fn variance_iterate(params: LatticeParams, model: &DisorderModel, beta: f64, n: u32) -> VarianceTrack {
    let gamma = model.gamma(beta);
    let mut v = vec![0.0];
    let mut diverged = false;
    for _ in 0..n {
        let next = variance_step(params, gamma, *v.last().unwrap());
        if !next.is_finite() || next > VARIANCE_CAP {
            diverged = true;
            break;
        }
        v.push(next);
    }
    VarianceTrack { v, diverged }
}

/// Largest `γ` for which the variance map has a fixed point in `[0, ∞)`:
/// `(s/(s−1)) log(b/s) − log((b−1)/(s−1))` for `b > s`, and `0` otherwise
/// (for `b ≤ s` the tangency point is negative).
pub fn l2_threshold(params: LatticeParams) -> f64 {
    let (b, s) = (params.b() as f64, params.s() as f64);
    if b <= s {
        return 0.0;
    }
    s / (s - 1.0) * (b / s).ln() - ((b - 1.0) / (s - 1.0)).ln()
}

/// Tangency point `x*` of the variance map at `γ = γ*` (`b > s`).
pub fn l2_tangency_point(params: LatticeParams) -> Option<f64> {
    let (b, s) = (params.b() as f64, params.s() as f64);
    (b > s).then(|| (b - 1.0) * s / (b * (s - 1.0)) - 1.0)
}

/// Edge of the `L²` region in `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beta2 {
    /// `γ(β₂) = γ*`; `+∞` if `γ` never reaches `γ*`, `0` without an `L²`
    /// region.
    pub value: f64,
    /// Whether an `L²` region exists at all (`b > s`).
    pub l2_region: bool,
}

pub fn beta2(params: LatticeParams, model: &DisorderModel) -> Result<Beta2> {
    if params.b() <= params.s() {
        return Ok(Beta2 {
            value: 0.0,
            l2_region: false,
        });
    }
    let target = l2_threshold(params);
    let g = |beta: f64| model.gamma(beta) - target;
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(Beta2 {
                value: f64::INFINITY,
                l2_region: true,
            });
        }
    }
    Ok(Beta2 {
        value: bisect(g, 0.0, hi)?,
        l2_region: true,
    })
}

/// `F(x) = 1 − (1 − x^s)^b`: crossing probability of `D_1` made of `D_n`s.
pub fn percolation_map(params: LatticeParams, x: f64) -> f64 {
    1.0 - (1.0 - x.powi(params.s() as i32)).powi(params.b() as i32)
}

pub fn percolation_map_derivative(params: LatticeParams, x: f64) -> f64 {
    let (b, s) = (params.b() as i32, params.s() as i32);
    (b * s) as f64 * x.powi(s - 1) * (1.0 - x.powi(s)).powi(b - 1)
}

/// Unstable fixed point of [`percolation_map`] in `(0, 1)`.
pub fn percolation_pc(params: LatticeParams) -> Result<f64> {
    let pc = bisect(|x| percolation_map(params, x) - x, 1e-9, 1.0 - 1e-9)?;
    debug_assert!(percolation_map_derivative(params, pc) > 1.0);
    Ok(pc)
}

/// `log(a_θ^{-1} b^{(θ−1)/(s−1)})`: `u_n` below this certifies strong
/// disorder.
pub fn log_strong_disorder_threshold(params: LatticeParams, model: &DisorderModel, theta: f64, beta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(-model.log_a_theta(theta, beta) - (1.0 - theta) * log_b_per_segment(params))
}

/// `f_n` for each supplied `u_n` (index = `n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalBounds {
    pub f: Vec<f64>,
    /// `u_n` is below the strong-disorder threshold.
    pub strong: Vec<bool>,
    pub log_threshold: f64,
}

impl FractionalBounds {
    pub fn certifies_strong_disorder(&self) -> bool {
        self.strong.iter().any(|&x| x)
    }
}

pub fn fractional_bound_sequence(
    params: LatticeParams,
    model: &DisorderModel,
    theta: f64,
    beta: f64,
    u: &[f64],
) -> Result<FractionalBounds> {
    let log_u: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value > 0.0 && value.is_finite() {
                Ok(value.ln())
            } else {
                Err(Error::NonPositiveMoment { index, value })
            }
        })
        .collect::<Result<_>>()?;
    fractional_bound_sequence_log(params, model, theta, beta, &log_u)
}

/// As [`fractional_bound_sequence`] with `log u_n` supplied, for moments too
/// small to represent.
pub fn fractional_bound_sequence_log(
    params: LatticeParams,
    model: &DisorderModel,
    theta: f64,
    beta: f64,
    log_u: &[f64],
) -> Result<FractionalBounds> {
    let log_threshold = log_strong_disorder_threshold(params, model, theta, beta)?;
    let s = params.s() as f64;
    let mut f = Vec::with_capacity(log_u.len());
    let mut strong = Vec::with_capacity(log_u.len());
    for (n, &lu) in log_u.iter().enumerate() {
        if lu.is_nan() {
            return Err(Error::NonPositiveMoment { index: n, value: lu });
        }
        // log(a_θ b^{(1−θ)/(s−1)} u_n) = log u_n − log threshold
        f.push((lu - log_threshold) / (theta * s.powi(n as i32)));
        strong.push(lu < log_threshold);
    }
    Ok(FractionalBounds { f, strong, log_threshold })
}

/// `log u_n`, `n = 0..=depth`, of the chain `u_{n+1} = b^{1−θ} u_n^s a_θ^{s−1}`
/// from `u_0 = 1`.
pub fn exact_chain(params: LatticeParams, model: &DisorderModel, theta: f64, beta: f64, depth: u32) -> Result<Vec<f64>> {
    check_theta(theta)?;
    let (b, s) = (params.b() as f64, params.s() as f64);
    let log_a = model.log_a_theta(theta, beta);
    let mut out = vec![0.0];
    for _ in 0..depth {
        let last = *out.last().unwrap();
        out.push((1.0 - theta) * b.ln() + s * last + (s - 1.0) * log_a);
    }
    Ok(out)
}

/// One criterion with its signed margin (positive = satisfied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub holds: bool,
    pub margin: f64,
}

impl Criterion {
    fn from_margin(margin: f64) -> Self {
        Self { holds: margin > 0.0, margin }
    }
}

/// Sufficient conditions for strong disorder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongDisorderCriteria {
    /// `βλ′(β) − λ(β) > 2 log b/(s−1)`.
    pub iii: Criterion,
    /// Gaussian, `b > s`: `β²/2 > (b−s) log b/((b−1)(s−1))`.
    pub iv: Option<Criterion>,
    /// The optimized inhomogeneous tilt in its `n → ∞`, `θ → 1` limit,
    /// rescaled to the units of `iv`.
    pub inhomogeneous: Option<Criterion>,
}

pub fn strong_disorder_criteria(params: LatticeParams, model: &DisorderModel, beta: f64) -> StrongDisorderCriteria {
    let (b, s) = (params.b() as f64, params.s() as f64);
    let lb = log_b_per_segment(params);
    let entropy = beta * model.log_mgf_d1(beta) - model.log_mgf(beta);
    let iii = Criterion::from_margin(entropy - 2.0 * lb);
    let (iv, inhomogeneous) = if model.is_gaussian() && b > s {
        let iv = Criterion::from_margin(beta * beta / 2.0 - (b - s) * b.ln() / ((b - 1.0) * (s - 1.0)));
        // optimized tilt: limit exponent per unit (1−θ) as θ → 1 is
        // (β²/2)(s−1)/(b−s) + (βλ′ − λ) − log b/(s−1)
        let limit = beta * beta / 2.0 * (s - 1.0) / (b - s) + entropy - lb;
        let inh = Criterion::from_margin(limit * (b - s) / (b - 1.0));
        (Some(iv), Some(inh))
    } else {
        (None, None)
    };
    StrongDisorderCriteria { iii, iv, inhomogeneous }
}

fn require_gaussian(model: &DisorderModel, what: &'static str) -> Result<()> {
    if model.is_gaussian() {
        Ok(())
    } else {
        Err(Error::UnsupportedModel {
            required: what,
            model: model.name(),
        })
    }
}

/// Exponent of the Gaussian tilt bound on `u_n` for an arbitrary schedule:
/// `θ Σ_i (|V_i|δ_i²/(2(1−θ)) − β s^{i−1}(s−1)δ_i)`.
pub fn log_inhomogeneous_tilt_bound(
    params: LatticeParams,
    n: u32,
    beta: f64,
    theta: f64,
    schedule: &TiltSchedule,
) -> Result<f64> {
    check_theta(theta)?;
    check_schedule(schedule, n)?;
    let s = params.s() as f64;
    let mut acc = 0.0;
    for (i, &d) in schedule.shifts().iter().enumerate() {
        let i = i as u32 + 1;
        let vi = params.generation_size_f64(i);
        acc += vi * d * d / (2.0 * (1.0 - theta)) - beta * s.powi(i as i32 - 1) * (s - 1.0) * d;
    }
    Ok(theta * acc)
}

fn check_schedule(schedule: &TiltSchedule, n: u32) -> Result<()> {
    if schedule.len() != n as usize {
        return Err(Error::ScheduleLength {
            got: schedule.len(),
            expected: n as usize,
        });
    }
    Ok(())
}

pub fn inhomogeneous_tilt_bound(params: LatticeParams, n: u32, beta: f64, theta: f64, schedule: &TiltSchedule) -> Result<f64> {
    log_inhomogeneous_tilt_bound(params, n, beta, theta, schedule).map(f64::exp)
}

/// Exponent of the uniform-shift bound with `δ_n = (sb)^{−n/2}`:
/// `θ(|D_n∖{A,B}|δ_n²/(2(1−θ)) − (s^n−1)βδ_n)`.
pub fn log_homogeneous_tilt_bound(params: LatticeParams, n: u32, beta: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let (b, s) = (params.b() as f64, params.s() as f64);
    let delta = (s * b).powf(-(n as f64) / 2.0);
    let sites = params.lattice_size_f64(n);
    let path = s.powi(n as i32) - 1.0;
    Ok(theta * (sites * delta * delta / (2.0 * (1.0 - theta)) - path * beta * delta))
}

pub fn homogeneous_tilt_bound(params: LatticeParams, n: u32, beta: f64, theta: f64) -> Result<f64> {
    log_homogeneous_tilt_bound(params, n, beta, theta).map(f64::exp)
}

/// Tilt bound for a general law, tilting generation `i` by
/// `e^{−δ_iω − λ(−δ_i)}`: log-cost
/// `(1−θ)Σ|V_i|[λ(θδ_i/(1−θ)) + (θ/(1−θ))λ(−δ_i)]` plus log-gain
/// `θΣ(s−1)s^{i−1}[λ(β−δ_i) − λ(β) − λ(−δ_i)]`.
pub fn log_general_tilt_bound(
    params: LatticeParams,
    model: &DisorderModel,
    n: u32,
    beta: f64,
    theta: f64,
    schedule: &TiltSchedule,
) -> Result<f64> {
    check_theta(theta)?;
    check_schedule(schedule, n)?;
    let s = params.s() as f64;
    let lam = |x: f64| model.log_mgf(x);
    let (mut cost, mut gain) = (0.0, 0.0);
    for (i, &d) in schedule.shifts().iter().enumerate() {
        let i = i as u32 + 1;
        cost += params.generation_size_f64(i) * (lam(theta * d / (1.0 - theta)) + theta / (1.0 - theta) * lam(-d));
        gain += (s - 1.0) * s.powi(i as i32 - 1) * (lam(beta - d) - lam(beta) - lam(-d));
    }
    Ok((1.0 - theta) * cost + theta * gain)
}

/// `⌈2(|log β| + log c₃)/(log s − log b)⌉`, the depth at which the uniform
/// shift certifies strong disorder (`b < s`).
pub fn homogeneous_certificate_depth(params: LatticeParams, beta: f64, c3: f64) -> Result<u32> {
    let (b, s) = (params.b() as f64, params.s() as f64);
    if b >= s {
        return Err(Error::InvalidArgument("homogeneous certificate needs b < s".into()));
    }
    check_positive(beta, "beta")?;
    Ok((2.0 * (beta.ln().abs() + c3.ln()) / (s.ln() - b.ln())).ceil().max(1.0) as u32)
}

/// `⌈(c₄/β)²⌉`, the depth of the marginal (`b = s`) certificate.
pub fn marginal_certificate_depth(beta: f64, c4: f64) -> Result<u32> {
    check_positive(beta, "beta")?;
    Ok((c4 / beta).powi(2).ceil().max(1.0) as u32)
}

fn check_positive(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")))
    }
}

/// Level `v_n` must stay under for the percolation argument.
pub fn percolation_variance_level(params: LatticeParams) -> Result<f64> {
    Ok((1.0 - percolation_pc(params)?) / 4.0)
}

/// Two-sided bound on the free-energy gap `f(β) − p(β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBounds {
    pub lower: f64,
    pub upper: f64,
    /// Natural logs of the bounds, which underflow long before the depths do.
    pub log_lower: f64,
    pub log_upper: f64,
    /// Depth certifying the lower bound: `f_n ≤ −s^{−n}`.
    pub n_lower: Option<u32>,
    /// Depth used by the upper bound: the last `n` with `v_n < (1−p_c)/4`.
    pub n_upper: Option<u32>,
    /// `b > s` inside the `L²` region, where the gap vanishes.
    pub l2_region: bool,
}

/// Search limit for the certificate depth.
const GAP_MAX_DEPTH: u32 = 10_000_000;

/// Gap bounds for `b ≤ s`, Gaussian disorder, `0 ≤ β ≤ 1`.
///
/// Lower: the smallest `n` whose tilt bound `ū_n` gives
/// `log(a_θ b^{(1−θ)/(s−1)} ū_n) ≤ −θ`, i.e. `f_n ≤ −s^{−n}`, so
/// `f − p ≥ s^{−n}`; uniform shift for `b < s`, the `n^{−1/2}s^{−i}`
/// schedule for `b = s`. Upper: for every `n` with `v_n < (1−p_c)/4`,
/// `f − p ≤ s^{−n}(log 2 + λ(β))`; the largest such `n` is used.
pub fn gap_bounds(params: LatticeParams, model: &DisorderModel, beta: f64, theta: f64) -> Result<GapBounds> {
    require_gaussian(model, "Gaussian disorder")?;
    check_theta(theta)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("gap bounds need 0 <= beta <= 1, got {beta}")));
    }
    let (b, s) = (params.b(), params.s());
    if b > s {
        if model.gamma(beta) <= l2_threshold(params) {
            return Ok(GapBounds {
                lower: 0.0,
                upper: 0.0,
                log_lower: f64::NEG_INFINITY,
                log_upper: f64::NEG_INFINITY,
                n_lower: None,
                n_upper: None,
                l2_region: true,
            });
        }
        return Err(Error::InvalidArgument("gap bounds need b <= s outside the L2 region".into()));
    }
    let zero = GapBounds {
        lower: 0.0,
        upper: 0.0,
        log_lower: f64::NEG_INFINITY,
        log_upper: f64::NEG_INFINITY,
        n_lower: None,
        n_upper: None,
        l2_region: false,
    };
    if beta == 0.0 {
        return Ok(zero);
    }
    let ln_s = (s as f64).ln();

    let log_threshold = log_strong_disorder_threshold(params, model, theta, beta)?;
    let mut n_lower = None;
    for n in 1..=GAP_MAX_DEPTH {
        let bound = if b < s {
            log_homogeneous_tilt_bound(params, n, beta, theta)?
        } else {
            log_marginal_tilt_bound(params, n, beta, theta)
        };
        if bound - log_threshold <= -theta {
            n_lower = Some(n);
            break;
        }
    }

    let level = percolation_variance_level(params)?;
    let gamma = model.gamma(beta);
    let mut v = 0.0;
    let mut n_upper = None;
    for n in 0..GAP_MAX_DEPTH {
        let next = variance_step(params, gamma, v);
        if next >= level {
            n_upper = Some(n);
            break;
        }
        v = next;
    }

    let log_lower = n_lower.map_or(f64::NEG_INFINITY, |n| -(n as f64) * ln_s);
    let log_upper = n_upper.map_or(f64::INFINITY, |n| (2f64.ln() + model.log_mgf(beta)).ln() - n as f64 * ln_s);
    Ok(GapBounds {
        lower: log_lower.exp(),
        upper: log_upper.exp(),
        log_lower,
        log_upper,
        n_lower,
        n_upper,
        ..zero
    })
}

/// Closed form of the marginal-schedule exponent when `b = s`:
/// `Σ|V_i|δ_i² = (s−1)/s` and the gain sums to `β√n (s−1)/s`.
fn log_marginal_tilt_bound(params: LatticeParams, n: u32, beta: f64, theta: f64) -> f64 {
    let s = params.s() as f64;
    let k = (s - 1.0) / s;
    theta * (k / (2.0 * (1.0 - theta)) - beta * (n as f64).sqrt() * k)
}

/// Everything computable without sampling at one `(b, s, β, θ, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub b: usize,
    pub s: usize,
    pub beta: f64,
    pub theta: f64,
    pub n: u32,
    pub annealed: f64,
    pub gamma: f64,
    pub gamma_star: f64,
    pub beta2: Beta2,
    pub p_c: f64,
    pub criteria: StrongDisorderCriteria,
    /// `f_0..f_n` from the best tilt bound on `u_k` (capped at `u_k ≤ 1`).
    pub f_n: Vec<f64>,
    pub certifies_strong_disorder: bool,
    pub gap: Option<GapBounds>,
}

/// Tilt schedule used by the report at depth `n`.
fn report_schedule(params: LatticeParams, n: u32, theta: f64, beta: f64) -> TiltSchedule {
    let (b, s) = (params.b(), params.s());
    match b.cmp(&s) {
        std::cmp::Ordering::Less => TiltSchedule::homogeneous(b, s, n),
        std::cmp::Ordering::Equal => TiltSchedule::marginal(s, n),
        std::cmp::Ordering::Greater => TiltSchedule::optimized(b, n, theta, beta),
    }
}

pub fn bounds_report(params: LatticeParams, model: &DisorderModel, beta: f64, theta: f64, n: u32) -> Result<BoundsReport> {
    check_theta(theta)?;
    let mut log_u = vec![0.0];
    for k in 1..=n {
        let schedule = report_schedule(params, k, theta, beta);
        let bound = log_general_tilt_bound(params, model, k, beta, theta, &schedule)?;
        log_u.push(bound.min(0.0));
    }
    let fb = fractional_bound_sequence_log(params, model, theta, beta, &log_u)?;
    let gap = if model.is_gaussian() && (0.0..=1.0).contains(&beta) {
        gap_bounds(params, model, beta, theta).ok()
    } else {
        None
    };
    Ok(BoundsReport {
        b: params.b(),
        s: params.s(),
        beta,
        theta,
        n,
        annealed: annealed_free_energy(params, model, beta),
        gamma: model.gamma(beta),
        gamma_star: l2_threshold(params),
        beta2: beta2(params, model)?,
        p_c: percolation_pc(params)?,
        criteria: strong_disorder_criteria(params, model, beta),
        certifies_strong_disorder: fb.certifies_strong_disorder(),
        f_n: fb.f,
        gap,
    })
}
