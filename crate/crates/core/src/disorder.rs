//! Site disorder laws.
//!
//! Each law is centered with unit variance and comes with its exact
//! log-moment generating function `λ(β) = log Q e^{βω}` and the first two
//! derivatives, a sampler, and a sampler for the exponentially tilted law
//! `dQ̃/dQ ∝ e^{−δω}`. Positive `δ` lowers the environment.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type SampleFn = Arc<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>;
type TiltFn = Arc<dyn Fn(&mut dyn RngCore, f64) -> f64 + Send + Sync>;

/// User-supplied law. The bound formulas evaluate `log_mgf` exactly, so it
/// must be the true log-MGF of what `sample` draws.
#[derive(Clone)]
pub struct CustomLaw {
    pub name: String,
    pub log_mgf: ScalarFn,
    pub log_mgf_d1: ScalarFn,
    pub log_mgf_d2: ScalarFn,
    pub sample: SampleFn,
    pub tilted_sample: Option<TiltFn>,
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum DisorderModel {
    Gaussian,
    /// `ω = (X − p)/√(p(1−p))` with `X ~ Bernoulli(p)`; `p = 1/2` gives ±1.
    Bernoulli { p: f64 },
    /// Uniform on `[−√3, √3]`.
    Uniform,
    Custom(CustomLaw),
}

/// Serializable description of a built-in model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Gaussian,
    Bernoulli { p: f64 },
    Uniform,
}

impl ModelSpec {
    pub fn build(self) -> Result<DisorderModel> {
        match self {
            ModelSpec::Gaussian => Ok(DisorderModel::Gaussian),
            ModelSpec::Bernoulli { p } => DisorderModel::bernoulli(p),
            ModelSpec::Uniform => Ok(DisorderModel::Uniform),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Gaussian => write!(f, "gaussian"),
            ModelSpec::Bernoulli { p } => write!(f, "bernoulli:{p}"),
            ModelSpec::Uniform => write!(f, "uniform"),
        }
    }
}

/// Accepts `gaussian`, `uniform`, `bernoulli` (p = 1/2), `bernoulli:<p>`.
impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim().to_ascii_lowercase();
        let (kind, arg) = match t.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (t.as_str(), None),
        };
        let spec = match (kind, arg) {
            ("gaussian" | "normal", None) => ModelSpec::Gaussian,
            ("uniform", None) => ModelSpec::Uniform,
            ("bernoulli", None) => ModelSpec::Bernoulli { p: 0.5 },
            ("bernoulli", Some(a)) => {
                let a = a.strip_prefix("p=").unwrap_or(a);
                let p = a
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad bernoulli parameter `{a}`")))?;
                ModelSpec::Bernoulli { p }
            }
            _ => return Err(Error::InvalidArgument(format!("unknown disorder model `{text}`"))),
        };
        spec.build()?;
        Ok(spec)
    }
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl DisorderModel {
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "bernoulli parameter must lie in (0, 1), got {p}"
            )));
        }
        Ok(DisorderModel::Bernoulli { p })
    }

    pub fn spec(&self) -> Option<ModelSpec> {
        match *self {
            DisorderModel::Gaussian => Some(ModelSpec::Gaussian),
            DisorderModel::Bernoulli { p } => Some(ModelSpec::Bernoulli { p }),
            DisorderModel::Uniform => Some(ModelSpec::Uniform),
            DisorderModel::Custom(_) => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            DisorderModel::Custom(c) => c.name.clone(),
            other => other.spec().unwrap().to_string(),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, DisorderModel::Gaussian)
    }

    /// The two atoms `(high, low)` of the centered Bernoulli law and the
    /// inverse standard deviation `high − low`.
    fn bernoulli_atoms(p: f64) -> (f64, f64, f64) {
        let sd = (p * (1.0 - p)).sqrt();
        ((1.0 - p) / sd, -p / sd, 1.0 / sd)
    }

    /// `λ(β)`.
    pub fn log_mgf(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        match self {
            DisorderModel::Gaussian => 0.5 * beta * beta,
            DisorderModel::Bernoulli { p } => {
                let (_, lo, gap) = Self::bernoulli_atoms(*p);
                // log(p e^{β hi} + (1−p) e^{β lo}) = β lo + log(1 − p + p e^{β gap})
                beta * lo + (1.0 - p).ln() + log1p_exp(beta * gap + (p / (1.0 - p)).ln())
            }
            DisorderModel::Uniform => {
                let x = SQRT3 * beta.abs();
                if x < 1e-3 {
                    let x2 = x * x;
                    x2 / 6.0 - x2 * x2 / 180.0
                } else {
                    // log(sinh x / x)
                    x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2 - x.ln()
                }
            }
            DisorderModel::Custom(c) => (c.log_mgf)(beta),
        }
    }

    /// `λ′(β)`, the mean of `ω` under the law tilted by `e^{βω}`.
    pub fn log_mgf_d1(&self, beta: f64) -> f64 {
        match self {
            DisorderModel::Gaussian => beta,
            DisorderModel::Bernoulli { p } => {
                let (_, lo, gap) = Self::bernoulli_atoms(*p);
                lo + gap * sigmoid(beta * gap + (p / (1.0 - p)).ln())
            }
            DisorderModel::Uniform => {
                let x = SQRT3 * beta;
                // √3 (coth x − 1/x)
                let inner = if x.abs() < 1e-3 {
                    x / 3.0 - x * x * x / 45.0
                } else {
                    1.0 / x.tanh() - 1.0 / x
                };
                SQRT3 * inner
            }
            DisorderModel::Custom(c) => (c.log_mgf_d1)(beta),
        }
    }

    /// `λ″(β)`, the variance of `ω` under the tilted law.
    pub fn log_mgf_d2(&self, beta: f64) -> f64 {
        match self {
            DisorderModel::Gaussian => 1.0,
            DisorderModel::Bernoulli { p } => {
                let (_, _, gap) = Self::bernoulli_atoms(*p);
                let q = sigmoid(beta * gap + (p / (1.0 - p)).ln());
                gap * gap * q * (1.0 - q)
            }
            DisorderModel::Uniform => {
                let x = SQRT3 * beta.abs();
                // 3 (1/x² − 1/sinh² x)
                let inner = if x < 0.05 {
                    let x2 = x * x;
                    1.0 / 3.0 - x2 / 15.0 + 2.0 * x2 * x2 / 189.0
                } else {
                    let sh = x.sinh();
                    1.0 / (x * x) - 1.0 / (sh * sh)
                };
                3.0 * inner
            }
            DisorderModel::Custom(c) => (c.log_mgf_d2)(beta),
        }
    }

    /// `γ(β) = λ(2β) − 2λ(β)`, the log of `Q A²` for `A = e^{βω−λ(β)}`.
    pub fn gamma(&self, beta: f64) -> f64 {
        self.log_mgf(2.0 * beta) - 2.0 * self.log_mgf(beta)
    }

    /// `a_θ = Q A^θ = exp(λ(θβ) − θλ(β))`.
    pub fn a_theta(&self, theta: f64, beta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.log_a_theta(theta, beta).exp())
    }

    pub(crate) fn log_a_theta(&self, theta: f64, beta: f64) -> f64 {
        self.log_mgf(theta * beta) - theta * self.log_mgf(beta)
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        match self {
            DisorderModel::Gaussian => rng.sample(StandardNormal),
            DisorderModel::Bernoulli { p } => {
                let (hi, lo, _) = Self::bernoulli_atoms(*p);
                if rng.random::<f64>() < *p {
                    hi
                } else {
                    lo
                }
            }
            DisorderModel::Uniform => SQRT3 * (2.0 * rng.random::<f64>() - 1.0),
            DisorderModel::Custom(c) => (c.sample)(rng),
        }
    }

    /// Draw from `dQ̃/dQ = e^{−δω − λ(−δ)}`.
    pub fn tilted_sample<R: RngCore>(&self, rng: &mut R, delta: f64) -> Result<f64> {
        if !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("tilt must be finite, got {delta}")));
        }
        Ok(match self {
            DisorderModel::Gaussian => rng.sample::<f64, _>(StandardNormal) - delta,
            DisorderModel::Bernoulli { p } => {
                let (hi, lo, gap) = Self::bernoulli_atoms(*p);
                // P(hi) ∝ p e^{−δ hi}, P(lo) ∝ (1−p) e^{−δ lo}
                let q = sigmoid(-delta * gap + (p / (1.0 - p)).ln());
                if rng.random::<f64>() < q {
                    hi
                } else {
                    lo
                }
            }
            DisorderModel::Uniform => {
                let t = -delta;
                let u: f64 = rng.random();
                if t.abs() < 1e-12 {
                    SQRT3 * (2.0 * u - 1.0)
                } else {
                    // truncated exponential on [−√3, √3] with rate −|t|,
                    // mirrored for the other sign
                    let r = -t.abs();
                    let w = 2.0 * SQRT3;
                    let x = -SQRT3 + (u * (r * w).exp_m1()).ln_1p() / r;
                    if t > 0.0 {
                        -x
                    } else {
                        x
                    }
                }
            }
            DisorderModel::Custom(c) => match &c.tilted_sample {
                Some(f) => f(rng, delta),
                None => {
                    return Err(Error::UnsupportedModel {
                        required: "a tilted sampler",
                        model: c.name.clone(),
                    })
                }
            },
        })
    }
}

pub fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTheta(theta))
    }
}

/// Per-generation tilts `δ_{1,n}, …, δ_{n,n}`: on generation `i` the
/// environment mean is shifted by `−δ_{i,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltSchedule {
    shifts: Vec<f64>,
}

impl TiltSchedule {
    pub fn new(shifts: Vec<f64>) -> Result<Self> {
        if let Some(d) = shifts.iter().find(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite tilt {d}")));
        }
        Ok(Self { shifts })
    }

    pub fn zero(n: u32) -> Self {
        Self {
            shifts: vec![0.0; n as usize],
        }
    }

    /// `δ_{i,n} = (sb)^{−n/2}` on every generation.
    pub fn homogeneous(b: usize, s: usize, n: u32) -> Self {
        let d = ((b * s) as f64).powf(-(n as f64) / 2.0);
        Self {
            shifts: vec![d; n as usize],
        }
    }

    /// `δ_{i,n} = n^{−1/2} s^{−i}`, tilt proportional to the Green function
    /// in the marginal case `b = s`.
    pub fn marginal(s: usize, n: u32) -> Self {
        let scale = (n as f64).sqrt().recip();
        Self {
            shifts: (1..=n)
                .map(|i| scale * (s as f64).powi(-(i as i32)))
                .collect(),
        }
    }

    /// `δ_i = (1−θ)β/b^i`, which minimizes each generation's Gaussian
    /// contribution separately.
    pub fn optimized(b: usize, n: u32, theta: f64, beta: f64) -> Self {
        Self {
            shifts: (1..=n)
                .map(|i| (1.0 - theta) * beta * (b as f64).powi(-(i as i32)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    /// `δ_{i,n}` for `i = 1..=n`.
    pub fn shift(&self, generation: usize) -> f64 {
        self.shifts[generation - 1]
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::CounterRng;
    use approx::assert_abs_diff_eq;

    fn models() -> Vec<DisorderModel> {
        vec![
            DisorderModel::Gaussian,
            DisorderModel::bernoulli(0.5).unwrap(),
            DisorderModel::bernoulli(0.2).unwrap(),
            DisorderModel::Uniform,
        ]
    }

    #[test]
    fn closed_forms() {
        let g = DisorderModel::Gaussian;
        assert_eq!(g.log_mgf(0.0), 0.0);
        assert_eq!(g.log_mgf_d1(0.0), 0.0);
        assert_eq!(g.log_mgf_d2(0.0), 1.0);
        assert_eq!(g.log_mgf(2.0), 2.0);
        let pm = DisorderModel::bernoulli(0.5).unwrap();
        assert_abs_diff_eq!(pm.log_mgf(1.0), 1f64.cosh().ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(pm.log_mgf(1.0), 0.4338, epsilon = 1e-4);
        for m in models() {
            assert_abs_diff_eq!(m.log_mgf(0.0), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(m.log_mgf_d1(0.0), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.log_mgf_d2(0.0), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bernoulli_mgf_by_direct_sum() {
        for p in [0.1, 0.3, 0.5, 0.9] {
            let m = DisorderModel::bernoulli(p).unwrap();
            let sd = (p * (1.0 - p)).sqrt();
            for beta in [-2.0, -0.3, 0.4, 1.0, 3.0] {
                let direct = (p * (beta * (1.0 - p) / sd).exp() + (1.0 - p) * (-beta * p / sd).exp()).ln();
                assert_abs_diff_eq!(m.log_mgf(beta), direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn uniform_mgf_by_quadrature() {
        let m = DisorderModel::Uniform;
        for beta in [0.0005, 0.1, 1.0, 2.5] {
            // midpoint rule on the density 1/(2√3)
            let k = 200_000;
            let h = 2.0 * SQRT3 / k as f64;
            let integral: f64 = (0..k)
                .map(|i| (beta * (-SQRT3 + (i as f64 + 0.5) * h)).exp())
                .sum::<f64>()
                * h
                / (2.0 * SQRT3);
            assert_abs_diff_eq!(m.log_mgf(beta), integral.ln(), epsilon = 1e-9);
        }
        assert!(m.log_mgf(400.0).is_finite());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-4;
        for m in models() {
            for beta in [0.1, 0.5, 1.0, 2.0] {
                let d1 = (m.log_mgf(beta + h) - m.log_mgf(beta - h)) / (2.0 * h);
                assert!((m.log_mgf_d1(beta) - d1).abs() < 1e-6, "{} β={beta}", m.name());
                let d2 = (m.log_mgf_d1(beta + h) - m.log_mgf_d1(beta - h)) / (2.0 * h);
                assert!((m.log_mgf_d2(beta) - d2).abs() < 1e-6, "{} β={beta}", m.name());
            }
        }
    }

    #[test]
    fn gamma_values_and_monotonicity() {
        let g = DisorderModel::Gaussian;
        assert_eq!(g.gamma(0.0), 0.0);
        assert_abs_diff_eq!(g.gamma(1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.gamma(0.5), 0.25, epsilon = 1e-15);
        for m in models() {
            let mut prev = 0.0;
            for k in 0..=100 {
                let beta = 0.05 * k as f64;
                let v = m.gamma(beta);
                assert!(v >= -1e-15);
                assert!(v >= prev - 1e-15, "{} β={beta}", m.name());
                prev = v;
            }
        }
    }

    #[test]
    fn a_theta_values() {
        let g = DisorderModel::Gaussian;
        assert_abs_diff_eq!(g.a_theta(0.5, 1.0).unwrap(), (-0.125f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.a_theta(0.5, 2.0).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.a_theta(1.0 - 1e-9, 1.3).unwrap(), 1.0, epsilon = 1e-8);
        assert_eq!(g.a_theta(1.0, 1.0), Err(Error::InvalidTheta(1.0)));
        assert_eq!(g.a_theta(0.0, 1.0), Err(Error::InvalidTheta(0.0)));
        for m in models() {
            assert!(m.a_theta(0.3, 1.2).unwrap() <= 1.0);
        }
    }

    #[test]
    fn samplers_are_centered_and_normalized() {
        for m in models() {
            let mut rng = CounterRng::new(11);
            let n = 1_000_000;
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let x = m.sample(&mut rng);
                s1 += x;
                s2 += x * x;
            }
            let mean = s1 / n as f64;
            assert!(mean.abs() < 4e-3, "{} mean {mean}", m.name());
            assert!((s2 / n as f64 - 1.0).abs() < 1e-2, "{}", m.name());
        }
    }

    #[test]
    fn sampler_supports() {
        let mut rng = CounterRng::new(3);
        let pm = DisorderModel::bernoulli(0.5).unwrap();
        let u = DisorderModel::Uniform;
        for _ in 0..10_000 {
            let x = pm.sample(&mut rng);
            assert!(x == 1.0 || x == -1.0);
            let y = u.sample(&mut rng);
            assert!((-SQRT3..=SQRT3).contains(&y));
        }
    }

    #[test]
    fn empirical_mgf() {
        for m in models() {
            for beta in [0.5, 1.0] {
                let mut rng = CounterRng::new(99);
                let n = 1_000_000;
                let (mut s1, mut s2) = (0.0, 0.0);
                for _ in 0..n {
                    let e = (beta * m.sample(&mut rng)).exp();
                    s1 += e;
                    s2 += e * e;
                }
                let mean = s1 / n as f64;
                let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
                let target = m.log_mgf(beta).exp();
                assert!((mean - target).abs() < 4.0 * se, "{} β={beta}", m.name());
            }
        }
    }

    #[test]
    fn tilted_gaussian_mean() {
        let g = DisorderModel::Gaussian;
        let mut rng = CounterRng::new(5);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| g.tilted_sample(&mut rng, 0.3).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean + 0.3).abs() < 4.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn tilt_matches_exact_tilted_mean() {
        // mean of ω under e^{−δω} dQ is λ′(−δ)
        for m in models() {
            for delta in [-1.0, 0.0, 0.7] {
                let mut rng = CounterRng::new(17);
                let n = 200_000;
                let (mut s1, mut s2) = (0.0, 0.0);
                for _ in 0..n {
                    let x = m.tilted_sample(&mut rng, delta).unwrap();
                    s1 += x;
                    s2 += x * x;
                }
                let mean = s1 / n as f64;
                let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
                let target = m.log_mgf_d1(-delta);
                assert!((mean - target).abs() < 4.0 * se, "{} δ={delta}: {mean} vs {target}", m.name());
            }
        }
    }

    #[test]
    fn bernoulli_two_point_tilt() {
        let pm = DisorderModel::bernoulli(0.5).unwrap();
        let delta: f64 = 1.0;
        let expected_plus = (-delta).exp() / (delta.exp() + (-delta).exp());
        let mut rng = CounterRng::new(23);
        let n = 200_000;
        let plus = (0..n)
            .filter(|_| pm.tilted_sample(&mut rng, delta).unwrap() > 0.0)
            .count() as f64
            / n as f64;
        let se = (expected_plus * (1.0 - expected_plus) / n as f64).sqrt();
        assert!((plus - expected_plus).abs() < 4.0 * se);
    }

    #[test]
    fn custom_law_without_tilt_is_rejected() {
        let law = CustomLaw {
            name: "rademacher".into(),
            log_mgf: Arc::new(|b: f64| b.cosh().ln()),
            log_mgf_d1: Arc::new(|b: f64| b.tanh()),
            log_mgf_d2: Arc::new(|b: f64| 1.0 - b.tanh().powi(2)),
            sample: Arc::new(|r: &mut dyn RngCore| if r.next_u64() & 1 == 0 { 1.0 } else { -1.0 }),
            tilted_sample: None,
        };
        let m = DisorderModel::Custom(law);
        let mut rng = CounterRng::new(1);
        assert!(matches!(m.tilted_sample(&mut rng, 0.1), Err(Error::UnsupportedModel { .. })));
        assert_abs_diff_eq!(m.gamma(1.0), 2f64.cosh().ln() - 2.0 * 1f64.cosh().ln());
        let x = m.sample(&mut rng);
        assert!(x.abs() == 1.0);
    }

    #[test]
    fn model_text_round_trip() {
        for text in ["gaussian", "uniform", "bernoulli:0.3"] {
            let spec: ModelSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert_eq!("bernoulli".parse::<ModelSpec>().unwrap(), ModelSpec::Bernoulli { p: 0.5 });
        assert_eq!("Bernoulli: p=0.25".parse::<ModelSpec>().unwrap(), ModelSpec::Bernoulli { p: 0.25 });
        assert!("bernoulli:1.5".parse::<ModelSpec>().is_err());
        assert!("cauchy".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn schedules() {
        let m = TiltSchedule::marginal(2, 4);
        assert_eq!(m.len(), 4);
        assert_abs_diff_eq!(m.shift(1), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.shift(4), 0.5 / 16.0, epsilon = 1e-15);
        let h = TiltSchedule::homogeneous(2, 3, 2);
        assert!(h.shifts().iter().all(|&d| (d - 1.0 / 6.0).abs() < 1e-15));
        assert!(TiltSchedule::new(vec![f64::NAN]).is_err());
    }
}
