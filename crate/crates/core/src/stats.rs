//! Sample statistics shared by the estimators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Monte Carlo result with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl Estimate {
    /// Mean and `sd/√N` of `xs`.
    pub fn from_samples(xs: &[f64], seed: u64) -> Self {
        let (mean, var) = mean_var(xs);
        Self {
            mean,
            stderr: (var / xs.len() as f64).sqrt(),
            n_samples: xs.len(),
            seed,
            extra: BTreeMap::new(),
        }
    }

    pub fn exact(value: f64, n_samples: usize, seed: u64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            n_samples,
            seed,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }

    /// `|mean − target| ≤ k·stderr + floor`.
    pub fn agrees_with(&self, target: f64, k: f64, floor: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + floor
    }
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.len() < 2 {
        return (mean(xs), 0.0);
    }
    // shifted by xs[0], so a constant sample has exactly zero spread
    let x0 = xs[0];
    let shifted: Vec<f64> = xs.iter().map(|x| x - x0).collect();
    let dm = mean(&shifted);
    let dev: Vec<f64> = shifted.iter().map(|x| (x - dm) * (x - dm)).collect();
    (x0 + dm, pairwise_sum(&dev) / (xs.len() - 1) as f64)
}

/// Sample skewness `m3 / m2^{3/2}` (zero when the sample is constant).
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let m2 = mean(&xs.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>());
    let m3 = mean(&xs.iter().map(|x| (x - m).powi(3)).collect::<Vec<_>>());
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Unbiased sample variance with its delete-one jackknife standard error.
pub fn jackknife_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let (m, var) = mean_var(xs);
    if n < 3 {
        return (var, f64::INFINITY);
    }
    if var == 0.0 {
        return (0.0, 0.0);
    }
    // leave-one-out variances from centered sums
    let d: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let s1 = pairwise_sum(&d);
    let s2 = pairwise_sum(&d.iter().map(|x| x * x).collect::<Vec<_>>());
    let nf = n as f64;
    let loo: Vec<f64> = d
        .iter()
        .map(|&x| {
            let a = s1 - x;
            let q = s2 - x * x;
            (q - a * a / (nf - 1.0)) / (nf - 2.0)
        })
        .collect();
    let lm = mean(&loo);
    let ss = pairwise_sum(&loo.iter().map(|v| (v - lm).powi(2)).collect::<Vec<_>>());
    (var, ((nf - 1.0) / nf * ss).sqrt())
}

/// Largest fraction of `xs` inside any closed window `[a, a + width]`.
pub fn max_window_mass(xs: &[f64], width: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mut best = 0usize;
    let mut lo = 0usize;
    for hi in 0..v.len() {
        while v[hi] - v[lo] > width {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best as f64 / v.len() as f64
}

/// Ordinary least squares slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    let se = if n > 2.0 {
        (resid / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, se)
}

/// Weighted least squares slope with weights `1/σ²` and its standard error.
pub fn wls_slope(x: &[f64], y: &[f64], sigma: &[f64]) -> (f64, f64) {
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(a, w)| a * w).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(a, w)| a * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, w)| w * (a - mx).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((a, b), w)| w * (a - mx) * (b - my))
        .sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}
