//! Run configuration: flags win over the config file, which wins over
//! `DIAMOND_SEED` (seed only) and the defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use diamond_core::disorder::check_theta;
use diamond_core::engine::DEFAULT_SITE_BUDGET;
use diamond_core::{LatticeParams, ModelSpec};

use crate::CliError;

pub const SEED_ENV: &str = "DIAMOND_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}`")),
        }
    }
}

/// Flags shared by every computing subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Number of parallel branches b (>= 2).
    #[arg(long)]
    pub b: Option<usize>,
    /// Number of segments per branch s (>= 2).
    #[arg(long)]
    pub s: Option<usize>,
    /// Disorder law: gaussian, uniform, bernoulli or bernoulli:<p>.
    #[arg(long)]
    pub model: Option<String>,
    /// Inverse temperatures, as `0.1,0.5` or `start:stop:step`.
    #[arg(long)]
    pub beta: Option<String>,
    /// Lattice depths, as `4,6` or `start:stop[:step]`.
    #[arg(long)]
    pub n: Option<String>,
    /// Fractional-moment exponent in (0, 1).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Independent environments (or path pairs) per grid point.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Master seed; falls back to $DIAMOND_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coarse-graining depth for localization.
    #[arg(long)]
    pub m: Option<u32>,
    /// Approximation depth below the prefix for weak-measure.
    #[arg(long)]
    pub k: Option<u32>,
    /// Window parameter of the anti-concentration scan.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Deviation parameter of the concentration tail check.
    #[arg(long)]
    pub tail_eps: Option<f64>,
    /// Largest (bs)^n allowed per sample.
    #[arg(long)]
    pub site_budget: Option<f64>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for the sample loops.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Key-value file with the same keys as the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved configuration, echoed into every output header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub b: usize,
    pub s: usize,
    pub model: ModelSpec,
    pub beta: Vec<f64>,
    pub n: Vec<u32>,
    pub theta: f64,
    pub samples: usize,
    pub seed: u64,
    pub m: u32,
    pub k: u32,
    pub eps: f64,
    pub tail_eps: f64,
    pub site_budget: f64,
    pub format: Format,
}

/// Settings that change how a run executes but not what it prints.
#[derive(Debug, Clone, Default)]
pub struct Exec {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

const KEYS: &[&str] = &[
    "b",
    "s",
    "model",
    "beta",
    "n",
    "theta",
    "samples",
    "seed",
    "m",
    "k",
    "eps",
    "tail-eps",
    "site-budget",
    "format",
    "out",
    "workers",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn load(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_file(&text)
}

fn from_file<T: FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    file.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| CliError::Config(format!("bad value `{v}` for `{key}`")))
        })
        .transpose()
}

fn pick<T: FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, CliError> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(from_file(file, key)?.unwrap_or(default)),
    }
}

/// `0.1,0.5` or `start:stop:step`, inclusive of `stop`.
pub fn parse_beta_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("bad beta grid `{text}`"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, h): (f64, f64, f64) = (
                start.parse().map_err(|_| bad())?,
                stop.parse().map_err(|_| bad())?,
                step.parse().map_err(|_| bad())?,
            );
            if h.is_nan() || h <= 0.0 || b < a || ((b - a) / h) > 1e6 {
                return Err(bad());
            }
            let count = ((b - a) / h + 1e-9).floor() as usize;
            (0..=count).map(|i| a + i as f64 * h).collect()
        }
        [_] => text
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() || values.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(CliError::Config(format!("beta values must be finite and >= 0: `{text}`")));
    }
    Ok(values)
}

/// `4,6` or `start:stop[:step]`, inclusive of `stop`.
pub fn parse_n_grid(text: &str) -> Result<Vec<u32>, CliError> {
    let bad = || CliError::Config(format!("bad n grid `{text}`"));
    let num = |x: &str| x.trim().parse::<u32>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let values: Vec<u32> = match parts.as_slice() {
        [a, b] => (num(a)?..=num(b)?).collect(),
        [a, b, h] => {
            let h = num(h)?;
            if h == 0 {
                return Err(bad());
            }
            (num(a)?..=num(b)?).step_by(h as usize).collect()
        }
        [_] => text.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

impl RunConfig {
    pub fn resolve(command: &str, flags: &Flags) -> Result<(RunConfig, Exec), CliError> {
        let file = match &flags.config {
            Some(path) => load(path)?,
            None => BTreeMap::new(),
        };
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Config(format!("bad {SEED_ENV} `{v}`")))?,
            ),
            Err(_) => None,
        };
        let model_text = pick(flags.model.clone(), &file, "model", "gaussian".to_string())?;
        let beta_text = pick(flags.beta.clone(), &file, "beta", "1".to_string())?;
        let n_text = pick(flags.n.clone(), &file, "n", "6".to_string())?;
        let config = RunConfig {
            command: command.to_string(),
            b: pick(flags.b, &file, "b", 2)?,
            s: pick(flags.s, &file, "s", 2)?,
            model: model_text.parse().map_err(|e| CliError::Config(format!("{e}")))?,
            beta: parse_beta_grid(&beta_text)?,
            n: parse_n_grid(&n_text)?,
            theta: pick(flags.theta, &file, "theta", 0.5)?,
            samples: pick(flags.samples, &file, "samples", 1000)?,
            seed: match flags.seed {
                Some(s) => s,
                None => from_file(&file, "seed")?.or(env_seed).unwrap_or(0),
            },
            m: pick(flags.m, &file, "m", 1)?,
            k: pick(flags.k, &file, "k", 4)?,
            eps: pick(flags.eps, &file, "eps", 0.05)?,
            tail_eps: pick(flags.tail_eps, &file, "tail-eps", 0.5)?,
            site_budget: pick(flags.site_budget, &file, "site-budget", DEFAULT_SITE_BUDGET)?,
            format: pick(flags.format, &file, "format", Format::Csv)?,
        };
        let exec = Exec {
            out: flags.out.clone().or(from_file(&file, "out")?),
            workers: flags.workers.or(from_file(&file, "workers")?),
        };
        config.validate()?;
        if exec.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok((config, exec))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: diamond_core::Error| CliError::Config(e.to_string());
        LatticeParams::new(self.b, self.s).map_err(cfg)?;
        self.model.build().map_err(cfg)?;
        check_theta(self.theta).map_err(cfg)?;
        if self.samples < 2 {
            return Err(CliError::Config(format!("samples must be at least 2, got {}", self.samples)));
        }
        for (name, x) in [("eps", self.eps), ("tail-eps", self.tail_eps), ("site-budget", self.site_budget)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive and finite, got {x}")));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> LatticeParams {
        LatticeParams::new(self.b, self.s).expect("validated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_beta_grid("0.5, 1").unwrap(), vec![0.5, 1.0]);
        assert_eq!(parse_beta_grid("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_n_grid("2:5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_n_grid("2:8:3").unwrap(), vec![2, 5, 8]);
        assert_eq!(parse_n_grid("7").unwrap(), vec![7]);
        assert!(parse_beta_grid("-1").is_err());
        assert!(parse_beta_grid("1:0:0.1").is_err());
        assert!(parse_n_grid("a").is_err());
        assert!(parse_n_grid("1:2:0").is_err());
    }

    #[test]
    fn config_file() {
        let map = parse_config_file("# comment\nb = 3\nsite_budget=1e6 # trailing\n\n").unwrap();
        assert_eq!(map["b"], "3");
        assert_eq!(map["site-budget"], "1e6");
        assert!(parse_config_file("bogus = 1").is_err());
        assert!(parse_config_file("b 3").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "b = 3\ns = 3\nseed = 9\nbeta = 0.2,0.4\n").unwrap();
        let flags = Flags {
            b: Some(4),
            config: Some(path),
            ..Flags::default()
        };
        let (c, _) = RunConfig::resolve("free-energy", &flags).unwrap();
        assert_eq!((c.b, c.s, c.seed), (4, 3, 9));
        assert_eq!(c.beta, vec![0.2, 0.4]);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: Flags| RunConfig::resolve("x", &f).is_err();
        assert!(bad(Flags { b: Some(1), ..Flags::default() }));
        assert!(bad(Flags { theta: Some(1.0), ..Flags::default() }));
        assert!(bad(Flags { samples: Some(1), ..Flags::default() }));
        assert!(bad(Flags { model: Some("cauchy".into()), ..Flags::default() }));
        assert!(bad(Flags { workers: Some(0), ..Flags::default() }));
    }
}
