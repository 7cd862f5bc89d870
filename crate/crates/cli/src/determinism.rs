//! Criterion 14: every subcommand prints the same bytes for the same seed,
//! run after run and for any worker count.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use diamond_core::acceptance::Outcome;

pub const ID: u8 = 14;
pub const WORKER_COUNTS: &[usize] = &[1, 4, 8];

/// One small run per subcommand, in both formats where it matters.
pub const RUNS: &[&[&str]] = &[
    &["free-energy", "--b", "2", "--s", "2", "--beta", "0,0.5,1", "--n", "3,5", "--samples", "64", "--seed", "7"],
    &["free-energy", "--b", "3", "--s", "2", "--beta", "0.4", "--n", "4", "--samples", "32", "--seed", "8", "--format", "json"],
    &["variance", "--b", "4", "--s", "2", "--beta", "0.3", "--n", "1:4", "--samples", "200", "--seed", "9"],
    &["fractional", "--b", "2", "--s", "2", "--beta", "1", "--n", "0:4", "--samples", "200", "--seed", "10"],
    &["bounds", "--b", "2", "--s", "3", "--beta", "0.5,1", "--n", "6"],
    &["bounds", "--b", "4", "--s", "2", "--beta", "0.2,1.5", "--n", "5", "--format", "json"],
    &["percolation", "--b", "2", "--s", "2"],
    &["fluctuations", "--b", "2", "--s", "4", "--beta", "1", "--n", "3,4", "--samples", "64", "--seed", "11"],
    &["overlap", "--b", "2", "--s", "3", "--n", "1:5", "--samples", "2000", "--seed", "12"],
    &["localization", "--b", "2", "--s", "2", "--beta", "1", "--n", "2,4", "--samples", "64", "--seed", "13"],
    &["weak-measure", "--b", "2", "--s", "2", "--beta", "0.3", "--n", "2", "--k", "3", "--samples", "32", "--seed", "14"],
    &["bond-model", "--b", "2", "--s", "2", "--beta", "0.5", "--n", "4", "--samples", "64", "--seed", "15"],
];

fn invoke(exe: &Path, args: &[&str], workers: usize) -> Result<Vec<u8>, String> {
    let out = Command::new(exe)
        .args(args)
        .args(["--workers", &workers.to_string()])
        .env_remove(crate::config::SEED_ENV)
        .output()
        .map_err(|e| format!("cannot start {}: {e}", exe.display()))?;
    if !out.status.success() {
        return Err(format!(
            "`{}` with {workers} workers exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(out.stdout)
}

/// Runs every entry of [`RUNS`] once per worker count plus a repeat with one
/// worker, and requires identical stdout throughout.
pub fn check(exe: &Path) -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for args in RUNS {
        let reference = match invoke(exe, args, 1) {
            Ok(bytes) => bytes,
            Err(e) => {
                failures.push(e);
                continue;
            }
        };
        let others = std::iter::once(1).chain(WORKER_COUNTS.iter().copied().skip(1));
        for workers in others {
            match invoke(exe, args, workers) {
                Ok(bytes) if bytes == reference => {}
                Ok(_) => failures.push(format!("`{}` differs with {workers} workers", args.join(" "))),
                Err(e) => failures.push(e),
            }
        }
    }
    let checks = RUNS.len() * (WORKER_COUNTS.len() + 1);
    let detail = if failures.is_empty() {
        format!("{checks}/{checks} checks; {} runs × workers {WORKER_COUNTS:?}", RUNS.len())
    } else {
        format!("{}/{checks} checks; failed: {}", checks - failures.len(), failures.join("; "))
    };
    Outcome {
        id: ID,
        name: "byte-identical CLI output",
        passed: failures.is_empty(),
        detail,
        failures,
        seconds: start.elapsed().as_secs_f64(),
        limit: None,
    }
}
