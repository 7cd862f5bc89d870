use std::process::{Command, Output};

use diamond_cli::commands::COMMANDS;
use diamond_cli::output::parse_header;
use serde_json::Value;

fn diamond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diamond"))
        .args(args)
        .env_remove("DIAMOND_SEED")
        .output()
        .unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = diamond(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn percolation_prints_twelve_digits() {
    let text = stdout(&["percolation", "--b", "2", "--s", "2"]);
    let row = &rows(&text)[0];
    assert_eq!(row[2], "0.618033988750");
}

#[test]
fn free_energy_is_exact_at_beta_zero() {
    let text = stdout(&["free-energy", "--b", "3", "--s", "2", "--beta", "0", "--n", "3", "--samples", "8"]);
    let row = &rows(&text)[0];
    let exact: f64 = row[7].parse().unwrap();
    // log |Γ_3| / 2^3 for (3,2)
    assert!((exact - 7.0 * 3f64.ln() / 8.0).abs() < 1e-15);
    assert_eq!(row[2], row[7]);
    assert_eq!(row[3], "0");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["variance", "--b", "3", "--s", "2", "--beta", "0.2,0.4", "--n", "1:3", "--samples", "100", "--seed", "5"];
    assert_eq!(stdout(&args), stdout(&args));
    let other = stdout(&["variance", "--b", "3", "--s", "2", "--beta", "0.2,0.4", "--n", "1:3", "--samples", "100", "--seed", "6"]);
    assert_ne!(stdout(&args), other);
}

#[test]
fn output_file_header_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let p = path.to_str().unwrap();
    let args = ["overlap", "--b", "2", "--s", "3", "--n", "1,2", "--samples", "50", "--seed", "3"];
    let mut with_out = args.to_vec();
    with_out.extend(["--out", p]);
    let out = diamond(&with_out);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let file = std::fs::read_to_string(&path).unwrap();
    assert_eq!(file, stdout(&args));
    let h = parse_header(&file).unwrap();
    assert_eq!(h.config.command, "overlap");
    assert_eq!(h.config.n, vec![1, 2]);
    assert_eq!(h.config.seed, 3);
}

#[test]
fn json_output_parses() {
    let text = stdout(&["bounds", "--b", "4", "--s", "2", "--beta", "0.5,2", "--n", "4", "--format", "json"]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["b"], 4);
    assert_eq!(v["columns"][0], "beta");
}

#[test]
fn exit_codes() {
    assert_eq!(diamond(&["free-energy", "--b", "1"]).status.code(), Some(2));
    assert_eq!(diamond(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(diamond(&["variance", "--theta", "1.5"]).status.code(), Some(2));
    let over = diamond(&["free-energy", "--n", "30", "--site-budget", "1000"]);
    assert_eq!(over.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&over.stderr).contains("budget"));
}

#[test]
fn config_file_and_environment_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# small run\nb = 3\nsamples = 10\nseed = 41\nn = 2\n").unwrap();
    let c = cfg.to_str().unwrap();
    let text = stdout(&["overlap", "--config", c, "--seed", "9"]);
    let h = parse_header(&text).unwrap().config;
    assert_eq!((h.b, h.samples, h.seed), (3, 10, 9));

    let env_run = |seed: &str, extra: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_diamond"))
            .args(["overlap", "--n", "2", "--samples", "10"])
            .args(extra)
            .env("DIAMOND_SEED", seed)
            .output()
            .unwrap();
        parse_header(std::str::from_utf8(&out.stdout).unwrap()).unwrap().config.seed
    };
    assert_eq!(env_run("77", &[]), 77);
    assert_eq!(env_run("77", &["--config", c]), 41);
    assert_eq!(env_run("77", &["--seed", "1"]), 1);
}

#[test]
fn help_lists_every_subcommand() {
    let text = stdout(&["--help"]);
    for c in COMMANDS.iter().chain(&["acceptance"]) {
        assert!(text.contains(c), "missing {c}");
    }
}

#[test]
fn every_determinism_run_succeeds() {
    for args in diamond_cli::determinism::RUNS {
        let out = diamond(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty());
    }
}
