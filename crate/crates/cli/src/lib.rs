//! Command-line front end: one subcommand per computation, each writing one
//! table as CSV (with a `#` JSON header) or JSON.

pub mod commands;
pub mod config;
pub mod determinism;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::{Args, Parser, Subcommand};

use config::{Flags, RunConfig};

/// Runs whose total planned site visits exceed this get a notice on stderr.
pub const LONG_RUN_VISITS: f64 = 1e8;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Budget(String),
    Io(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Budget(m) => write!(f, "budget exceeded: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<diamond_core::Error> for CliError {
    fn from(e: diamond_core::Error) -> Self {
        match e {
            diamond_core::Error::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "diamond", version, about = "Directed polymers on diamond hierarchical lattices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Quenched free energy (1/s^n) log Z_n over sampled environments, with
    /// the finite-volume annealed value and the gap between them.
    /// Columns: beta,n,mean,stderr,annealed,gap,gap_stderr,exact.
    FreeEnergy(Flags),
    /// Second moment of the normalized partition function W_n: closed-form
    /// variance recursion next to its Monte Carlo estimate.
    /// Columns: beta,n,gamma,v_recursion,v_mc,v_mc_stderr.
    Variance(Flags),
    /// Fractional moments u_n = Q W_n^theta: the exact upper chain, its f_n
    /// sequence, and Monte Carlo estimates.
    /// Columns: beta,theta,n,log_u_chain,f_chain,u_mc,u_mc_stderr,f_mc,strong_chain.
    Fractional(Flags),
    /// Closed-form thresholds, strong-disorder criteria, tilt bounds and
    /// two-sided bounds on the free-energy gap. No sampling.
    /// Columns: beta,theta,n,annealed,gamma,gamma_star,beta2,l2_region,p_c,
    /// iii_margin,iv_margin,inhomogeneous_margin,f_n,certifies_strong,gap_lower,gap_upper.
    Bounds(Flags),
    /// Critical point of bond percolation on the lattice, the unstable fixed
    /// point of x -> 1-(1-x^s)^b, printed to 12 decimals.
    /// Columns: b,s,p_c,slope,variance_level.
    Percolation(Flags),
    /// Fluctuations of log Z_n: variance, maximal mass in a sliding window
    /// (Gaussian only) and the empirical tail beyond s^n * tail-eps.
    /// Columns: beta,n,var_log_z,var_stderr,window,window_mass,mass_cap,tail_fraction,tail_bound.
    Fluctuations(Flags),
    /// Overlap of two independent uniform paths: closed form and Monte Carlo
    /// over `samples` pairs.
    /// Columns: n,exact,mc,mc_stderr.
    Overlap(Flags),
    /// Largest probability of a coarse path of depth m under the polymer
    /// measure, averaged over environments.
    /// Columns: beta,n,m,mu_max,stderr.
    Localization(Flags),
    /// Depth-k approximation of the infinite-volume polymer measure on
    /// paths of depth n, and the mean energy per step at depth n+k.
    /// Columns: beta,n,k,mu_max,mu_max_stderr,energy,energy_stderr,lambda_prime.
    WeakMeasure(Flags),
    /// Free energy of the variant with disorder on bonds instead of sites.
    /// Columns: beta,n,mean,stderr,annealed,gap,gap_stderr.
    BondModel(Flags),
    /// Runs the numerical acceptance suite; exits 1 if any criterion fails.
    Acceptance(AcceptanceArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct AcceptanceArgs {
    /// Comma-separated criterion ids (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}

impl Command {
    fn name_and_flags(&self) -> Option<(&'static str, &Flags)> {
        Some(match self {
            Command::FreeEnergy(f) => ("free-energy", f),
            Command::Variance(f) => ("variance", f),
            Command::Fractional(f) => ("fractional", f),
            Command::Bounds(f) => ("bounds", f),
            Command::Percolation(f) => ("percolation", f),
            Command::Fluctuations(f) => ("fluctuations", f),
            Command::Overlap(f) => ("overlap", f),
            Command::Localization(f) => ("localization", f),
            Command::WeakMeasure(f) => ("weak-measure", f),
            Command::BondModel(f) => ("bond-model", f),
            Command::Acceptance(_) => return None,
        })
    }
}

fn needs_sampling(command: &str) -> bool {
    !matches!(command, "bounds" | "percolation" | "overlap")
}

fn compute(name: &str, flags: &Flags) -> Result<(), CliError> {
    let (config, exec) = RunConfig::resolve(name, flags)?;
    if needs_sampling(name) {
        commands::check_budget(&config)?;
        let visits = commands::planned_visits(&config);
        if visits > LONG_RUN_VISITS {
            eprintln!("estimated site visits: {visits:.3e}");
        }
    }
    let table = match exec.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(|| commands::run(&config))?,
        None => commands::run(&config)?,
    };
    let bytes = output::render(&config, &table)?;
    match &exec.out {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(())
}

fn acceptance(args: &AcceptanceArgs) -> Result<(), CliError> {
    let wanted = |id: u8| args.only.is_empty() || args.only.contains(&id);
    let mut failed = Vec::new();
    let mut total = 0;
    for c in diamond_core::acceptance::CRITERIA.iter().filter(|c| wanted(c.id)) {
        let o = c.run();
        println!("{o}");
        total += 1;
        if !o.passed {
            failed.push(o.id);
        }
    }
    if wanted(determinism::ID) {
        let exe = std::env::current_exe().map_err(|e| CliError::Io(e.to_string()))?;
        let o = determinism::check(&exe);
        println!("{o}");
        total += 1;
        if !o.passed {
            failed.push(o.id);
        }
    }
    println!("{}/{total} criteria passed", total - failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("failed criteria: {failed:?}")))
    }
}

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command.name_and_flags() {
        Some((name, flags)) => compute(name, flags),
        None => match &cli.command {
            Command::Acceptance(a) => acceptance(a),
            _ => unreachable!(),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
