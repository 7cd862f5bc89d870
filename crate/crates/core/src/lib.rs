//! Directed polymers on diamond hierarchical lattices with site disorder.
//!
//! * [`lattice`]: sizes, path counting, path codes and overlaps of `D_n`.
//! * [`disorder`]: disorder laws with exact log-MGFs and tilted samplers.
//! * [`engine`]: exact quenched recursion for `log Z_n`, coarse marginals,
//!   the bond-disorder variant and a pool approximation of the law of `W_n`.
//! * [`analysis`]: closed-form recursions, thresholds and rigorous bounds.
//! * [`estimators`]: Monte Carlo drivers with error bars.
//! * [`acceptance`]: the end-to-end numerical checks, runnable as a suite.

pub mod acceptance;
pub mod analysis;
pub mod counter;
pub mod disorder;
pub mod engine;
mod error;
pub mod estimators;
pub mod lattice;
pub mod stats;

pub use disorder::{CustomLaw, DisorderModel, ModelSpec, TiltSchedule};
pub use engine::{CoarseProfile, Environment, Polymer, QuenchedSample, SampledEnvironment};
pub use error::{Error, Result};
pub use lattice::{Count, LatticeParams, PathCode};
pub use stats::Estimate;
