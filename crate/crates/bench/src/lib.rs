//! Benchmark fixtures shared by the criterion benches.

use diamond_core::{DisorderModel, LatticeParams, Polymer};

/// Gaussian polymer with a budget large enough for any bench depth.
pub fn polymer(b: usize, s: usize) -> Polymer {
    Polymer::new(LatticeParams::new(b, s).unwrap(), DisorderModel::Gaussian).with_site_budget(1e12)
}

/// Lattices and depths of roughly 10⁵ to 10⁶ site visits each.
pub const CASES: &[(usize, usize, u32)] = &[(2, 2, 9), (4, 2, 6), (2, 4, 6), (3, 3, 6)];
