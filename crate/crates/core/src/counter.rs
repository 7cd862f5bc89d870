//! Counter-based random streams.
//!
//! Every random quantity in a sampled environment is a pure function of a
//! master seed and a hierarchical node address. Nothing is materialized and
//! nothing depends on the order in which nodes are visited, so a recursion
//! can run depth-first, breadth-first, or split across threads and still see
//! the same disorder.

use rand::RngCore;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine a key with a small integer tag.
#[inline]
pub fn derive(key: u64, tag: u64) -> u64 {
    mix64(key.wrapping_add(tag.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Seed of the `index`-th independent sample under a master seed.
#[inline]
pub fn sample_seed(master: u64, index: u64) -> u64 {
    derive(mix64(master ^ 0x5EED_5EED_5EED_5EED), index)
}

/// Stateless generator: output `k` is `mix64(key ^ k·M)`.
///
/// Creating one is two words of state, so the recursion builds a fresh
/// stream for every edge it visits.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self {
            key: mix64(key),
            counter: 0,
        }
    }

    /// Draws consumed so far.
    pub fn position(&self) -> u64 {
        self.counter
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let z = self.key ^ self.counter.wrapping_mul(STREAM);
        self.counter = self.counter.wrapping_add(1);
        mix64(z)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Address of an edge in the recursive construction.
///
/// The root edge `A–B` is level 0. The `j`-th segment of the `i`-th branch
/// replacing an edge is its child `(i, j)`. Only a 64-bit digest of the path
/// from the root is kept, so addresses are `Copy` and O(1) to extend. Two
/// lattices of different depth agree on every address they share, which
/// nests the environments of `D_n ⊂ D_{n+1}` under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeAddr {
    key: u64,
    level: u32,
}

impl EdgeAddr {
    pub const ROOT: EdgeAddr = EdgeAddr {
        key: 0x0D1A_40D0_0000_0001,
        level: 0,
    };

    #[inline]
    pub fn child(self, branch: usize, segment: usize, s: usize) -> EdgeAddr {
        EdgeAddr {
            key: derive(self.key, (branch * s + segment) as u64),
            level: self.level + 1,
        }
    }

    pub fn key(self) -> u64 {
        self.key
    }

    pub fn level(self) -> u32 {
        self.level
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn streams_are_reproducible() {
        let mut a = CounterRng::new(42);
        let mut b = CounterRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_eq!(a.position(), 100);
    }

    #[test]
    fn uniform_moments() {
        let mut rng = CounterRng::new(7);
        let n = 200_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let u: f64 = rng.random();
            m1 += u;
            m2 += u * u;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        // sd of the mean is 1/sqrt(12 n) ~ 6.5e-4
        assert!((m1 - 0.5).abs() < 3e-3, "{m1}");
        assert!((m2 - 1.0 / 3.0).abs() < 3e-3, "{m2}");
    }

    #[test]
    fn neighbouring_keys_decorrelate() {
        let mut corr = 0.0;
        let n = 50_000u64;
        for k in 0..n {
            let x: f64 = CounterRng::new(k).random::<f64>() - 0.5;
            let y: f64 = CounterRng::new(k + 1).random::<f64>() - 0.5;
            corr += x * y;
        }
        corr /= n as f64 / 12.0;
        assert!(corr.abs() < 0.03, "{corr}");
    }

    #[test]
    fn child_addresses_are_distinct() {
        let mut seen = HashSet::new();
        let mut frontier = vec![EdgeAddr::ROOT];
        for _ in 0..4 {
            let mut next = Vec::new();
            for e in frontier {
                for i in 0..3 {
                    for j in 0..3 {
                        let c = e.child(i, j, 3);
                        assert!(seen.insert(c.key()));
                        assert_eq!(c.level(), e.level() + 1);
                        next.push(c);
                    }
                }
            }
            frontier = next;
        }
    }
}
