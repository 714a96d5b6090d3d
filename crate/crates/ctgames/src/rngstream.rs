//! Deterministic seed splitting.
//!
//! All randomness in simulations and estimators flows from a single root
//! seed. Worker streams (replications, markets, optimizer starts) derive
//! their own generators by folding a tag path into the root seed with
//! SplitMix64, so any unit of work gets the same stream regardless of how
//! work is scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; the standard finalizer used to decorrelate seeds.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `root` and a tag path.
///
/// Tag paths are small integer sequences such as `[REP, rep_index, MARKET,
/// market_index]`; distinct paths give independent streams.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut state = root;
    let mut out = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        out ^= splitmix64(&mut state);
    }
    out
}

/// A seeded generator for the given tag path.
pub fn stream(root: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tags))
}

/// Tag namespace constants used by the estimation drivers.
pub mod tags {
    pub const REPLICATION: u64 = 1;
    pub const MARKET: u64 = 2;
    pub const START: u64 = 3;
    pub const SCHEME: u64 = 4;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = stream(42, &[1, 7]);
        let mut b = stream(42, &[1, 7]);
        let mut c = stream(42, &[1, 8]);
        let xa: f64 = a.random();
        let xb: f64 = b.random();
        let xc: f64 = c.random();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn derive_seed_depends_on_path_order() {
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    }
}
