//! Named, reproducible RNG substreams.
//!
//! Every random choice in the crate flows from one master seed through a named
//! substream, so a whole run (restarts, per-K scans, synthetic draws) is
//! reproducible from a single `u64` and individual stages stay independent of
//! each other's consumption.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a reproducible RNG for the substream `name` of `master`.
///
/// The same `(master, name)` pair always yields the same stream, on every
/// platform; distinct names yield streams with unrelated seeds.
pub fn substream(master: u64, name: &str) -> ChaCha8Rng {
    let mut state = master;
    let _ = splitmix64(&mut state);
    for byte in name.as_bytes() {
        state ^= u64::from(*byte);
        let _ = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
