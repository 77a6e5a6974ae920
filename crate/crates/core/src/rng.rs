//! Seeded random streams.
//!
//! Every random quantity comes from a `ChaCha8Rng`. Independent work units
//! (replicas, sampled graphs, pilots) get their own stream: the master seed
//! keys the generator and the unit index selects one of its 2⁶⁴ streams, so
//! results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream reserved for the fixed graph of conditional experiments.
pub const FIXED_GRAPH_STREAM: u64 = u64::MAX;
/// Stream reserved for pilot runs of the horizon search.
pub const PILOT_STREAM: u64 = u64::MAX - 1;

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
