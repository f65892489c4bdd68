//! Deterministic splitting of one root seed into independent random streams.
//!
//! Each purpose gets its own ChaCha20 stream (same key, distinct 64-bit
//! stream id), so consuming more draws for one purpose never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Data,
    Momentum,
    Accept,
    Proposal,
    /// Per-cell stream of a stability map.
    Cell(u64),
    /// Per-replication stream, e.g. independent chains launched from one seed.
    Replica(u64),
}

impl Purpose {
    fn stream_id(self) -> u64 {
        const CELL_BASE: u64 = 1 << 32;
        const REPLICA_BASE: u64 = 1 << 48;
        match self {
            Purpose::Data => 0,
            Purpose::Momentum => 1,
            Purpose::Accept => 2,
            Purpose::Proposal => 3,
            Purpose::Cell(i) => CELL_BASE + i,
            Purpose::Replica(i) => REPLICA_BASE + i,
        }
    }
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(purpose.stream_id());
    rng
}

/// Derives a child seed, e.g. for the `k`-th of several chains.
pub fn child_seed(seed: u64, k: u64) -> u64 {
    use rand::RngCore;
    stream(seed, Purpose::Replica(k)).next_u64()
}
