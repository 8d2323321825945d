//! Seeded, splittable randomness.
//!
//! Every random draw in the crate flows from an [`RngHandle`]. A handle is a
//! plain `(seed, stream_id)` pair; the generator it produces is a ChaCha8
//! stream keyed by the seed, with the stream id selecting one of 2^64
//! independent keystreams. Child handles are derived deterministically with
//! [`RngHandle::split`], so a computation that splits by position (trial
//! index, tree node, restart number) draws the same numbers no matter which
//! thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngHandle {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngHandle {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A fresh generator positioned at the start of this handle's stream.
    pub fn rng(&self) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derive the `child`-th sub-stream. The child's key mixes the parent's
    /// seed and stream, so siblings of different parents never collide.
    pub fn split(&self, child: u64) -> RngHandle {
        let key = splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0x5851_f42d_4c95_7f2d)));
        RngHandle {
            seed: key,
            stream_id: child,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
