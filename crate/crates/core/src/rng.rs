//! Reproducible random streams.
//!
//! A stream is a ChaCha8 key plus a 64-bit stream id. The key depends only on
//! `(seed, replica)`:
//!
//! ```text
//! word(x, i) = splitmix64_mix(x + (i + 1) * 0x9E3779B97F4A7C15)
//! key        = word(seed, 0) || word(seed, 1) || word(replica, 2) || word(replica, 3)
//! ```
//!
//! (each word little-endian). The mix is a bijection, so distinct
//! `(seed, replica)` pairs give distinct keys. The stream id packs the lane in
//! the top 8 bits, the zigzag-encoded level in the middle and the side
//! (right of zero / left of zero) in bit 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn word(x: u64, i: u64) -> u64 {
    mix(x.wrapping_add((i + 1).wrapping_mul(GOLDEN)))
}

/// Lane of a stream: which kind of object consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lane(pub u8);

impl Lane {
    pub const FIELD: Lane = Lane(0);
    pub const BUSEMANN_SEED: Lane = Lane(1);
    pub const AUX: Lane = Lane(2);
    pub const AUX2: Lane = Lane(3);
}

/// Right or left sub-stream of a two-sided line.
pub const RIGHT: u64 = 0;
pub const LEFT: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    seed: u64,
    replica: u64,
    id: u64,
}

impl Stream {
    pub fn new(seed: u64, replica: u64) -> Self {
        Stream { seed, replica, id: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    /// Stream dedicated to `(lane, level)` under the same key.
    pub fn lane(&self, lane: Lane, level: i64) -> Stream {
        let zigzag = ((level << 1) ^ (level >> 63)) as u64;
        let id = ((lane.0 as u64) << 56) | ((zigzag & ((1 << 55) - 1)) << 1);
        Stream { id, ..*self }
    }

    fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        let words = [
            word(self.seed, 0),
            word(self.seed, 1),
            word(self.replica, 2),
            word(self.replica, 3),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        key
    }

    /// Generator for one side of the stream (`RIGHT` or `LEFT`).
    pub fn rng(&self, side: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(self.id | (side & 1));
        rng
    }
}
