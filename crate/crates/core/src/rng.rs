//! Reproducible random streams.
//!
//! A stream is a `(seed, stream index)` pair mapped onto a ChaCha8 key and
//! nonce. Work split into fixed-size chunks reads each chunk from its own
//! far-apart word position, so results never depend on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per chunk; 2^40 u32 words is far beyond any chunk's needs.
const CHUNK_WORDS: u128 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Generator positioned at the start of chunk `chunk` of this stream.
    pub fn chunk_rng(&self, chunk: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_word_pos(CHUNK_WORDS * chunk as u128);
        rng
    }

    /// A child stream keyed by `sub`; distinct `(stream, sub)` pairs give
    /// distinct stream indices with overwhelming probability.
    pub fn derive(&self, sub: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(sub.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
