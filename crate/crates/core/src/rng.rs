//! Counter-based random streams keyed by `(master_seed, stream_index)`.
//!
//! Each stream is a ChaCha8 keystream: the key is derived from the master
//! seed, the 64-bit ChaCha stream id is the trajectory index and `counter`
//! is the word position. Output therefore depends only on these three
//! numbers and never on which worker draws it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identity of a random stream; a plain value that can be copied freely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
    /// Position in the stream, in 32-bit words.
    pub counter: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
            counter: 0,
        }
    }

    /// A generator positioned at this stream's counter.
    pub fn generator(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::from_seed(expand_seed(self.master_seed));
        rng.set_stream(self.stream_index);
        rng.set_word_pos(self.counter as u128);
        StreamRng { inner: rng }
    }
}

/// Live generator for one stream.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    /// The stream value at the generator's current position.
    pub fn position(&self, master_seed: u64) -> RngStream {
        RngStream {
            master_seed,
            stream_index: self.inner.get_stream(),
            counter: self.inner.get_word_pos() as u64,
        }
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

// SplitMix64 expansion of the 64-bit master seed into a 256-bit key.
fn expand_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    key
}
