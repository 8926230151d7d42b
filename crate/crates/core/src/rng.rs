//! Deterministic random streams.
//!
//! Every stochastic operation draws from ChaCha20 (a counter-based stream
//! cipher generator). The 64-bit user seed is expanded into the 256-bit key
//! with `SeedableRng::seed_from_u64`, and independent uses of the same seed
//! are separated by ChaCha's 64-bit stream id rather than by sharing one
//! mutable generator.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// A user-facing 64-bit seed. The same seed always yields a bit-identical
/// sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

impl RngSeed {
    /// The generator for stream `stream` of this seed.
    pub fn stream(self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }

    /// A child seed, used when a sub-operation takes its own [`RngSeed`].
    pub fn derive(self, tag: u64) -> RngSeed {
        // splitmix64 finalizer over seed and tag
        let mut z = self.0 ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}
