//! Counter-based random numbers.
//!
//! Every uniform is a pure function of `(key, stream, index)`, so subjects can
//! be simulated in any order or in parallel and still reproduce bit-for-bit.
//! The mixer is the SplitMix64 finaliser.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed: `mix64(seed + GOLDEN * (index + 1))`.
///
/// Replicate `r` of an experiment with master seed `m` uses
/// `derive_seed(m, r)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: mix64(seed ^ 0x6A09_E667_F3BC_C908) }
    }

    /// An independent generator for a named purpose (e.g. control draws).
    pub fn fork(&self, domain: u64) -> Self {
        Self {
            key: derive_seed(self.key, domain ^ 0xA5A5_A5A5_0000_0000),
        }
    }

    pub fn bits(&self, stream: u64, index: u64) -> u64 {
        let s = mix64(self.key.wrapping_add(GOLDEN.wrapping_mul(stream.wrapping_add(1))));
        mix64(s ^ GOLDEN.wrapping_mul(index.wrapping_add(1)))
    }

    /// Uniform on [0, 1) with 53 bits of precision.
    pub fn uniform(&self, stream: u64, index: u64) -> f64 {
        (self.bits(stream, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
