//! Deterministic pseudo-random numbers.
//!
//! Every randomized component in this crate draws from this generator so
//! that a (seed, input) pair reproduces a run bit for bit on any platform.
//! The core is SplitMix64: one 64-bit state word, one mix per output.

/// SplitMix64 generator. `Rng::new(seed)` with the same seed always yields
/// the same stream.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound). Uses the high 64 bits of a 128-bit
    /// product, so the bias for any practical bound is below 2^-64.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below() requires a positive bound");
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Uniform element of a non-empty slice.
    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }
}

/// Seed for substream `stream` of a base seed. Used to hand independent
/// generators to the runs of a benchmark without correlating them.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix(base.wrapping_add(GAMMA).wrapping_add(stream.wrapping_mul(GAMMA)))
}
