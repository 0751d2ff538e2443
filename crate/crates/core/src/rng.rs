//! Pinned pseudo-random number generation.
//!
//! Splits, perturbation draws and synthetic data all have to reproduce
//! bit-for-bit across hosts, library upgrades and other language ports, so
//! the generator is fixed here by algorithm and constants rather than taken
//! from a general-purpose RNG crate.
//!
//! Algorithm: xorshift64* (Vigna, 2014) with shift triple (12, 25, 27) and
//! output multiplier `0x2545_F491_4F6C_DD1D`. The 64-bit state is derived
//! from the user seed with one round of SplitMix64 (increment
//! `0x9E37_79B9_7F4A_7C15`, mixers `0xBF58_476D_1CE4_E5B9` and
//! `0x94D0_49BB_1331_11EB`); a zero result is replaced by the SplitMix64
//! increment since xorshift has an all-zero fixed point.

const SPLITMIX_INCREMENT: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLITMIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const SPLITMIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;
const XORSHIFT_STAR_MUL: u64 = 0x2545_F491_4F6C_DD1D;

/// One SplitMix64 output for `seed`.
pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(SPLITMIX_INCREMENT);
    z = (z ^ (z >> 30)).wrapping_mul(SPLITMIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(SPLITMIX_MUL_2);
    z ^ (z >> 31)
}

/// xorshift64* generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    pub fn new(seed: u64) -> Self {
        let state = match splitmix64(seed) {
            0 => SPLITMIX_INCREMENT,
            s => s,
        };
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(XORSHIFT_STAR_MUL)
    }

    /// Uniform draw in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)` by 128-bit multiply-shift.
    ///
    /// The bias is at most `bound / 2^64`, far below anything observable for
    /// index-sized bounds.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below requires a positive bound");
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Standard normal draw via the Box-Muller transform (cosine branch).
    ///
    /// Consumes exactly two uniforms per call, so the stream position is a
    /// pure function of the number of draws.
    pub fn next_gaussian(&mut self) -> f64 {
        // 1 - u lies in (0, 1], keeping ln finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
