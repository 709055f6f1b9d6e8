//! Deterministic 64-bit PRNG used by the synthetic-scene generator and the
//! degrader.
//!
//! The generator is the splitmix construction: a 64-bit counter advanced by
//! the golden-ratio increment, finalized by two xor-multiply rounds. It uses
//! integer arithmetic only, so identical seeds produce identical streams on
//! every platform. Gaussian draws are approximated by a 12-term uniform sum
//! (Irwin-Hall), again avoiding transcendental functions whose libm
//! implementations differ across platforms.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 finalizer. Exposed so callers can derive independent
/// sub-stream seeds from a base seed plus integer tags.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed for sub-stream `tag` of `base`. Used to give every
/// scene and every instance its own stream so results do not depend on
/// evaluation order or parallelism.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    mix(base ^ mix(tag.wrapping_add(GOLDEN)))
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero. Plain modulo: the
    /// bias for desk-scale `n` is far below anything observable and the
    /// mapping stays trivially portable.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// Uniform integer in `[lo, hi]` (inclusive).
    pub fn next_in(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        lo + self.next_below(hi - lo + 1)
    }

    /// Uniform f64 in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard-normal approximation: sum of 12 uniforms minus 6.
    /// Exact tails are irrelevant here; bit-reproducibility is not.
    pub fn next_gaussian(&mut self) -> f64 {
        let mut acc = 0.0;
        for _ in 0..12 {
            acc += self.next_f64();
        }
        acc - 6.0
    }
}
