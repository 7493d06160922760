//! Counter-based random streams.
//!
//! Simulations here must be reproducible bit-for-bit across thread counts
//! and across runs, and must allow any `(path, step)` cell to be generated
//! independently of the others. Sequential generators cannot do that, so we
//! derive a separate splitmix64 stream per cell: the stream key mixes
//! `(seed, stream, path, step)`, and draws within a cell walk the splitmix64
//! counter. Two cells whose keys differ in a single bit produce unrelated
//! output, which is the property the key schedule is built on.
//!
//! Normal variates come from Box-Muller on the raw uniforms. This costs a
//! transcendental pair per two normals but keeps the draw count per cell
//! fixed, which the determinism contract depends on; rejection samplers
//! consume a data-dependent number of uniforms.

use std::f64::consts::PI;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 output mixing.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream tags separating independent uses of the same `(seed, path, step)`.
pub mod stream {
    /// Initial-condition draws.
    pub const INIT: u64 = 1;
    /// Driving noise of a simulated chain.
    pub const NOISE: u64 = 2;
    /// Auxiliary randomness (test-function sampling, scrambling).
    pub const AUX: u64 = 3;
}

/// One independent substream of random draws.
#[derive(Clone, Debug)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    /// Substream keyed by `(seed, stream, path, step)`.
    pub fn substream(seed: u64, stream: u64, path: u64, step: u64) -> Self {
        let mut key = mix(seed.wrapping_add(GOLDEN));
        key = mix(key ^ stream.wrapping_mul(0xA24B_AED4_963E_E407));
        key = mix(key ^ path.wrapping_mul(0x9FB2_1C65_1E98_DF25));
        key = mix(key ^ step.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        CounterRng { state: key }
    }

    #[cfg(test)]
    fn from_raw_state(state: u64) -> Self {
        CounterRng { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `(0, 1]`; safe to pass to `ln`.
    #[inline]
    fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard normals (Box-Muller); consumes exactly two
    /// `u64` draws.
    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let r = (-2.0 * self.uniform_open().ln()).sqrt();
        let theta = 2.0 * PI * self.uniform();
        (r * theta.cos(), r * theta.sin())
    }

    /// One standard normal; the pair partner is discarded.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.normal_pair().0
    }

    /// Fill `out` with standard normals. Consumption is `2 * ceil(len / 2)`
    /// `u64` draws regardless of content.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        for pair in &mut chunks {
            let (a, b) = self.normal_pair();
            pair[0] = a;
            pair[1] = b;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.normal();
        }
    }
}
