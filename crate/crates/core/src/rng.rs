//! Counter-addressed Gaussian streams.
//!
//! Every random quantity in the crate is read from a ChaCha8 keystream
//! addressed by `(seed, stream, position)`. A row of normals at time `t`
//! always lives at the same keystream offset, so draws do not depend on the
//! order in which replications or rows are generated.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of one independent keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub stream: u64,
}

impl StreamKey {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Independent sub-key for a named component of the same replication.
    pub fn child(self, tag: u64) -> Self {
        Self {
            seed: mix64(self.seed ^ mix64(tag.wrapping_add(0xA5A5_5A5A))),
            stream: self.stream,
        }
    }

    pub fn normals(self, width: usize) -> NormalStream {
        NormalStream::new(self, width)
    }
}

/// Rows of `width` standard normals, row `t` at a fixed keystream offset.
pub struct NormalStream {
    rng: ChaCha8Rng,
    width: usize,
    words_per_row: u128,
}

impl NormalStream {
    pub fn new(key: StreamKey, width: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
        rng.set_stream(key.stream);
        // Box-Muller consumes two u64 (four u32 words) per pair of normals.
        let pairs = width.div_ceil(2).max(1) as u128;
        Self {
            rng,
            width,
            words_per_row: pairs * 4,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Fills `out` (length `width`) with the normals of row `t`.
    pub fn row(&mut self, t: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.width);
        self.rng.set_word_pos(t as u128 * self.words_per_row);
        let mut i = 0;
        while i < self.width {
            let (a, b) = box_muller(self.rng.next_u64(), self.rng.next_u64());
            out[i] = a;
            if i + 1 < self.width {
                out[i + 1] = b;
            }
            i += 2;
        }
    }

    /// Next row in sequence without repositioning.
    pub fn next_row(&mut self, out: &mut [f64]) {
        let mut i = 0;
        while i < self.width {
            let (a, b) = box_muller(self.rng.next_u64(), self.rng.next_u64());
            out[i] = a;
            if i + 1 < self.width {
                out[i + 1] = b;
            }
            i += 2;
        }
    }
}

/// Uniform on (0, 1], 53-bit resolution.
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let r = (-2.0 * open_unit(a).ln()).sqrt();
    let theta = std::f64::consts::TAU * open_unit(b);
    (r * theta.cos(), r * theta.sin())
}

/// Uniform integers for resampling.
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(key: StreamKey) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
        rng.set_stream(key.stream);
        Self { rng }
    }

    /// Index in `0..n` (Lemire's multiply-shift, bias below 2^-64 * n).
    pub fn index(&mut self, n: usize) -> usize {
        ((self.rng.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
