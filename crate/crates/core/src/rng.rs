//! Keyed random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is derived from
//! `(seed, purpose)` and whose 64-bit stream id is the worker index. Two
//! streams that differ in any of the three components never overlap, so
//! independence between, say, the two sides of a response identity is a
//! property of the key layout rather than of careful seeding at call sites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Initial condition and time-sampling jitter of an ergodic trajectory.
    Trajectory,
    /// Independent draws from the equilibrium collision measure.
    Nu0Samples,
    /// Series side of a response check. The direct side runs on
    /// `Trajectory` streams, so the two are independent.
    SeriesSide,
    /// Horizon sampling.
    Horizon,
    /// Starting points of diagnostics such as the expansion estimate.
    Diagnostic,
    /// Free-form tag for user code and tests.
    Custom(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Trajectory => 1,
            Purpose::Nu0Samples => 2,
            Purpose::SeriesSide => 3,
            Purpose::Horizon => 5,
            Purpose::Diagnostic => 6,
            Purpose::Custom(k) => 0x1_0000_0000 | u64::from(k),
        }
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream keyed by `(seed, worker, purpose)`.
pub fn stream(seed: u64, worker: u64, purpose: Purpose) -> StreamRng {
    let mut state = seed ^ purpose.tag().wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(worker);
    rng
}

/// Seed for the `index`-th member of a family of runs (e.g. one per grid
/// point), decorrelated from `seed` and from the other members.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed ^ index.wrapping_add(1).wrapping_mul(0xA24B_AED4_963E_E407);
    splitmix64(&mut state)
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
