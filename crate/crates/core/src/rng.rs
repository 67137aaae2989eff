//! Seeded random streams.
//!
//! Every trial draws from its own ChaCha stream keyed by `(seed, step)`, so a
//! run can be resumed at any step without replaying earlier draws and two
//! policies run with the same seeds see the same participants and noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, step: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

/// The three independent seeds a run needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub demographics: u64,
    pub bandit: u64,
    pub backend: u64,
}

impl Seeds {
    /// Derives all three seeds from one master seed (splitmix64 steps).
    pub fn from_master(seed: u64) -> Self {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        Seeds {
            demographics: next(),
            bandit: next(),
            backend: next(),
        }
    }
}
