//! Per-trajectory random streams.
//!
//! Each trajectory owns one ChaCha8 stream keyed by its seed. Round `t` always
//! consumes exactly `K + 1` uniforms (`K` for the loss vector, one for the arm
//! draw), whatever the policy or diagnostics settings, so a given
//! `(seed, round)` pair always sees the same draws.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct RoundStream {
    rng: ChaCha8Rng,
}

impl RoundStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Fills `loss_uniforms` and returns the arm-selection uniform.
    pub fn round(&mut self, loss_uniforms: &mut [f64]) -> f64 {
        for u in loss_uniforms.iter_mut() {
            *u = self.uniform();
        }
        self.uniform()
    }
}
