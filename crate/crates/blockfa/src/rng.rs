//! Portable seeded normal sampler.
//!
//! The generator is pinned so that golden CSVs reproduce across platforms:
//! ChaCha8 seeded via `seed_from_u64`, uniforms built as
//! `(next_u64() >> 11) * 2^-53`, normals by the Box-Muller transform
//! `sqrt(-2 ln u1) * cos(2π u2)` with the pair's second value
//! `sqrt(-2 ln u1) * sin(2π u2)` used next.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct NormalSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSource {
    pub fn new(seed: u64) -> Self {
        NormalSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in the half-open interval (0, 1].
    fn next_uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
