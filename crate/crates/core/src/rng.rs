//! Seeded random streams.
//!
//! One master seed feeds several independent ChaCha8 streams, keyed by a
//! replication index and a purpose, so that chain uniforms, mixture
//! selectors and auxiliary normals never share draws.

use rand::distr::Open01;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Chain uniforms `W_t` (and fresh uniforms for mixture branches).
    ChainUniforms = 0,
    /// Mixture component and branch selectors.
    Selectors = 1,
    /// I.i.d. standard normals `X_i`.
    IidNormal = 2,
}

/// Stream for replication `rep` (must be below `2^62`) and `purpose`.
pub fn stream(seed: u64, rep: u64, purpose: Purpose) -> ChaCha8Rng {
    debug_assert!(rep < 1 << 62);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((rep << 2) | purpose as u64);
    rng
}

/// Uniform draw on the open interval `(0, 1)`.
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}
