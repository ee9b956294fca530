//! Seeded standard-normal sampling (Box-Muller over a `ChaCha` stream).
//!
//! Kept in-tree so every consumer draws from the same fully pinned
//! transformation; layout initialization and corpus simulation both depend on
//! byte-stable sampling for a given seed.

use rand::Rng;

/// One standard-normal draw via the Box-Muller transform.
///
/// Consumes exactly two uniform draws from `rng` per call.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
