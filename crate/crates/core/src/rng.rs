//! Counter-based seed splitting.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(root seed, stream id)`. Stream ids are derived from structured labels
//! (replication index, bootstrap draw index, ...) so results never depend on
//! the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a label.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    mix64(parent ^ mix64(label.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Independent generator for `(root, stream)`.
pub fn substream(root: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream);
    rng
}

/// Stream labels used across the crate, kept distinct so that purposes never
/// share draws.
pub mod label {
    pub const SERIES: u64 = 1;
    pub const BOOTSTRAP_GAMMA0: u64 = 2;
    pub const BOOTSTRAP_GAMMAK: u64 = 3;
    pub const REPLICATION: u64 = 4;
}
