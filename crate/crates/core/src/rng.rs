//! Seeded random streams.
//!
//! Every replicate owns a ChaCha8 stream keyed by `(seed, n, purpose)` and
//! positioned on the replicate id, so a replicate's draws never depend on
//! which worker ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// What a stream is used for; separates otherwise identical keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Path = 1,
    Immigration = 2,
    Offspring = 3,
    SingleAncestor = 4,
    Calibration = 5,
}

pub fn stream(seed: u64, n: usize, purpose: Purpose, replicate: u64) -> Stream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(n as u64).to_le_bytes());
    key[16] = purpose as u8;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate);
    rng
}
