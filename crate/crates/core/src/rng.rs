//! Named, independent random streams derived from one master seed.
//!
//! Each consumer (placement, gossip, noise, coin flips) draws from its own
//! ChaCha stream, so adding a consumer never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const PLACEMENT: &str = "placement";
pub const GOSSIP: &str = "gossip";
pub const NOISE: &str = "noise";
pub const COIN: &str = "coin";

// FNV-1a, stable across platforms and releases.
fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn stream(master_seed: u64, name: &str) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(name));
    rng
}
