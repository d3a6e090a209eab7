//! Random streams for the search.
//!
//! Every individual of every generation draws from its own ChaCha8 stream,
//! keyed by `(generation << 32) | individual` under the run seed. Breeding
//! order and thread count therefore never change which numbers an
//! individual sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SearchRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, generation: u64, individual: u64) -> SearchRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((generation << 32) | (individual & 0xffff_ffff));
    rng
}

/// Seed for one index label, derived from a master seed (FNV-1a over the
/// label, then a splitmix64 finalizer).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
