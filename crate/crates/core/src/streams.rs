//! Deterministic, splittable random-number streams.
//!
//! Every replicate draws from its own counter-based generator keyed by
//! (master seed, module id, replicate index), so aggregated results do not
//! depend on worker count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Module ids used as stream keys.
pub mod module_id {
    pub const MECHANISM: u32 = 1;
    pub const CSBP: u32 = 2;
    pub const MASS: u32 = 3;
    pub const GW: u32 = 4;
    pub const CRT: u32 = 5;
    pub const HARNESS: u32 = 6;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for one (module, replicate) cell of a run.
pub fn substream(master_seed: u64, module: u32, replicate: u64) -> ChaCha8Rng {
    let mut h = splitmix64(master_seed ^ 0x6a09_e667_f3bc_c908);
    h = splitmix64(h ^ u64::from(module).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    h = splitmix64(h ^ replicate.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    let mut seed = [0u8; 32];
    let mut s = h;
    for chunk in seed.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
