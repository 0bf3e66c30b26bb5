//! Seed derivation. Every random stream in the crate is derived from one
//! master seed so a run is reproducible from that number alone.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

/// The generator used for all stochastic work.
pub type SimRng = Pcg64Mcg;

/// Stream tags for the independent consumers of a master seed.
pub mod stream {
    pub const PHYSICAL_LAYER: u64 = 0x5048_5953; // "PHYS"
    pub const CYBER_LAYER: u64 = 0x4359_4245; // "CYBE"
    pub const MONTE_CARLO: u64 = 0x4d43_4d43; // "MCMC"
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `index` into `master`. Distinct indices give statistically
/// independent seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
