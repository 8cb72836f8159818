//! Seed derivation.
//!
//! Every random stream in the crate is keyed by a master seed plus a short
//! tuple of integers (replica, site, stream kind, ...). The key is hashed
//! with the SplitMix64 finalizer and used to seed an independent
//! Xoshiro256++ generator, so streams can be created in any order, on any
//! thread, and always reproduce the same numbers.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// Stream kinds. The discriminants are part of the reproducibility contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Voting = 1,
    Rerandomization = 2,
    Tie = 3,
    Gillespie = 4,
    Replica = 5,
    Bootstrap = 6,
    TreeSpins = 7,
    Channel = 8,
    Coalescence = 9,
    Kernel = 10,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a master seed and a key tuple into a 64-bit sub-seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    h
}

/// Generator for the `kind` stream of `site` under `master`.
pub fn stream_rng(master: u64, site: usize, kind: StreamKind) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, &[site as u64, kind as u64]))
}

/// Master seed of replica `index` in a batch seeded by `master`.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, &[StreamKind::Replica as u64, index])
}

pub fn rng_from(master: u64, parts: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, parts))
}
