use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root stream of an experiment. Child streams never alias it.
pub(crate) fn root_stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for repetition `index` (1-based) under `seed`.
pub(crate) fn child_stream(seed: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(index >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// splitmix64 finaliser over `(seed, index)`; used to derive per-team seeds.
pub(crate) fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
