use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of run `run_index` from a base seed.
///
/// For a fixed base the map is a bijection of `u64` (an odd-multiplier
/// counter followed by an invertible finalizer), so distinct run indices
/// never share a seed and no run depends on the order others are spawned.
pub fn seed_spawn(base_seed: u64, run_index: u64) -> u64 {
    mix(mix(base_seed).wrapping_add(run_index.wrapping_mul(GOLDEN)))
}

/// Independent sub-stream of a run seed, e.g. data vs. initialization.
pub fn substream(seed: u64, stream: u64) -> u64 {
    seed_spawn(seed ^ 0xA5A5_A5A5_A5A5_A5A5, stream)
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
