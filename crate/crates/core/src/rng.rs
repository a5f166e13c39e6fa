use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Portable, reproducible generator used everywhere a seed is accepted.
pub type Prng = ChaCha8Rng;

pub fn prng(seed: u64) -> Prng {
    Prng::seed_from_u64(seed)
}

/// Generator for stream `stream` under base seed `seed`.
pub fn substream(seed: u64, stream: u64) -> Prng {
    let mut z = seed ^ stream.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    Prng::seed_from_u64(z ^ (z >> 31))
}
