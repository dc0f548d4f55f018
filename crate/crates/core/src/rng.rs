use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for task `stream` under the global `seed`. Streams
/// depend only on the pair, never on which worker runs the task.
pub fn derive(seed: u64, stream: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream.wrapping_add(1))))
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tags separating the purposes a single run seed is used for.
pub mod stream {
    pub const INIT: u64 = 1 << 40;
    pub const SCHEDULE: u64 = 2 << 40;
    pub const MCMC: u64 = 3 << 40;
    pub const ANALYSIS: u64 = 4 << 40;
}
