use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for trajectory `index` of a run seeded with
/// `master_seed`. Streams share the key and differ in the ChaCha stream id,
/// so results do not depend on how trajectories are scheduled.
pub fn seed_stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
