//! Counter-based random substreams.
//!
//! Every (seed, point, run) triple addresses its own ChaCha8 stream, so a
//! draw never depends on which worker produced it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for run `run` at grid point `point` under master `seed`.
pub fn substream(seed: u64, point: u64, run: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&point.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(run);
    rng
}
