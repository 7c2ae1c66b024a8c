//! Counter-based random substreams.
//!
//! Every simulation draws from ChaCha8 keyed by the user seed, with the
//! 64-bit stream id selecting an independent substream. Work is cut into
//! fixed units (a block of detection windows, one homodyne angle, one
//! bootstrap member), each with its own stream id, so results do not depend
//! on how units are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream-id namespaces, kept apart in the top byte.
#[derive(Clone, Copy, Debug)]
pub enum Purpose {
    Counting = 1,
    Homodyne = 2,
    Bootstrap = 3,
    PhotonSamples = 4,
}

pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (index & ((1 << 56) - 1)));
    rng
}

/// Runs `f` on a pool with exactly `workers` threads, or on the global pool
/// when `workers` is `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}
