//! Counter-based seeding.
//!
//! Every random draw in a run comes from `ChaCha8Rng::seed_from_u64(seed)` on
//! the stream numbered by its [`Purpose`]. Streams are independent, so adding
//! a purpose or a seed never changes the draws of an existing (seed, purpose)
//! pair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Embedding = 1,
    Adversary = 2,
    LearnerPool = 3,
    Utilities = 4,
    Game = 5,
}

pub fn rng(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}
