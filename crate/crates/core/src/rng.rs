//! Seed discipline. A master seed fans out into independent ChaCha streams,
//! one per component, so two methods run on the same seed see exactly the
//! same contexts and noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Contexts = 1,
    Noise = 2,
    Candidates = 3,
    Order = 4,
    Test = 5,
    Actions = 6,
    Policy = 7,
}

pub fn stream(master: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(which as u64);
    rng
}
