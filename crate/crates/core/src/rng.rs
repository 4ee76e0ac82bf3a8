use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one seed.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub(crate) enum Stream {
    Mask = 1,
    Symbols = 2,
    Clutter = 3,
    Noise = 4,
    Trial = 5,
}

pub(crate) fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
