//! Random streams.
//!
//! Every chain owns one ChaCha8 stream. ChaCha is counter based: a stream is
//! fully identified by its 256-bit key and a 64-bit stream id, and its output
//! does not depend on platform or on what other streams have consumed. A
//! master seed is expanded into the key with `seed_from_u64`; the stream id is
//! derived from a path of indices (study component, grid point, replicate)
//! so that independent runs never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Stream `path` under `master`. Paths are folded with a 64-bit mix so that
/// `[a, b]` and `[b, a]` land on different stream ids.
pub fn stream(master: u64, path: &[u64]) -> ChainRng {
    let mut id: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in path {
        id = splitmix(id ^ splitmix(p.wrapping_add(0xD1B5_4A32_D192_ED03)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
