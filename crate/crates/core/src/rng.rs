//! Seed derivation. Every random component of a run draws from its own
//! ChaCha stream keyed by `(seed, component)` and selected by an index, so
//! results do not depend on the order in which components are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tags for the independent random components of a repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Component {
    Adversary = 1,
    Permutation = 2,
    Oracle = 3,
    Validation = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for stream `index` of `component` under `seed`.
pub fn substream(seed: u64, component: Component, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed ^ (component as u64).rotate_left(32);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
