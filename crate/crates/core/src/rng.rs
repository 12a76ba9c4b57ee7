//! Labeled random substreams derived from one master seed.
//!
//! Every stochastic component (weight init, dropout masks, Poisson draws,
//! shuffling, random transforms) asks for its own stream by label and index,
//! so adding a new consumer never perturbs the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator for `(seed, label, index)`.
pub fn substream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    // FNV-1a over the label keeps the mapping stable across builds.
    let mut label_hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        label_hash ^= u64::from(b);
        label_hash = label_hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mut state = seed ^ label_hash.rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
