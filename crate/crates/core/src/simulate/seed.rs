use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Root of a family of independent random streams.
///
/// Stream `k` is a ChaCha8 generator keyed by the root seed with stream id
/// `k`, so replicate `k` draws the same numbers no matter which worker runs
/// it or in what order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(root_seed: u64) -> Self {
        SeedSpec { root_seed }
    }

    /// Draw a root seed from the operating system.
    pub fn from_entropy() -> Self {
        SeedSpec::new(rand::random())
    }

    /// Independent generator for replicate `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut state = self.root_seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }

    /// Derived seed for a sub-task, e.g. one iteration of a solver.
    pub fn child(&self, tag: u64) -> SeedSpec {
        let mut state = self.root_seed ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03);
        splitmix64(&mut state);
        SeedSpec::new(splitmix64(&mut state))
    }
}

impl From<u64> for SeedSpec {
    fn from(root_seed: u64) -> Self {
        SeedSpec::new(root_seed)
    }
}
