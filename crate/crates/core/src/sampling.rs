//! Seeded sampling of distinct items from a large index range.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draws distinct indices from `0..total` without replacement.
///
/// This is a lazily materialized Fisher-Yates shuffle, so the sequence is a
/// pure function of the seed and the first `m` draws are identical no
/// matter how many draws follow.
#[derive(Debug, Clone)]
pub struct PrefixSampler {
    rng: ChaCha8Rng,
    total: u64,
    drawn: u64,
    swapped: HashMap<u64, u64>,
}

impl PrefixSampler {
    pub fn new(total: u64, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            total,
            drawn: 0,
            swapped: HashMap::new(),
        }
    }

    pub fn remaining(&self) -> u64 {
        self.total - self.drawn
    }

    /// The next `count` draws, fewer if the range runs out.
    pub fn draw(&mut self, count: u64) -> Vec<u64> {
        let count = count.min(self.remaining());
        (0..count).filter_map(|_| self.next()).collect()
    }
}

impl Iterator for PrefixSampler {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.drawn >= self.total {
            return None;
        }
        let i = self.drawn;
        let j = self.rng.random_range(i..self.total);
        let at_j = self.swapped.get(&j).copied().unwrap_or(j);
        let at_i = self.swapped.get(&i).copied().unwrap_or(i);
        self.swapped.insert(j, at_i);
        self.swapped.remove(&i);
        self.drawn += 1;
        Some(at_j)
    }
}

/// Deterministic 64-bit mix used to derive per-item RNG seeds.
pub fn mix_seed(seed: u64, items: &[usize]) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &x in items {
        h = splitmix(h ^ x as u64);
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
