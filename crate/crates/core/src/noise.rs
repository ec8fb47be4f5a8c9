//! Seeded standard-normal noise channels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ingest::Column;

/// `count` independent N(0, 1) columns named `noise_1 .. noise_count`, drawn
/// channel by channel from one ChaCha8 stream seeded with `seed`.
pub fn standard_normal_channels(count: usize, len: usize, seed: u64) -> Vec<Column> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=count)
        .map(|i| Column {
            name: format!("noise_{i}"),
            values: (0..len).map(|_| StandardNormal.sample(&mut rng)).collect(),
        })
        .collect()
}
