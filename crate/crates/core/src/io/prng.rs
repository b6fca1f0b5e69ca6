//! Counter-based, platform-independent random fields.
//!
//! Sample `i` of stream `seed` is the SplitMix64 output
//!
//! ```text
//! z = seed + (i + 1) * 0x9E3779B97F4A7C15        (wrapping u64 arithmetic)
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! u = (z >> 53 upper bits) / 2^53                in [0, 1)
//! ```
//!
//! mapped affinely onto `[lo, hi)`. Stateless counter indexing keeps fields
//! bit-identical across platforms and trivially reproducible from the seed
//! alone, which the snapshot-reproducibility guarantees rely on.

use std::sync::Arc;

use crate::field::Field;
use crate::grid::Grid;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer applied to `seed + (index + 1) * GAMMA`.
pub fn splitmix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform sample in `[0, 1)` for counter `index` of stream `seed`.
pub fn uniform_01(seed: u64, index: u64) -> f64 {
    (splitmix64(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform random field on `[lo, hi)`, one counter per grid point in
/// row-major order starting at `offset`. `zero_mean` subtracts the sample
/// mean afterwards.
pub fn seeded_uniform_field_offset(
    grid: &Arc<Grid>,
    seed: u64,
    offset: u64,
    lo: f64,
    hi: f64,
    zero_mean: bool,
) -> Field {
    assert!(lo < hi, "uniform range requires lo < hi");
    let span = hi - lo;
    let mut values: Vec<f64> = (0..grid.len())
        .map(|i| lo + span * uniform_01(seed, offset + i as u64))
        .collect();
    if zero_mean {
        let m = values.iter().sum::<f64>() / values.len() as f64;
        for v in values.iter_mut() {
            *v -= m;
        }
    }
    Field::from_values(grid, values)
}

/// Uniform random field keyed by `seed` alone (counter offset 0).
pub fn seeded_uniform_field(grid: &Arc<Grid>, seed: u64, lo: f64, hi: f64, zero_mean: bool) -> Field {
    seeded_uniform_field_offset(grid, seed, 0, lo, hi, zero_mean)
}
