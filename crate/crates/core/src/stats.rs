//! Seeded random streams and binomial confidence intervals.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator used by every simulator in the crate.
pub type SimRng = ChaCha8Rng;

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

/// Independent generator for stream `index` of `seed`.
///
/// Work split by stream index is reproducible whatever the number of worker
/// threads.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed for job `index` of a run seeded with `seed`.
///
/// Drawn from streams counted down from `u64::MAX`, away from the low
/// stream numbers the simulators use for a given seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    substream(seed, u64::MAX - index).next_u64()
}

/// Half width of the Wilson score interval for `successes` out of `trials`.
pub fn wilson_half_width(successes: u64, trials: u64, z: f64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}
