use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::{MapKind, MapSystem, Point};

/// Counter-based stream for trajectory `index` under `seed`: the same pair always
/// yields the same bits, whatever the order in which trajectories are run.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform double in [0, 1) from the top 53 bits of one word.
#[inline]
pub fn uniform01<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

pub(crate) fn draw<R: RngCore>(map: &MapSystem, rng: &mut R) -> Point {
    match map.kind() {
        MapKind::Toral(_) => Point::Torus([uniform01(rng), uniform01(rng)]),
        _ => {
            let u = uniform01(rng);
            let x = map.density().inverse_cdf(u);
            Point::Circle(if x >= 1.0 { 0.0 } else { x })
        }
    }
}

/// M points distributed by μ; point `t` is drawn from stream `t`.
pub fn sample_initial(map: &MapSystem, seed: u64, m: usize) -> Vec<Point> {
    (0..m)
        .map(|t| {
            let mut rng = trajectory_rng(seed, t as u64);
            draw(map, &mut rng)
        })
        .collect()
}
