use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};

use super::eigen::eigenvalues;
use super::TransferModel;
use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-8;
/// Single-vector iterations before switching to a block of vectors.
const POWER_ITER: usize = 5_000;
const BLOCK_ITER: usize = 2_000;
/// Block sizes tried in turn; a block spanning the whole mean-zero space is exact.
const BLOCKS: [usize; 3] = [24, 128, 512];
/// Norm below which an iterate counts as annihilated.
const NULL_NORM: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    /// Modulus of the second eigenvalue of L.
    pub theta: f64,
    pub iterations: usize,
    /// L is nilpotent on the mean-zero subspace: some power maps the start vector to 0.
    pub nilpotent: bool,
    /// Number of vectors iterated together (1 for plain power iteration).
    pub block: usize,
}

struct Space<'a> {
    model: &'a TransferModel,
}

impl Space<'_> {
    fn norm(&self, f: &[f64]) -> f64 {
        libm::sqrt(self.dot(f, f))
    }

    fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        let w = self.model.weights();
        f.iter().zip(g).zip(w).map(|((a, b), m)| a * b * m).sum()
    }

    fn center(&self, f: &mut [f64]) {
        let w = self.model.weights();
        let m: f64 = f.iter().zip(w).map(|(a, m)| a * m).sum();
        f.iter_mut().for_each(|x| *x -= m);
    }

    fn step(&self, f: &[f64]) -> Vec<f64> {
        let mut u = self.model.apply(f);
        self.center(&mut u);
        u
    }

    /// Two passes of modified Gram-Schmidt; vectors that collapse are dropped.
    fn orthonormalise(&self, vs: Vec<Vec<f64>>, scale: f64) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
        for mut v in vs {
            let before = self.norm(&v);
            for _ in 0..2 {
                for q in &out {
                    let c = self.dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let r = self.norm(&v);
            if r > NULL_NORM * scale && r > 1e-10 * before {
                v.iter_mut().for_each(|x| *x /= r);
                out.push(v);
            }
        }
        out
    }
}

fn random_vector(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| (rng.next_u64() >> 11) as f64 / 9_007_199_254_740_992.0 - 0.5).collect()
}

/// Power iteration on μ-mean-zero functions; the invariant direction is removed
/// after every application. When the leading part of the spectrum is a cluster of
/// equal modulus (rotating complex pairs) the single vector never settles, and
/// the estimate is taken from Ritz values of an iterated block instead.
pub fn spectral_gap(model: &TransferModel) -> Result<SpectralEstimate> {
    let n = model.n();
    let sp = Space { model };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_5eed);
    let mut v = random_vector(&mut rng, n);
    sp.center(&mut v);
    let s = sp.norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let mut prev = f64::NAN;
    let mut prev2 = f64::NAN;
    for it in 1..=POWER_ITER {
        let mut u = sp.step(&v);
        let r = sp.norm(&u);
        if r < NULL_NORM {
            return Ok(SpectralEstimate { theta: 0.0, iterations: it, nilpotent: true, block: 1 });
        }
        u.iter_mut().for_each(|x| *x /= r);
        v = u;
        if libm::fabs(r - prev) <= REL_TOL * r {
            return Ok(SpectralEstimate { theta: r, iterations: it, nilpotent: false, block: 1 });
        }
        // A pair ±λ makes single-step ratios alternate; their geometric mean settles.
        let two = libm::sqrt(r * prev);
        if it > 2 && libm::fabs(two - prev2) <= REL_TOL * two {
            return Ok(SpectralEstimate { theta: two, iterations: it, nilpotent: false, block: 1 });
        }
        prev2 = two;
        prev = r;
    }
    let mut done = POWER_ITER;
    let mut last = Error::Internal("no block stage ran".into());
    for &b in &BLOCKS {
        let s = b.min(n.saturating_sub(1)).max(1);
        match block_gap(&sp, &mut rng, v.clone(), s, done) {
            Ok(e) => return Ok(e),
            Err(e) => last = e,
        }
        done += BLOCK_ITER;
        if s == n.saturating_sub(1) {
            break;
        }
    }
    Err(last)
}

fn block_gap(
    sp: &Space<'_>,
    rng: &mut rand_chacha::ChaCha8Rng,
    seed: Vec<f64>,
    s: usize,
    done: usize,
) -> Result<SpectralEstimate> {
    let n = sp.model.n();
    let mut start = Vec::with_capacity(s);
    start.push(seed);
    while start.len() < s {
        let mut v = random_vector(rng, n);
        sp.center(&mut v);
        start.push(v);
    }
    let mut basis = sp.orthonormalise(start, 1.0);
    let mut prev = f64::NAN;
    let mut stable = 0;
    for it in 1..=BLOCK_ITER {
        let images: Vec<Vec<f64>> = basis.iter().map(|q| sp.step(q)).collect();
        let k = basis.len();
        let h: Vec<Vec<f64>> = (0..k).map(|a| (0..k).map(|b| sp.dot(&basis[a], &images[b])).collect()).collect();
        let theta = eigenvalues(&h)
            .ok_or_else(|| Error::Internal("QR iteration on the Ritz matrix did not converge".into()))?
            .iter()
            .map(|&(re, im)| libm::hypot(re, im))
            .fold(0.0, f64::max);
        basis = sp.orthonormalise(images, 1.0);
        if basis.is_empty() {
            return Ok(SpectralEstimate { theta: 0.0, iterations: done + it, nilpotent: true, block: k });
        }
        if libm::fabs(theta - prev) <= REL_TOL * theta {
            stable += 1;
            if stable >= 3 {
                return Ok(SpectralEstimate { theta, iterations: done + it, nilpotent: false, block: k });
            }
        } else {
            stable = 0;
        }
        prev = theta;
    }
    Err(Error::Convergence {
        iterations: done + BLOCK_ITER,
        estimate: prev,
        last: basis.into_iter().next().unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MapSystem;

    #[test]
    fn dyadic_ulam_is_nilpotent() {
        let m = TransferModel::ulam(&MapSystem::doubling(), 64).unwrap();
        let e = spectral_gap(&m).unwrap();
        assert!(e.nilpotent && e.theta == 0.0);
    }

    #[test]
    fn odd_ulam_cluster_at_half() {
        for n in [15, 17, 33] {
            let m = TransferModel::ulam(&MapSystem::doubling(), n).unwrap();
            let e = spectral_gap(&m).unwrap();
            assert!((e.theta - 0.5).abs() < 1e-7, "N={n}: {e:?}");
        }
    }
}
