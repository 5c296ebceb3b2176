//! Branchwise enumeration of the affine pieces of T^k on piecewise-linear maps.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::MapSystem;
use crate::error::{Error, Result};

/// On `[a, b)` the iterate is `T^j x = s·x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub c: f64,
}

impl Piece {
    /// The part of the piece where `T^j x` lies in `[lo, hi)`.
    pub fn pull_back(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let x0 = (lo - self.c) / self.s;
        let x1 = (hi - self.c) / self.s;
        let (x0, x1) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        let x0 = x0.max(self.a);
        let x1 = x1.min(self.b);
        (x1 > x0).then_some((x0, x1))
    }
}

/// Refine `start` through `k` applications of T and hand every final piece to `visit`.
/// Fails with a resource error once more than `cap` pieces have been produced.
pub fn for_each_piece<F: FnMut(&Piece)>(map: &MapSystem, start: &[(f64, f64)], k: usize, cap: u64, mut visit: F) -> Result<u64> {
    let branches = map.branches();
    if branches.is_empty() {
        return Err(Error::UnsupportedMap { op: "branchwise preimages", map: map.name() });
    }
    let mut stack: Vec<(Piece, usize)> = vec![];
    for &(a, b) in start.iter().rev() {
        if b > a {
            stack.push((Piece { a, b, s: 1.0, c: 0.0 }, 0));
        }
    }
    let mut produced = stack.len() as u64;
    while let Some((p, depth)) = stack.pop() {
        if depth == k {
            visit(&p);
            continue;
        }
        let y0 = p.s * p.a + p.c;
        let y1 = p.s * p.b + p.c;
        let (ylo, yhi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
        for br in branches.iter().rev() {
            let lo = ylo.max(br.lo);
            let hi = yhi.min(br.hi);
            if hi <= lo {
                continue;
            }
            if let Some((a, b)) = p.pull_back(lo, hi) {
                produced += 1;
                if produced > cap {
                    return Err(Error::Resource { what: "preimage intervals", count: produced, cap });
                }
                stack.push((Piece { a, b, s: br.slope * p.s, c: br.slope * p.c + br.offset }, depth + 1));
            }
        }
    }
    Ok(produced)
}

/// The arc (lo, lo + len) of the circle as at most two intervals of [0, 1).
pub fn split_arc(lo: f64, len: f64) -> Vec<(f64, f64)> {
    if len >= 1.0 {
        return vec![(0.0, 1.0)];
    }
    let lo = lo - libm::floor(lo);
    let hi = lo + len;
    if hi <= 1.0 {
        vec![(lo, hi)]
    } else {
        vec![(0.0, hi - 1.0), (lo, 1.0)]
    }
}
