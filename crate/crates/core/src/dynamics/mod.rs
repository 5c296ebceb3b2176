//! Expanding maps, their invariant densities and orbits.

mod bits;
mod density;
mod sample;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use bits::{exact_bit_orbit, BitSource, RngBits, WordBits};
pub use density::Density;
pub use sample::{sample_initial, trajectory_rng, uniform01};
pub(crate) use sample::draw;

use crate::error::{param, Error, Result};
use crate::math::frac;

/// A point of the circle [0, 1) or of the 2-torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Circle(f64),
    Torus([f64; 2]),
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::Circle(x)
    }
}

impl Point {
    pub fn circle(self) -> Option<f64> {
        match self {
            Point::Circle(x) => Some(x),
            Point::Torus(_) => None,
        }
    }
}

/// Cell `k` of a Markov partition maps affinely onto the union of cells
/// `first..=last`, preserving or reversing orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkovBranch {
    pub first: usize,
    pub last: usize,
    pub increasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Doubling,
    Beta(f64),
    Tent,
    Gauss,
    MarkovLinear {
        partition: Vec<f64>,
        branches: Vec<MarkovBranch>,
    },
    Toral([u32; 2]),
}

/// Affine branch `x ↦ slope·x + offset` on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
    pub offset: f64,
}

impl Branch {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.slope * x + self.offset
    }

    /// Image interval as (low, high).
    pub fn image(&self) -> (f64, f64) {
        let a = self.apply(self.lo);
        let b = self.apply(self.hi);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Preimage of [a, b) inside the branch domain, if nonempty.
    pub fn preimage(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        let (ylo, yhi) = self.image();
        let a = a.max(ylo);
        let b = b.min(yhi);
        if b <= a {
            return None;
        }
        let xa = (a - self.offset) / self.slope;
        let xb = (b - self.offset) / self.slope;
        let (x0, x1) = if xa <= xb { (xa, xb) } else { (xb, xa) };
        let x0 = x0.max(self.lo);
        let x1 = x1.min(self.hi);
        (x1 > x0).then_some((x0, x1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSystem {
    kind: MapKind,
    branches: Vec<Branch>,
    density: Density,
    min_expansion: f64,
}

impl MapSystem {
    pub fn doubling() -> Self {
        MapSystem {
            kind: MapKind::Doubling,
            branches: vec![
                Branch { lo: 0.0, hi: 0.5, slope: 2.0, offset: 0.0 },
                Branch { lo: 0.5, hi: 1.0, slope: 2.0, offset: -1.0 },
            ],
            density: Density::Uniform,
            min_expansion: 2.0,
        }
    }

    pub fn tent() -> Self {
        MapSystem {
            kind: MapKind::Tent,
            branches: vec![
                Branch { lo: 0.0, hi: 0.5, slope: 2.0, offset: 0.0 },
                Branch { lo: 0.5, hi: 1.0, slope: -2.0, offset: 2.0 },
            ],
            density: Density::Uniform,
            min_expansion: 2.0,
        }
    }

    pub fn gauss() -> Self {
        MapSystem {
            kind: MapKind::Gauss,
            branches: Vec::new(),
            density: Density::Gauss,
            // |T'(x)| = 1/x² ≥ 1 with T² uniformly expanding; the first-return
            // expansion of T² is at least (3 + √5)/2.
            min_expansion: 2.618_033_988_749_895,
        }
    }

    /// x ↦ βx mod 1 with its Parry measure.
    pub fn beta(beta: f64) -> Result<Self> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(param(format!("beta must be a finite real > 1, got {beta}")));
        }
        let whole = libm::floor(beta);
        let integral = whole == beta;
        let mut branches = Vec::new();
        for k in 0..whole as usize {
            branches.push(Branch {
                lo: k as f64 / beta,
                hi: ((k + 1) as f64 / beta).min(1.0),
                slope: beta,
                offset: -(k as f64),
            });
        }
        if integral {
            branches.last_mut().unwrap().hi = 1.0;
        } else {
            branches.push(Branch { lo: whole / beta, hi: 1.0, slope: beta, offset: -whole });
        }
        let density = if integral { Density::Uniform } else { parry_density(beta) };
        Ok(MapSystem { kind: MapKind::Beta(beta), branches, density, min_expansion: beta })
    }

    /// Markov piecewise-linear map from its partition and per-cell branch targets.
    pub fn markov_linear(partition: Vec<f64>, targets: Vec<MarkovBranch>) -> Result<Self> {
        let m = partition.len().saturating_sub(1);
        if m < 1 || partition[0] != 0.0 || partition[m] != 1.0 {
            return Err(param("partition must start at 0 and end at 1"));
        }
        if partition.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(param("partition must be strictly increasing"));
        }
        if targets.len() != m {
            return Err(param(format!("{} cells but {} branches", m, targets.len())));
        }
        let mut branches = Vec::with_capacity(m);
        let mut min_expansion = f64::INFINITY;
        for (k, t) in targets.iter().enumerate() {
            if t.first > t.last || t.last >= m {
                return Err(param(format!("branch {k} has an invalid target range")));
            }
            let (lo, hi) = (partition[k], partition[k + 1]);
            let (ylo, yhi) = (partition[t.first], partition[t.last + 1]);
            let s = (yhi - ylo) / (hi - lo);
            if !(s > 1.0) {
                return Err(param(format!("branch {k} is not expanding (slope {s})")));
            }
            min_expansion = min_expansion.min(s);
            let b = if t.increasing {
                Branch { lo, hi, slope: s, offset: ylo - s * lo }
            } else {
                Branch { lo, hi, slope: -s, offset: yhi + s * lo }
            };
            branches.push(b);
        }
        let values = markov_density(&partition, &targets)?;
        let density = Density::step(partition.clone(), values);
        Ok(MapSystem {
            kind: MapKind::MarkovLinear { partition, branches: targets },
            branches,
            density,
            min_expansion,
        })
    }

    pub fn toral(factors: [u32; 2]) -> Result<Self> {
        if factors.iter().any(|&k| k < 2) {
            return Err(param("toral expansion factors must be integers ≥ 2"));
        }
        Ok(MapSystem {
            kind: MapKind::Toral(factors),
            branches: Vec::new(),
            density: Density::Uniform,
            min_expansion: factors[0].min(factors[1]) as f64,
        })
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            MapKind::Doubling => "doubling".into(),
            MapKind::Beta(b) => format!("beta({b})"),
            MapKind::Tent => "tent".into(),
            MapKind::Gauss => "gauss".into(),
            MapKind::MarkovLinear { .. } => "markov-piecewise-linear".into(),
            MapKind::Toral(k) => format!("toral-2d({}, {})", k[0], k[1]),
        }
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn min_expansion(&self) -> f64 {
        self.min_expansion
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, MapKind::Toral(_))
    }

    pub fn is_doubling(&self) -> bool {
        matches!(self.kind, MapKind::Doubling)
    }

    /// Affine branches of a piecewise-linear 1-D map (empty for Gauss and toral maps).
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn is_piecewise_linear(&self) -> bool {
        !self.branches.is_empty()
    }

    /// Number of full branches if every branch maps onto the whole circle with the
    /// same integer slope (doubling, integer β).
    pub fn uniform_full_branches(&self) -> Option<u64> {
        match self.kind {
            MapKind::Doubling => Some(2),
            MapKind::Beta(b) if libm::floor(b) == b && b < 1e6 => Some(b as u64),
            _ => None,
        }
    }

    /// Markov partition and targets, for maps that have one.
    pub fn markov_partition(&self) -> Option<(Vec<f64>, Vec<MarkovBranch>)> {
        match &self.kind {
            MapKind::Doubling | MapKind::Tent => Some((
                vec![0.0, 0.5, 1.0],
                vec![
                    MarkovBranch { first: 0, last: 1, increasing: true },
                    MarkovBranch { first: 0, last: 1, increasing: !matches!(self.kind, MapKind::Tent) },
                ],
            )),
            MapKind::Beta(b) if libm::floor(*b) == *b && *b < 1e4 => {
                let k = *b as usize;
                let partition = (0..=k).map(|j| j as f64 / *b).collect::<Vec<_>>();
                let mut partition = partition;
                partition[k] = 1.0;
                let branches = (0..k).map(|_| MarkovBranch { first: 0, last: k - 1, increasing: true }).collect();
                Some((partition, branches))
            }
            MapKind::MarkovLinear { partition, branches } => Some((partition.clone(), branches.clone())),
            _ => None,
        }
    }

    fn check_point(&self, x: Point) -> Result<()> {
        let ok = |v: f64| v.is_finite() && (0.0..1.0).contains(&v);
        match (x, self.is_torus()) {
            (Point::Circle(v), false) if ok(v) => Ok(()),
            (Point::Torus([a, b]), true) if ok(a) && ok(b) => Ok(()),
            _ => Err(Error::Domain(format!("{x:?} for the {} map", self.name()))),
        }
    }

    /// Steps after which binary floating-point iteration loses every significant bit.
    pub fn float_step_limit(&self) -> Option<usize> {
        let v2 = |k: u64| k.trailing_zeros() as usize;
        match &self.kind {
            MapKind::Doubling | MapKind::Tent => Some(40),
            MapKind::Beta(b) if libm::floor(*b) == *b && (*b as u64).is_multiple_of(2) => Some(40 / v2(*b as u64)),
            MapKind::Toral(k) => {
                let v = v2(k[0] as u64).max(v2(k[1] as u64));
                (v > 0).then(|| 40 / v)
            }
            MapKind::MarkovLinear { .. } => {
                let mut v = usize::MAX;
                for b in &self.branches {
                    let s = libm::fabs(b.slope);
                    if libm::floor(s) != s || (s as u64).count_ones() != 1 {
                        return None;
                    }
                    v = v.min(v2(s as u64));
                }
                Some(40 / v.max(1))
            }
            _ => None,
        }
    }

    /// One application of T to a circle point, without domain checks.
    #[inline]
    pub fn step(&self, x: f64) -> f64 {
        match self.kind {
            MapKind::Doubling => {
                let y = x + x;
                if y >= 1.0 {
                    y - 1.0
                } else {
                    y
                }
            }
            MapKind::Tent => {
                let y = if x < 0.5 { x + x } else { 2.0 - (x + x) };
                if y >= 1.0 {
                    0.0
                } else {
                    y
                }
            }
            MapKind::Gauss => {
                if x == 0.0 {
                    0.0
                } else {
                    frac(1.0 / x)
                }
            }
            MapKind::Beta(b) => frac(b * x),
            _ => {
                let k = self.branch_index(x);
                let y = self.branches[k].apply(x);
                if y >= 1.0 {
                    y - 1.0
                } else if y < 0.0 {
                    0.0
                } else {
                    y
                }
            }
        }
    }

    #[inline]
    pub fn step_torus(&self, x: [f64; 2]) -> [f64; 2] {
        match self.kind {
            MapKind::Toral(k) => [frac(k[0] as f64 * x[0]), frac(k[1] as f64 * x[1])],
            _ => x,
        }
    }

    pub fn branch_index(&self, x: f64) -> usize {
        let bs = &self.branches;
        let mut lo = 0;
        let mut hi = bs.len();
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if bs[mid].lo <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// T^n x.
    pub fn iterate(&self, x: Point, n: usize) -> Result<Point> {
        self.check_point(x)?;
        if let Some(limit) = self.float_step_limit() {
            if n > limit {
                return Err(Error::PrecisionLoss { map: self.name(), steps: n, limit });
            }
        }
        Ok(match x {
            Point::Circle(mut v) => {
                for _ in 0..n {
                    v = self.step(v);
                }
                Point::Circle(v)
            }
            Point::Torus(mut v) => {
                for _ in 0..n {
                    v = self.step_torus(v);
                }
                Point::Torus(v)
            }
        })
    }

    /// μ(B(center, radius)) for the circle or torus metric.
    pub fn measure_of_ball(&self, center: Point, radius: f64) -> Result<f64> {
        self.check_point(center)?;
        if !(radius >= 0.0) {
            return Err(param(format!("radius must be nonnegative, got {radius}")));
        }
        Ok(match center {
            Point::Circle(c) => {
                if radius >= 0.5 {
                    1.0
                } else {
                    self.density.arc_measure(c - radius, c + radius)
                }
            }
            Point::Torus(_) => torus_disk_area(radius),
        })
    }

    /// Preimage T^{-1}[a, b) as a list of intervals (piecewise-linear maps), or the
    /// first `cap` Gauss branches.
    pub fn preimages(&self, a: f64, b: f64, cap: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        match self.kind {
            MapKind::Gauss => {
                for k in 1..=cap {
                    let k = k as f64;
                    // x = 1/(k + y), decreasing in y
                    let x0 = 1.0 / (k + b);
                    let x1 = 1.0 / (k + a);
                    if x1 > x0 {
                        out.push((x0, x1));
                    }
                }
            }
            _ => {
                for br in &self.branches {
                    if let Some(iv) = br.preimage(a, b) {
                        out.push(iv);
                    }
                }
            }
        }
        out
    }
}

/// Area of a disk of radius r on the unit torus (square metric ball, wrapping).
pub fn torus_disk_area(r: f64) -> f64 {
    use core::f64::consts::{FRAC_1_SQRT_2, PI};
    if r <= 0.5 {
        PI * r * r
    } else if r < FRAC_1_SQRT_2 {
        let cap = r * r * libm::acos(0.5 / r) - 0.5 * libm::sqrt(r * r - 0.25);
        PI * r * r - 4.0 * cap
    } else {
        1.0
    }
}

/// Parry density of x ↦ βx mod 1: h(x) ∝ Σ_{n: x < T^n 1} β^{-n}.
fn parry_density(beta: f64) -> Density {
    let mut orbit = Vec::new();
    let mut y = 1.0f64;
    let mut w = 1.0f64;
    while w > 1e-18 && orbit.len() < 200 {
        orbit.push((y, w));
        y = frac(beta * y);
        w /= beta;
        if y == 0.0 {
            break;
        }
    }
    let mut breaks: Vec<f64> = orbit.iter().map(|&(t, _)| t).filter(|&t| t > 0.0 && t < 1.0).collect();
    breaks.push(0.0);
    breaks.push(1.0);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let values = breaks
        .windows(2)
        .map(|seg| {
            let mid = 0.5 * (seg[0] + seg[1]);
            orbit.iter().filter(|&&(t, _)| mid < t).map(|&(_, w)| w).sum::<f64>()
        })
        .collect();
    Density::step(breaks, values)
}

/// Cellwise-constant invariant density of a Markov piecewise-linear map.
fn markov_density(partition: &[f64], targets: &[MarkovBranch]) -> Result<Vec<f64>> {
    let m = targets.len();
    let len: Vec<f64> = partition.windows(2).map(|w| w[1] - w[0]).collect();
    // h_j = Σ_{i: j ∈ image(i)} h_i / s_i, with Σ h_j len_j = 1 replacing the last row.
    let mut a = vec![vec![0.0f64; m + 1]; m];
    for (i, t) in targets.iter().enumerate() {
        let s = (partition[t.last + 1] - partition[t.first]) / len[i];
        for j in t.first..=t.last {
            a[j][i] += 1.0 / s;
        }
    }
    for j in 0..m {
        a[j][j] -= 1.0;
    }
    a[m - 1][..m].copy_from_slice(&len[..m]);
    a[m - 1][m] = 1.0;
    let h = solve(a).ok_or_else(|| param("Markov map has no unique invariant density"))?;
    if h.iter().any(|&v| !(v > 0.0)) {
        return Err(param("Markov map invariant density is not positive on every cell"));
    }
    Ok(h)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub(crate) fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| libm::fabs(a[i][c]).partial_cmp(&libm::fabs(a[j][c])).unwrap())?;
        if libm::fabs(a[p][c]) < 1e-300 {
            return None;
        }
        a.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..=n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::integrate;

    #[test]
    fn iterate_examples() {
        let d = MapSystem::doubling();
        assert_eq!(d.iterate(0.25.into(), 1).unwrap(), Point::Circle(0.5));
        let third = d.iterate((1.0 / 3.0).into(), 2).unwrap().circle().unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-15);
        let g = MapSystem::gauss();
        let p = core::f64::consts::SQRT_2 - 1.0;
        let q = g.iterate(p.into(), 1).unwrap().circle().unwrap();
        assert!((q - p).abs() < 1e-15);
        assert_eq!(d.iterate(0.3.into(), 0).unwrap(), Point::Circle(0.3));
    }

    #[test]
    fn domain_and_precision_errors() {
        let d = MapSystem::doubling();
        assert!(matches!(d.iterate(1.5.into(), 1), Err(Error::Domain(_))));
        assert!(matches!(d.iterate(Point::Torus([0.1, 0.2]), 1), Err(Error::Domain(_))));
        assert!(matches!(d.iterate(0.3.into(), 41), Err(Error::PrecisionLoss { .. })));
        assert!(d.iterate(0.3.into(), 40).is_ok());
        let t = MapSystem::toral([3, 2]).unwrap();
        assert!(matches!(t.iterate(Point::Torus([0.1, 0.2]), 41), Err(Error::PrecisionLoss { .. })));
        let t = MapSystem::toral([3, 5]).unwrap();
        assert!(t.iterate(Point::Torus([0.1, 0.2]), 1000).is_ok());
    }

    #[test]
    fn ball_measures() {
        let d = MapSystem::doubling();
        assert!((d.measure_of_ball(0.7.into(), 0.005).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(d.measure_of_ball(0.7.into(), 3.0).unwrap(), 1.0);
        let t = MapSystem::toral([2, 3]).unwrap();
        let m = t.measure_of_ball(Point::Torus([0.5, 0.5]), 0.1).unwrap();
        assert!((m - core::f64::consts::PI * 0.01).abs() < 1e-15);
        let g = MapSystem::gauss();
        let m = g.measure_of_ball(0.4.into(), 0.05).unwrap();
        let q = integrate(&|x| 1.0 / ((1.0 + x) * crate::math::LN_2), 0.35, 0.45, 1e-15);
        assert!((m - q).abs() < 1e-12);
    }

    #[test]
    fn torus_disk_is_continuous() {
        let r = 0.5;
        assert!((torus_disk_area(r) - torus_disk_area(r + 1e-12)).abs() < 1e-9);
        let r = core::f64::consts::FRAC_1_SQRT_2;
        assert!((torus_disk_area(r - 1e-12) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn parry_density_is_invariant() {
        let m = MapSystem::beta(2.5).unwrap();
        let d = m.density();
        for &(a, b) in &[(0.1, 0.3), (0.0, 0.5), (0.45, 0.95), (0.6, 0.61)] {
            let pre: f64 = m.preimages(a, b, 0).iter().map(|&(x, y)| d.measure(x, y)).sum();
            assert!((pre - d.measure(a, b)).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn markov_density_is_invariant() {
        let m = MapSystem::markov_linear(
            vec![0.0, 0.4, 1.0],
            vec![
                MarkovBranch { first: 1, last: 1, increasing: true },
                MarkovBranch { first: 0, last: 1, increasing: false },
            ],
        )
        .unwrap();
        let d = m.density();
        for &(a, b) in &[(0.1, 0.3), (0.0, 0.5), (0.35, 0.95)] {
            let pre: f64 = m.preimages(a, b, 0).iter().map(|&(x, y)| d.measure(x, y)).sum();
            assert!((pre - d.measure(a, b)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(MapSystem::beta(1.0).is_err());
        assert!(MapSystem::toral([1, 3]).is_err());
        assert!(MapSystem::markov_linear(
            vec![0.0, 0.5, 1.0],
            vec![
                MarkovBranch { first: 0, last: 0, increasing: true },
                MarkovBranch { first: 0, last: 1, increasing: true },
            ],
        )
        .is_err());
    }
}
