//! Nested shrinking-target schedules B_i(p) with μ(B_i) = min(1, C/i^γ).

use alloc::format;
use alloc::vec::Vec;

use crate::dyadic::DyadicArc;
use crate::dynamics::{MapKind, MapSystem, Point};
use crate::error::{param, Error, Result};
use crate::math::{circle_dist, CompensatedSum};

/// Default center for generic-point experiments.
pub const GENERIC_CENTER: f64 = core::f64::consts::SQRT_2 - 1.0;
/// (√2 − 1, √3 − 1), the default center on the torus.
pub const GENERIC_TORUS_CENTER: [f64; 2] = [GENERIC_CENTER, 0.732_050_807_568_877_2];

const RADIUS_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetShape {
    /// Open metric ball B(p, r_i).
    Ball,
    /// Half-open dyadic cylinder of depth ⌈log₂ i⌉ containing p.
    Cylinder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSchedule {
    map: MapSystem,
    center: Point,
    gamma: f64,
    constant: f64,
    shape: TargetShape,
    radii: Vec<f64>,
    measures: Vec<f64>,
    prefix: Vec<f64>,
    arcs: Vec<DyadicArc>,
    depths: Vec<u32>,
}

impl TargetSchedule {
    /// Balls with μ(B_i) = min(1, C/i^γ), radii by inversion of `measure_of_ball`.
    pub fn build(map: &MapSystem, p: Point, gamma: f64, constant: f64, n_max: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(param(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if !(constant > 0.0) || !constant.is_finite() {
            return Err(param(format!("C must be positive, got {constant}")));
        }
        map.iterate(p, 0)?;
        let full_radius = if map.is_torus() { core::f64::consts::FRAC_1_SQRT_2 } else { 0.5 };
        let mut radii = Vec::with_capacity(n_max);
        let mut measures = Vec::with_capacity(n_max);
        let mut arcs = Vec::new();
        let mut prev = full_radius;
        for i in 1..=n_max {
            let mu = (constant * libm::pow(i as f64, -gamma)).min(1.0);
            let r = if mu >= 1.0 { full_radius } else { invert_radius(map, p, mu, prev)? };
            let r = r.min(prev);
            prev = r;
            radii.push(r);
            measures.push(mu);
            if let Point::Circle(c) = p {
                arcs.push(if mu >= 1.0 { DyadicArc::FULL } else { DyadicArc::ball(c, r) });
            }
        }
        let prefix = prefix_sums(&measures);
        Ok(TargetSchedule {
            map: map.clone(),
            center: p,
            gamma,
            constant,
            shape: TargetShape::Ball,
            radii,
            measures,
            prefix,
            arcs,
            depths: Vec::new(),
        })
    }

    /// Dyadic cylinders of depth ⌈log₂ i⌉ containing p, with μ(B_i) = 2^{-⌈log₂ i⌉}.
    pub fn dyadic(map: &MapSystem, p: f64, n_max: usize) -> Result<Self> {
        let supported = match map.kind() {
            MapKind::Doubling | MapKind::Tent => true,
            MapKind::MarkovLinear { partition, .. } => partition.iter().all(|&x| is_dyadic(x)),
            _ => false,
        };
        if !supported {
            return Err(Error::UnsupportedMap { op: "dyadic_schedule", map: map.name() });
        }
        map.iterate(Point::Circle(p), 0)?;
        let mut radii = Vec::with_capacity(n_max);
        let mut measures = Vec::with_capacity(n_max);
        let mut arcs = Vec::with_capacity(n_max);
        let mut depths = Vec::with_capacity(n_max);
        for i in 1..=n_max {
            let d = ceil_log2(i as u64);
            let index = libm::floor(libm::ldexp(p, d as i32)) as u64;
            let arc = DyadicArc::cylinder(d, index);
            let width = libm::ldexp(1.0, -(d as i32));
            // exact for step densities whose breaks are dyadic of depth at most d
            let lo = libm::ldexp(index as f64, -(d as i32));
            let mu = if d == 0 { 1.0 } else { map.density().measure(lo, lo + width) };
            radii.push(0.5 * width);
            measures.push(mu);
            arcs.push(arc);
            depths.push(d);
        }
        let prefix = prefix_sums(&measures);
        Ok(TargetSchedule {
            map: map.clone(),
            center: Point::Circle(p),
            gamma: 1.0,
            constant: 1.0,
            shape: TargetShape::Cylinder,
            radii,
            measures,
            prefix,
            arcs,
            depths,
        })
    }

    pub fn map(&self) -> &MapSystem {
        &self.map
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn shape(&self) -> TargetShape {
        self.shape
    }

    pub fn n_max(&self) -> usize {
        self.measures.len()
    }

    fn check(&self, i: usize) -> Result<usize> {
        if i == 0 || i > self.n_max() {
            Err(Error::Index { index: i, len: self.n_max() })
        } else {
            Ok(i - 1)
        }
    }

    /// r_i; for cylinders half the cylinder length.
    pub fn radius(&self, i: usize) -> Result<f64> {
        Ok(self.radii[self.check(i)?])
    }

    /// μ(B_i).
    pub fn measure(&self, i: usize) -> Result<f64> {
        Ok(self.measures[self.check(i)?])
    }

    /// μ_1..μ_{n_max}.
    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// E_n = Σ_{i ≤ n} μ_i, with E_0 = 0.
    pub fn expected(&self, n: usize) -> Result<f64> {
        if n > self.n_max() {
            return Err(Error::Index { index: n, len: self.n_max() });
        }
        Ok(self.prefix[n])
    }

    /// Exact 64-bit arc of B_i on the circle.
    pub fn arc(&self, i: usize) -> Result<DyadicArc> {
        let k = self.check(i)?;
        self.arcs
            .get(k)
            .copied()
            .ok_or_else(|| Error::UnsupportedMap { op: "dyadic arcs", map: self.map.name() })
    }

    /// Cylinder depth of B_i (cylinder schedules only).
    pub fn depth(&self, i: usize) -> Option<u32> {
        let k = self.check(i).ok()?;
        self.depths.get(k).copied()
    }

    /// 1_{B_i}(x).
    pub fn contains(&self, i: usize, x: Point) -> Result<bool> {
        let k = self.check(i)?;
        if self.measures[k] >= 1.0 {
            return Ok(true);
        }
        match (self.shape, x, self.center) {
            (TargetShape::Cylinder, Point::Circle(v), _) => {
                let d = self.depths[k];
                let arc = self.arcs[k];
                let idx = libm::floor(libm::ldexp(v, d as i32)) as u64;
                Ok(idx == arc.lo >> (64 - d))
            }
            (TargetShape::Ball, Point::Circle(v), Point::Circle(c)) => Ok(circle_dist(v, c) < self.radii[k]),
            (TargetShape::Ball, Point::Torus(v), Point::Torus(c)) => {
                let dx = circle_dist(v[0], c[0]);
                let dy = circle_dist(v[1], c[1]);
                Ok(dx * dx + dy * dy < self.radii[k] * self.radii[k])
            }
            _ => Err(Error::Domain(format!("{x:?} does not match the schedule domain"))),
        }
    }

    /// Circle-only fast path of [`contains`](Self::contains) without index checks.
    #[inline]
    pub fn contains_circle_unchecked(&self, i: usize, x: f64) -> bool {
        let k = i - 1;
        if self.measures[k] >= 1.0 {
            return true;
        }
        match (self.shape, self.center) {
            (TargetShape::Ball, Point::Circle(c)) => circle_dist(x, c) < self.radii[k],
            _ => {
                let d = self.depths[k];
                libm::floor(libm::ldexp(x, d as i32)) as u64 == self.arcs[k].lo >> (64 - d)
            }
        }
    }
}

fn is_dyadic(x: f64) -> bool {
    let y = libm::ldexp(x, 52);
    libm::floor(y) == y
}

fn ceil_log2(i: u64) -> u32 {
    if i <= 1 {
        0
    } else {
        64 - (i - 1).leading_zeros()
    }
}

fn prefix_sums(measures: &[f64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(measures.len() + 1);
    let mut acc = CompensatedSum::new();
    prefix.push(0.0);
    for &m in measures {
        acc.add(m);
        prefix.push(acc.value());
    }
    prefix
}

/// Radius r ≤ r_max with μ(B(p, r)) = mu.
fn invert_radius(map: &MapSystem, p: Point, mu: f64, r_max: f64) -> Result<f64> {
    let closed = match p {
        Point::Circle(_) if *map.density() == crate::dynamics::Density::Uniform => Some(0.5 * mu),
        Point::Torus(_) if mu <= core::f64::consts::FRAC_PI_4 => Some(libm::sqrt(mu / core::f64::consts::PI)),
        _ => None,
    };
    if let Some(r) = closed {
        return Ok(r);
    }
    let f = |r: f64| map.measure_of_ball(p, r).map(|m| m - mu);
    let (mut lo, mut hi) = (0.0f64, r_max);
    if f(hi)? < 0.0 {
        return Err(Error::Internal(format!("measure of ball is not monotone near μ = {mu}")));
    }
    // Newton steps bracketed by bisection.
    let slope = |r: f64| match p {
        Point::Circle(c) => {
            let d = map.density();
            d.value(crate::math::frac(c - r)) + d.value(crate::math::frac(c + r))
        }
        Point::Torus(_) => 2.0 * core::f64::consts::PI * r,
    };
    let mut r = match p {
        Point::Circle(c) => (mu / (2.0 * map.density().value(c))).min(hi),
        Point::Torus(_) => 0.5 * hi,
    };
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        let g = f(r)?;
        if libm::fabs(g) <= 0.01 * RADIUS_RESIDUAL {
            return Ok(r);
        }
        if g < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        if hi - lo <= f64::EPSILON * hi {
            last = g;
            break;
        }
        let s = slope(r);
        let mut next = r - g / s;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        r = next;
        last = g;
    }
    if libm::fabs(last) <= RADIUS_RESIDUAL || libm::fabs(f(r)?) <= RADIUS_RESIDUAL {
        Ok(r)
    } else {
        Err(Error::Internal(format!("radius inversion stalled with residual {last} at μ = {mu}")))
    }
}
