//! Short returns μ(B_i ∩ T^{-r}B_i) and the Assumption (C) check.

use alloc::format;
use alloc::vec::Vec;

use super::pieces::{for_each_piece, split_arc};
use super::CheckOptions;
use crate::dyadic::{from_fraction, DyadicArc};
use crate::dynamics::{trajectory_rng, uniform01, MapSystem, Point};
use crate::error::{param, Error, Result};
use crate::math::{circle_dist, CompensatedSum};
use crate::targets::{TargetSchedule, TargetShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Integer arithmetic on 64-bit arcs for maps x ↦ d·x mod 1.
    UniformExact,
    /// Floating-point branchwise preimages.
    PiecewiseExact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Standard error; zero for exact methods.
    pub std_error: f64,
    pub method: Method,
}

/// μ(B_i ∩ T^{-r}B_i).
pub fn short_return_measure(schedule: &TargetSchedule, i: usize, r: usize, opts: &CheckOptions) -> Result<Estimate> {
    if r == 0 {
        return Err(param("return lag r must be at least 1"));
    }
    let mu = schedule.measure(i)?;
    if mu >= 1.0 {
        return Ok(Estimate { value: 1.0, std_error: 0.0, method: Method::UniformExact });
    }
    let map = schedule.map();
    if !opts.force_monte_carlo {
        if let (Some(d), Ok(arc)) = (map.uniform_full_branches(), schedule.arc(i)) {
            if let Some(v) = uniform_return(d, arc, r) {
                return Ok(Estimate { value: v, std_error: 0.0, method: Method::UniformExact });
            }
        }
        if map.is_piecewise_linear() {
            if let Some((lo, len)) = lebesgue_arc(schedule, i)? {
                let parts = split_arc(lo, len);
                let density = map.density();
                let mut sum = CompensatedSum::new();
                for_each_piece(map, &parts, r, opts.cap, |p| {
                    for &(a, b) in &parts {
                        if let Some((x0, x1)) = p.pull_back(a, b) {
                            sum.add(density.measure(x0, x1));
                        }
                    }
                })?;
                return Ok(Estimate { value: sum.value(), std_error: 0.0, method: Method::PiecewiseExact });
            }
        }
    }
    monte_carlo_return(schedule, i, r, mu, opts)
}

/// Left end and length of B_i on the circle, when it is an arc.
fn lebesgue_arc(schedule: &TargetSchedule, i: usize) -> Result<Option<(f64, f64)>> {
    Ok(match (schedule.shape(), schedule.center()) {
        (TargetShape::Ball, Point::Circle(c)) => {
            let r = schedule.radius(i)?;
            Some((c - r, 2.0 * r))
        }
        (TargetShape::Cylinder, Point::Circle(_)) => {
            let arc = schedule.arc(i)?;
            Some((from_fraction(arc.lo), arc.measure()))
        }
        _ => None,
    })
}

/// Exact overlap for x ↦ d·x mod 1 with d^r ≤ 2^63. In units of 2^-64/d^r the set
/// T^{-r}B is the periodic set {y : y mod 2^64 ∈ B}, and its intersection with the
/// scaled copy of B is a difference of the prefix counts F(y) = |[0, y) ∩ T^{-r}B|.
fn uniform_return(d: u64, arc: DyadicArc, r: usize) -> Option<f64> {
    let mut dr: u128 = 1;
    for _ in 0..r {
        dr *= d as u128;
        if dr > 1 << 63 {
            return None;
        }
    }
    const ONE: u128 = 1 << 64;
    let lo = arc.lo as u128;
    let hi = lo + arc.len as u128;
    let parts: Vec<(u128, u128)> = if hi <= ONE { alloc::vec![(lo, hi)] } else { alloc::vec![(0, hi - ONE), (lo, ONE)] };
    let prefix = |y: u128| -> u128 {
        let (q, rem) = (y >> 64, y & (ONE - 1));
        parts.iter().map(|&(b0, b1)| q * (b1 - b0) + rem.clamp(b0, b1) - b0).sum()
    };
    let total: u128 = parts.iter().map(|&(x0, x1)| prefix(x1 * dr) - prefix(x0 * dr)).sum();
    Some(total as f64 / (ONE as f64 * dr as f64))
}

/// Conditional sampling inside B_i: value μ(B)·h/M with a standard error from the
/// smoothed proportion (h + 1)/(M + 2), so that h = 0 is not reported as certain.
fn monte_carlo_return(schedule: &TargetSchedule, i: usize, r: usize, mu: f64, opts: &CheckOptions) -> Result<Estimate> {
    let map = schedule.map();
    if opts.samples == 0 {
        return Err(param("Monte Carlo mode needs at least one sample"));
    }
    let mut hits = 0usize;
    for t in 0..opts.samples {
        let mut rng = trajectory_rng(opts.seed, t as u64);
        let x = sample_in_target(schedule, i, map, &mut rng)?;
        let y = map.iterate(x, r)?;
        hits += schedule.contains(i, y)? as usize;
    }
    let m = opts.samples as f64;
    let p = (hits as f64 + 1.0) / (m + 2.0);
    Ok(Estimate {
        value: mu * hits as f64 / m,
        std_error: mu * libm::sqrt(p * (1.0 - p) / m),
        method: Method::MonteCarlo,
    })
}

fn sample_in_target<R: rand_core::RngCore>(schedule: &TargetSchedule, i: usize, map: &MapSystem, rng: &mut R) -> Result<Point> {
    if let Some((lo, len)) = lebesgue_arc(schedule, i)? {
        let dens = map.density();
        let base = dens.cdf(lo - libm::floor(lo));
        let hi = lo + len;
        let span = if len >= 1.0 { 1.0 } else { dens.arc_measure(lo, hi) };
        let u = base + uniform01(rng) * span;
        let x = dens.inverse_cdf(u - libm::floor(u));
        return Ok(Point::Circle(if x >= 1.0 { 0.0 } else { x }));
    }
    match schedule.center() {
        Point::Torus(c) => {
            let rad = schedule.radius(i)?.min(0.5);
            loop {
                let dx = (2.0 * uniform01(rng) - 1.0) * rad;
                let dy = (2.0 * uniform01(rng) - 1.0) * rad;
                if dx * dx + dy * dy < rad * rad {
                    let f = |v: f64| v - libm::floor(v);
                    return Ok(Point::Torus([f(c[0] + dx), f(c[1] + dy)]));
                }
            }
        }
        p => Err(Error::Domain(format!("{p:?} cannot be sampled as a target"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionCParams {
    pub eta: f64,
    pub kappa: f64,
    /// Indices below this are not checked.
    pub i_threshold: usize,
}

impl Default for AssumptionCParams {
    fn default() -> Self {
        AssumptionCParams { eta: 0.5, kappa: 1.5, i_threshold: 100 }
    }
}

/// Which range η was taken from: (0, 1) as in the assumption itself, or [1, 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaRegime {
    Unit,
    Extended,
}

impl AssumptionCParams {
    pub fn validate(&self) -> Result<EtaRegime> {
        if !(self.eta > 0.0 && self.eta < 2.0) {
            return Err(param(format!("eta must lie in (0, 2), got {}", self.eta)));
        }
        if !(self.kappa > 1.0) || !self.kappa.is_finite() {
            return Err(param(format!("kappa must exceed 1, got {}", self.kappa)));
        }
        Ok(if self.eta < 1.0 { EtaRegime::Unit } else { EtaRegime::Extended })
    }

    /// ⌈(log i)^κ⌉ lags.
    pub fn lags(&self, i: usize) -> usize {
        let l = libm::log(i as f64);
        if l <= 0.0 {
            0
        } else {
            libm::ceil(libm::pow(l, self.kappa)) as usize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The Monte Carlo error bar straddles the bound.
    Inconclusive,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexCheck {
    pub i: usize,
    pub lags: usize,
    /// Lag with the largest ratio μ(B ∩ T^{-r}B)/μ(B)^{1+η}.
    pub worst_r: usize,
    pub worst_ratio: f64,
    pub worst_std_error: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCReport {
    pub params: AssumptionCParams,
    pub regime: EtaRegime,
    /// Smallest and largest index tested; the verdict says nothing outside it.
    pub tested: Option<(usize, usize)>,
    pub rows: Vec<IndexCheck>,
    pub verdict: Verdict,
    /// Period of the center, when it is periodic with period at most [`PERIOD_SEARCH`].
    pub periodic: Option<usize>,
}

pub const PERIOD_SEARCH: usize = 16;

/// Standard errors of slack before a Monte Carlo ratio counts as decided.
const MC_SIGMAS: f64 = 3.0;

pub fn assumption_c_report(
    schedule: &TargetSchedule,
    params: AssumptionCParams,
    indices: &[usize],
    opts: &CheckOptions,
) -> Result<AssumptionCReport> {
    let regime = params.validate()?;
    let mut rows = Vec::with_capacity(indices.len());
    let mut tested: Option<(usize, usize)> = None;
    for &i in indices {
        let lags = params.lags(i);
        if i < params.i_threshold {
            rows.push(IndexCheck { i, lags, worst_r: 0, worst_ratio: 0.0, worst_std_error: 0.0, verdict: Verdict::Skipped });
            continue;
        }
        tested = Some(tested.map_or((i, i), |(a, b)| (a.min(i), b.max(i))));
        let mu = schedule.measure(i)?;
        let bound = libm::pow(mu, 1.0 + params.eta);
        let mut row = IndexCheck { i, lags, worst_r: 0, worst_ratio: f64::NEG_INFINITY, worst_std_error: 0.0, verdict: Verdict::Pass };
        for r in 1..=lags {
            let e = short_return_measure(schedule, i, r, opts)?;
            let ratio = e.value / bound;
            if ratio > row.worst_ratio {
                row.worst_ratio = ratio;
                row.worst_r = r;
                row.worst_std_error = e.std_error / bound;
            }
            let lo = e.value - MC_SIGMAS * e.std_error;
            let hi = e.value + MC_SIGMAS * e.std_error;
            if lo > bound {
                row.verdict = Verdict::Fail;
            } else if hi > bound && row.verdict == Verdict::Pass {
                row.verdict = Verdict::Inconclusive;
            }
        }
        if lags == 0 {
            row.worst_ratio = 0.0;
        }
        rows.push(row);
    }
    let verdict = if rows.iter().any(|r| r.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if rows.iter().any(|r| r.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else if tested.is_none() {
        Verdict::Skipped
    } else {
        Verdict::Pass
    };
    let periodic = period_of(schedule.map(), schedule.center(), PERIOD_SEARCH);
    Ok(AssumptionCReport { params, regime, tested, rows, verdict, periodic })
}

/// Smallest q ≤ `max_q` with T^q p = p to within 1e-9 (floating-point orbit).
pub fn period_of(map: &MapSystem, p: Point, max_q: usize) -> Option<usize> {
    let max_q = map.float_step_limit().map_or(max_q, |l| max_q.min(l));
    let mut x = p;
    for q in 1..=max_q {
        x = map.iterate(x, 1).ok()?;
        let d = match (x, p) {
            (Point::Circle(a), Point::Circle(b)) => circle_dist(a, b),
            (Point::Torus(a), Point::Torus(b)) => circle_dist(a[0], b[0]).max(circle_dist(a[1], b[1])),
            _ => return None,
        };
        if d < 1e-9 {
            return Some(q);
        }
    }
    None
}
