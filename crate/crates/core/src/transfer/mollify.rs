//! Lipschitz mollification of ball indicators.
//!
//! φ̃_i(x) = g_i(d(x, p)) where g_i is 1 on [0, r_i], falls linearly to 0 over a
//! collar of width δ_i = 1/(i³ · sup h) with h the invariant density, and is then
//! replaced by its pointwise minimum with g_{i−1} so that φ̃_i ≥ φ̃_{i+1}.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{locate, TransferModel};
use crate::dynamics::{Density, Point};
use crate::error::{param, Result};
use crate::math::gauss_legendre;
use crate::targets::{TargetSchedule, TargetShape};

/// Nonincreasing piecewise-linear profile g(d), d ≥ 0, zero past the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    knots: Vec<(f64, f64)>,
}

impl RadialProfile {
    pub fn ramp(r: f64, delta: f64) -> Self {
        let knots = if r > 0.0 { vec![(0.0, 1.0), (r, 1.0), (r + delta, 0.0)] } else { vec![(0.0, 1.0), (delta, 0.0)] };
        RadialProfile { knots }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, d: f64) -> f64 {
        let k = &self.knots;
        if d <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((d0, v0), (d1, v1)) = (w[0], w[1]);
            if d <= d1 {
                if d1 == d0 {
                    return v1;
                }
                return v0 + (v1 - v0) * (d - d0) / (d1 - d0);
            }
        }
        0.0
    }

    /// Radius beyond which the profile vanishes.
    pub fn support(&self) -> f64 {
        self.knots.last().unwrap().0
    }

    /// Radius up to which the profile equals 1.
    pub fn plateau(&self) -> f64 {
        let mut r = 0.0;
        for &(d, v) in &self.knots {
            if v >= 1.0 {
                r = d;
            } else {
                break;
            }
        }
        r
    }

    /// Largest slope magnitude.
    pub fn lipschitz(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| if w[1].0 > w[0].0 { libm::fabs(w[1].1 - w[0].1) / (w[1].0 - w[0].0) } else { 0.0 })
            .fold(0.0, f64::max)
    }

    /// Pointwise minimum.
    pub fn min(&self, other: &RadialProfile) -> RadialProfile {
        let mut ds: Vec<f64> = self.knots.iter().chain(other.knots.iter()).map(|k| k.0).collect();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ds.dedup();
        let mut pts: Vec<f64> = Vec::with_capacity(2 * ds.len());
        for w in ds.windows(2) {
            pts.push(w[0]);
            let (a0, a1) = (self.eval(w[0]), self.eval(w[1]));
            let (b0, b1) = (other.eval(w[0]), other.eval(w[1]));
            let (u, v) = (a0 - b0, a1 - b1);
            if u * v < 0.0 {
                pts.push(w[0] + (w[1] - w[0]) * u / (u - v));
            }
        }
        pts.push(*ds.last().unwrap());
        let mut knots: Vec<(f64, f64)> = pts.iter().map(|&d| (d, self.eval(d).min(other.eval(d)))).collect();
        while knots.len() > 2 && knots[knots.len() - 2].1 == 0.0 {
            knots.pop();
        }
        RadialProfile { knots }
    }

    /// ∫ g(d(x, p)) dμ(x) − μ(B(p, r)): the L¹(μ) distance to the indicator of the
    /// plateau ball, for a circle density.
    pub fn l1_excess(&self, density: &Density, center: f64) -> f64 {
        let whole = vec![0.0, 1.0];
        let total: f64 = cell_profile_integrals(&whole, density, center, self).iter().map(|c| c.1).sum();
        let r = self.plateau();
        total - density.arc_measure(center - r, center + r)
    }
}

fn cube(k: usize) -> f64 {
    let k = k as f64;
    k * k * k
}

/// Profile g_i for B_i: ramp of width δ_i, minimised against earlier ramps that
/// reach below it.
pub(crate) fn profile_for(schedule: &TargetSchedule, i: usize) -> Result<RadialProfile> {
    let hmax = schedule.map().density().bounds().1;
    let delta = |k: usize| 1.0 / (cube(k) * hmax);
    let r_i = schedule.radius(i)?;
    let mut g = RadialProfile::ramp(r_i, delta(i));
    let reach = r_i + delta(i);
    let mut k = i;
    while k > 1 {
        k -= 1;
        if schedule.measure(k)? >= 1.0 {
            break;
        }
        let r_k = schedule.radius(k)?;
        if r_k >= reach {
            break;
        }
        g = g.min(&RadialProfile::ramp(r_k, delta(k)));
    }
    Ok(g)
}

/// ∫_{cell} g(d(x, c)) dμ(x) for every cell meeting the support of g.
pub(crate) fn cell_profile_integrals(b: &[f64], density: &Density, c: f64, g: &RadialProfile) -> Vec<(usize, f64)> {
    let n = b.len() - 1;
    let big = g.support();
    let flat = g.plateau();
    let mut kinks: Vec<f64> = vec![c, c + 0.5, c - 0.5];
    for &(d, _) in g.knots() {
        kinks.push(c + d);
        kinks.push(c - d);
    }
    let mut kinks: Vec<f64> = kinks.into_iter().map(crate::math::frac).collect();
    kinks.extend_from_slice(density.breaks());
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let f = |x: f64| g.eval(crate::math::circle_dist(x, c)) * density.value(x);
    let cell = |k: usize| -> f64 {
        let (x0, x1) = (b[k], b[k + 1]);
        let (dl, dr) = (crate::math::circle_dist(x0, c), crate::math::circle_dist(x1, c));
        let inside_c = crate::math::circle_dist(0.5 * (x0 + x1), c) <= 0.5 * (x1 - x0);
        if dl <= flat && dr <= flat && (x1 - x0) + 2.0 * flat < 1.0 {
            return density.measure(x0, x1);
        }
        if dl >= big && dr >= big && !inside_c && (x1 - x0) < 0.5 {
            return 0.0;
        }
        let start = kinks.partition_point(|&k| k <= x0);
        let mut s = 0.0;
        let mut a = x0;
        for &kx in &kinks[start..] {
            if kx >= x1 {
                break;
            }
            s += gauss_legendre(&f, a, kx);
            a = kx;
        }
        s + gauss_legendre(&f, a, x1)
    };
    let mut out = Vec::new();
    if big >= 0.5 {
        for k in 0..n {
            out.push((k, cell(k)));
        }
        return out;
    }
    let visit = |lo: f64, hi: f64, out: &mut Vec<(usize, f64)>| {
        let mut k = locate(b, lo.max(0.0));
        while k < n && b[k] < hi {
            if out.last().map(|e: &(usize, f64)| e.0) != Some(k) {
                out.push((k, cell(k)));
            }
            k += 1;
        }
    };
    let (lo, hi) = (c - big, c + big);
    if lo < 0.0 {
        visit(lo + 1.0, 1.0, &mut out);
        visit(0.0, hi, &mut out);
    } else if hi > 1.0 {
        visit(lo, 1.0, &mut out);
        visit(0.0, hi - 1.0, &mut out);
    } else {
        visit(lo, hi, &mut out);
    }
    out.sort_by_key(|e| e.0);
    out.dedup_by_key(|e| e.0);
    out
}

/// The pair (φ̃_i, φ_i) on the cells of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedObservable {
    pub profile: RadialProfile,
    pub delta: f64,
    /// Cell averages of φ̃_i.
    pub tilde: Vec<f64>,
    /// φ_i = φ̃_i − ∫ φ̃_i dμ.
    pub centered: Vec<f64>,
    pub mean: f64,
    /// ‖φ̃_i − 1_{B_i}‖_{L¹(μ)}, evaluated in closed form off the grid.
    pub l1_error: f64,
}

pub fn mollify_indicator(schedule: &TargetSchedule, i: usize, grid: &TransferModel) -> Result<MollifiedObservable> {
    let Point::Circle(c) = schedule.center() else {
        return Err(param("mollification is implemented on the circle"));
    };
    if schedule.shape() != TargetShape::Ball {
        return Err(param("mollification applies to metric-ball schedules"));
    }
    let density = schedule.map().density();
    let n = grid.n();
    let (profile, delta) = if schedule.measure(i)? >= 1.0 {
        (RadialProfile::ramp(0.5, 0.0), 0.0)
    } else {
        let delta = 1.0 / (cube(i) * density.bounds().1);
        (profile_for(schedule, i)?, delta)
    };
    let mut tilde = vec![0.0; n];
    if schedule.measure(i)? >= 1.0 {
        tilde.iter_mut().for_each(|v| *v = 1.0);
    } else {
        for (k, v) in cell_profile_integrals(grid.boundaries(), density, c, &profile) {
            tilde[k] = (v / grid.weights()[k]).min(1.0);
        }
    }
    let mean: f64 = crate::math::compensated_sum(tilde.iter().zip(grid.weights()).map(|(t, w)| t * w));
    let centered = tilde.iter().map(|t| t - mean).collect();
    let l1_error = if delta > 0.0 { profile.l1_excess(density, c) } else { 0.0 };
    Ok(MollifiedObservable { profile, delta, tilde, centered, mean, l1_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::MapSystem;

    #[test]
    fn ramp_shape() {
        let g = RadialProfile::ramp(0.25, 0.125);
        assert_eq!(g.eval(0.1), 1.0);
        assert_eq!(g.eval(0.3125), 0.5);
        assert_eq!(g.eval(0.4), 0.0);
        assert_eq!(g.lipschitz(), 8.0);
        assert!((g.l1_excess(&Density::Uniform, 0.5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn min_of_crossing_ramps() {
        let a = RadialProfile::ramp(0.1, 0.2);
        let b = RadialProfile::ramp(0.15, 0.05);
        let m = a.min(&b);
        for k in 0..100 {
            let d = k as f64 * 0.004;
            assert!((m.eval(d) - a.eval(d).min(b.eval(d))).abs() < 1e-14, "{d}");
        }
    }

    #[test]
    fn second_target_example() {
        let d = MapSystem::doubling();
        let s = TargetSchedule::build(&d, 0.5.into(), 1.0, 1.0, 4).unwrap();
        let m = TransferModel::ulam(&d, 64).unwrap();
        let o = mollify_indicator(&s, 2, &m).unwrap();
        assert_eq!(o.delta, 0.125);
        assert!((o.l1_error - 0.125).abs() < 1e-15);
        assert!((o.mean - 0.625).abs() < 1e-14);
    }
}
