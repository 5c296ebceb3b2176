use alloc::format;

use super::pieces::for_each_piece;
use super::returns::{Estimate, Method};
use super::CheckOptions;
use crate::dynamics::{sample_initial, MapSystem, Point};
use crate::error::{param, Result};
use crate::math::{circle_dist, CompensatedSum};

/// μ(E_k(ε)) with E_k(ε) = {x : dist(T^k x, x) ≤ ε} in the circle metric.
pub fn recurrence_set_measure(map: &MapSystem, k: usize, eps: f64, opts: &CheckOptions) -> Result<Estimate> {
    if k == 0 {
        return Err(param("iterate k must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(param(format!("epsilon must be positive, got {eps}")));
    }
    let diameter = if map.is_torus() { libm::sqrt(0.5) } else { 0.5 };
    if eps >= diameter {
        return Ok(Estimate { value: 1.0, std_error: 0.0, method: Method::PiecewiseExact });
    }
    if map.uniform_full_branches().is_some() && !opts.force_monte_carlo {
        // x ↦ (d^k − 1)x mod 1 preserves Lebesgue measure, and dist(T^k x, x) = ‖(d^k − 1)x‖.
        return Ok(Estimate { value: (2.0 * eps).min(1.0), std_error: 0.0, method: Method::UniformExact });
    }
    if map.is_piecewise_linear() && !opts.force_monte_carlo {
        let density = map.density();
        let mut sum = CompensatedSum::new();
        // T^k x − x = (s − 1)x + c on each piece; solve |(s − 1)x + c − j| ≤ ε.
        for_each_piece(map, &[(0.0, 1.0)], k, opts.cap, |p| {
            let g = |x: f64| (p.s - 1.0) * x + p.c;
            let (g0, g1) = (g(p.a), g(p.b));
            let (lo, hi) = if g0 <= g1 { (g0, g1) } else { (g1, g0) };
            let j0 = libm::ceil(lo - eps) as i64;
            let j1 = libm::floor(hi + eps) as i64;
            for j in j0..=j1 {
                let j = j as f64;
                let u = (j - eps - p.c) / (p.s - 1.0);
                let v = (j + eps - p.c) / (p.s - 1.0);
                let (u, v) = if u <= v { (u, v) } else { (v, u) };
                let x0 = u.max(p.a);
                let x1 = v.min(p.b);
                if x1 > x0 {
                    sum.add(density.measure(x0, x1));
                }
            }
        })?;
        return Ok(Estimate { value: sum.value().min(1.0), std_error: 0.0, method: Method::PiecewiseExact });
    }
    if opts.samples == 0 {
        return Err(param("Monte Carlo mode needs at least one sample"));
    }
    let mut hits = 0usize;
    for x in sample_initial(map, opts.seed, opts.samples) {
        let y = map.iterate(x, k)?;
        let d = match (x, y) {
            (Point::Circle(a), Point::Circle(b)) => circle_dist(a, b),
            (Point::Torus(a), Point::Torus(b)) => libm::hypot(circle_dist(a[0], b[0]), circle_dist(a[1], b[1])),
            _ => f64::INFINITY,
        };
        hits += (d <= eps) as usize;
    }
    let m = opts.samples as f64;
    let p = (hits as f64 + 1.0) / (m + 2.0);
    Ok(Estimate { value: hits as f64 / m, std_error: libm::sqrt(p * (1.0 - p) / m), method: Method::MonteCarlo })
}
