//! Windowed correlation sums and the Gal–Koksma residual.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::math::CompensatedSum;
use crate::targets::TargetSchedule;
use crate::transfer::Operator;

#[derive(Debug, Clone, PartialEq)]
pub struct SpWindow {
    /// The window is m < i ≤ n.
    pub m: usize,
    pub n: usize,
    /// Σ_{m<i,j≤n} E(f_i f_j) − E(f_i)E(f_j), diagonal included.
    pub correlation_sum: f64,
    /// Σ_{m<i≤n} E(f_i).
    pub expectation_sum: f64,
    /// correlation_sum / expectation_sum (0 on an empty window).
    pub constant: f64,
    pub truncation_bound: f64,
    pub approximate: bool,
}

/// The double correlation sum equals the variance of Σ_{m<i≤n} φ_i ∘ T^i, which the
/// w recurrence restarted at m + 1 evaluates with one operator application per index.
pub fn sp_constant<O: Operator>(op: &O, schedule: &TargetSchedule, m: usize, n: usize) -> Result<SpWindow> {
    if m == 0 || n < m {
        return Err(param(format!("SP window needs n ≥ m ≥ 1, got m = {m}, n = {n}")));
    }
    if n > schedule.n_max() {
        return Err(param(format!("window end {n} exceeds the schedule length {}", schedule.n_max())));
    }
    let mut diag = CompensatedSum::new();
    let mut cross = CompensatedSum::new();
    let mut expect = CompensatedSum::new();
    let mut bound = 0.0;
    let mut approximate = false;
    let mut w = op.zero();
    for k in m + 1..=n {
        let obs = op.observable(schedule, k)?;
        approximate |= obs.approximate;
        expect.add(obs.mean);
        diag.add(op.inner(&obs.centered, &obs.centered));
        cross.add(2.0 * op.inner(&w, &obs.centered));
        op.axpy(1.0, &obs.centered, &mut w);
        w = op.transfer(&w);
        bound += op.prune(&mut w, k + 1 - m, n - m);
    }
    let corr = diag.value() + cross.value();
    let e = expect.value();
    Ok(SpWindow {
        m,
        n,
        correlation_sum: corr,
        expectation_sum: e,
        constant: if e > 0.0 { corr / e } else { 0.0 },
        truncation_bound: bound,
        approximate,
    })
}

/// Windows (2^k, 2^{k+1}] for k = 0..=k_max.
pub fn sp_dyadic_windows<O: Operator>(op: &O, schedule: &TargetSchedule, k_max: u32) -> Result<Vec<SpWindow>> {
    (0..=k_max).map(|k| sp_constant(op, schedule, 1 << k, 1 << (k + 1))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkPoint {
    pub n: usize,
    /// Θ(n) = Σ_{k ≤ n} h_k.
    pub theta: f64,
    pub deviation: f64,
    /// None when Θ(n) ≤ 1, where log Θ is not positive.
    pub residual: Option<f64>,
}

/// R(n) = |Σ_{k≤n} f_k − Σ_{k≤n} g_k| / (Θ(n)^{1/2} (log Θ(n))^{3/2+ε}) on the grid.
pub fn gal_koksma_residual(f: &[f64], g: &[f64], h: &[f64], grid: &[usize], eps: f64) -> Result<Vec<GkPoint>> {
    if f.len() != g.len() || g.len() != h.len() {
        return Err(param("f, g and h must have equal length"));
    }
    if !(eps > 0.0) {
        return Err(param(format!("epsilon must be positive, got {eps}")));
    }
    if let Some(k) = (0..g.len()).find(|&k| !(0.0 <= g[k] && g[k] <= h[k] && h[k] <= 1.0)) {
        return Err(param(format!("need 0 ≤ g ≤ h ≤ 1, violated at k = {}", k + 1)));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid.last().is_some_and(|&n| n > f.len()) {
        return Err(param("grid must be strictly increasing and within the series"));
    }
    let mut out = Vec::with_capacity(grid.len());
    let (mut sf, mut sg, mut sh) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    let mut k = 0;
    for &n in grid {
        while k < n {
            sf.add(f[k]);
            sg.add(g[k]);
            sh.add(h[k]);
            k += 1;
        }
        out.push(gk_point(n, sf.value(), sg.value(), sh.value(), eps));
    }
    Ok(out)
}

/// R(n) from partial sums (Σf, Σg, Θ) already accumulated at each grid point, as
/// produced by checkpointed hit counts.
pub fn gal_koksma_from_sums(points: &[(usize, f64, f64, f64)], eps: f64) -> Result<Vec<GkPoint>> {
    if !(eps > 0.0) {
        return Err(param(format!("epsilon must be positive, got {eps}")));
    }
    if points.windows(2).any(|w| w[0].0 >= w[1].0 || w[1].3 < w[0].3) {
        return Err(param("grid must be strictly increasing with nondecreasing Θ"));
    }
    Ok(points.iter().map(|&(n, f, g, theta)| gk_point(n, f, g, theta, eps)).collect())
}

fn gk_point(n: usize, sf: f64, sg: f64, theta: f64, eps: f64) -> GkPoint {
    let deviation = libm::fabs(sf - sg);
    let residual = (theta > 1.0).then(|| {
        let l = libm::log(theta);
        deviation / (libm::sqrt(theta) * libm::pow(l, 1.5 + eps))
    });
    GkPoint { n, theta, deviation, residual }
}
