//! Monte Carlo ensembles of hit counts S_n = Σ_{i ≤ n} 1_{B_i}(T^i x).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;

use crate::dyadic::DyadicArc;
use crate::dynamics::{draw, exact_bit_orbit, trajectory_rng, MapKind, MapSystem, Point, RngBits};
use crate::error::{param, Error, Result};
use crate::math::{normal_cdf, CompensatedSum};
use crate::targets::TargetSchedule;

/// Probabilities at which [`CheckpointStats::quantiles`] are taken.
pub const QUANTILE_PROBS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norming {
    /// Z_n / √(log n).
    LogN,
    /// Z_n / â_n.
    SelfNormed,
}

/// How trajectories are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Binary expansion read straight from the random stream (doubling and tent).
    ExactBits { tent: bool },
    /// Double-precision iteration of a μ-distributed start.
    Float,
}

/// Everything a worker needs to simulate any subset of trajectories.
#[derive(Debug, Clone)]
pub struct EnsemblePlan {
    schedule: TargetSchedule,
    checkpoints: Vec<usize>,
    m: usize,
    seed: u64,
    route: Route,
    arcs: Vec<DyadicArc>,
}

impl EnsemblePlan {
    pub fn new(schedule: &TargetSchedule, n_max: usize, m: usize, seed: u64, checkpoints: &[usize]) -> Result<Self> {
        if checkpoints.is_empty() {
            return Err(param("checkpoints must not be empty"));
        }
        if m == 0 {
            return Err(param("trajectory count M must be at least 1"));
        }
        if n_max > schedule.n_max() {
            return Err(param(format!("n_max {n_max} exceeds the schedule length {}", schedule.n_max())));
        }
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(param("checkpoints must be strictly increasing"));
        }
        if checkpoints[0] == 0 || *checkpoints.last().unwrap() > n_max {
            return Err(param(format!("checkpoints must lie in [1, {n_max}]")));
        }
        let map = schedule.map();
        let n = *checkpoints.last().unwrap();
        let route = match map.kind() {
            MapKind::Doubling => Route::ExactBits { tent: false },
            MapKind::Tent => Route::ExactBits { tent: true },
            _ => {
                if let Some(limit) = map.float_step_limit() {
                    if n > limit {
                        return Err(Error::PrecisionLoss { map: map.name(), steps: n, limit });
                    }
                }
                Route::Float
            }
        };
        let arcs = match route {
            Route::ExactBits { .. } => (1..=n).map(|i| schedule.arc(i)).collect::<Result<Vec<_>>>()?,
            Route::Float => Vec::new(),
        };
        Ok(EnsemblePlan { schedule: schedule.clone(), checkpoints: checkpoints.to_vec(), m, seed, route, arcs })
    }

    pub fn schedule(&self) -> &TargetSchedule {
        &self.schedule
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    pub fn trajectories(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn route(&self) -> Route {
        self.route
    }

    /// Hit counts at each checkpoint for trajectory `t`.
    pub fn trajectory(&self, t: u64) -> Result<Vec<u32>> {
        let mut rng = trajectory_rng(self.seed, t);
        let mut out = Vec::with_capacity(self.checkpoints.len());
        match self.route {
            Route::ExactBits { tent } => match self.bit_kernel(&mut rng, tent, &mut out) {
                Some(()) => {}
                None => {
                    // A window tied with an arc endpoint: replay with the tail scan.
                    out.clear();
                    let n = *self.checkpoints.last().unwrap();
                    let hits = exact_bit_orbit(RngBits(trajectory_rng(self.seed, t)), &self.schedule, n)?;
                    self.count_into(hits.iter().copied(), &mut out);
                }
            },
            Route::Float => {
                let map = self.schedule.map();
                let n = *self.checkpoints.last().unwrap();
                match draw(map, &mut rng) {
                    Point::Circle(mut x) => {
                        let s = &self.schedule;
                        self.count_into(
                            (1..=n).map(|i| {
                                x = map.step(x);
                                s.contains_circle_unchecked(i, x)
                            }),
                            &mut out,
                        );
                    }
                    p @ Point::Torus(_) => {
                        let mut y = p;
                        let mut hits = Vec::with_capacity(n);
                        for i in 1..=n {
                            if let Point::Torus(v) = y {
                                y = Point::Torus(map.step_torus(v));
                            }
                            hits.push(self.schedule.contains(i, y)?);
                        }
                        self.count_into(hits.into_iter(), &mut out);
                    }
                }
            }
        }
        Ok(out)
    }

    fn count_into<I: Iterator<Item = bool>>(&self, hits: I, out: &mut Vec<u32>) {
        let mut s = 0u32;
        let mut c = 0;
        for (k, h) in hits.enumerate() {
            s += h as u32;
            if k + 1 == self.checkpoints[c] {
                out.push(s);
                c += 1;
                if c == self.checkpoints.len() {
                    break;
                }
            }
        }
    }

    /// Shift register over the expansion: `cur` holds bits b_{i+1}..b_{i+64} of x
    /// at step i, which decide T^i x ∈ B_i unless the window ties the open left end
    /// of a ball. Returns None on such a tie.
    fn bit_kernel(&self, rng: &mut ChaCha8Rng, tent: bool, out: &mut Vec<u32>) -> Option<()> {
        let mut cur = rng.next_u64();
        let mut nxt = rng.next_u64();
        let mut used = 0u32;
        let mut s = 0u32;
        let mut c = 0;
        let mut next_cp = self.checkpoints[0];
        for (k, arc) in self.arcs.iter().enumerate() {
            let lead = cur >> 63;
            cur = (cur << 1) | (nxt >> 63);
            nxt <<= 1;
            used += 1;
            if used == 64 {
                nxt = rng.next_u64();
                used = 0;
            }
            let v = if tent && lead == 1 { !cur } else { cur };
            if arc.full {
                s += 1;
            } else {
                let t = v.wrapping_sub(arc.lo);
                if t < arc.len {
                    if t == 0 && !arc.closed {
                        return None;
                    }
                    s += 1;
                }
            }
            if k + 1 == next_cp {
                out.push(s);
                c += 1;
                if c == self.checkpoints.len() {
                    break;
                }
                next_cp = self.checkpoints[c];
            }
        }
        Some(())
    }
}

/// Hit counts for trajectories `range`, row-major (trajectory, checkpoint).
pub fn simulate_chunk(plan: &EnsemblePlan, range: Range<usize>) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(range.len() * plan.checkpoints.len());
    for t in range {
        out.extend(plan.trajectory(t as u64)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointStats {
    pub n: usize,
    pub expected: f64,
    pub mean_s: f64,
    /// Unbiased sample variance of S_n (0 for M = 1).
    pub var_s: f64,
    pub mean_ratio: Option<f64>,
    pub sd_ratio: Option<f64>,
    pub mean_z: f64,
    /// â_n² = mean of Z_n², an unbiased estimate of E(S_n − E_n)².
    pub a_hat_sq: f64,
    pub a_hat_sq_se: f64,
    pub ks_log: Option<f64>,
    pub ks_self: Option<f64>,
    /// Quantiles of the log-normed statistic at [`QUANTILE_PROBS`].
    pub quantiles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub map: String,
    pub center: Point,
    pub m: usize,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    pub stats: Vec<CheckpointStats>,
    /// Row-major (trajectory, checkpoint) hit counts.
    pub counts: Vec<u32>,
}

impl EnsembleSummary {
    pub fn count(&self, t: usize, c: usize) -> u32 {
        self.counts[t * self.checkpoints.len() + c]
    }

    pub fn at(&self, n: usize) -> Option<&CheckpointStats> {
        self.stats.iter().find(|s| s.n == n)
    }
}

/// Summary statistics from hit counts produced by [`simulate_chunk`] over all
/// trajectories in order.
pub fn summarize(plan: &EnsemblePlan, counts: Vec<u32>) -> Result<EnsembleSummary> {
    let c = plan.checkpoints.len();
    if counts.len() != plan.m * c {
        return Err(Error::Internal(format!("expected {} counts, got {}", plan.m * c, counts.len())));
    }
    let m = plan.m as f64;
    let mut stats = Vec::with_capacity(c);
    for (j, &n) in plan.checkpoints.iter().enumerate() {
        let e = plan.schedule.expected(n)?;
        let col: Vec<f64> = (0..plan.m).map(|t| counts[t * c + j] as f64).collect();
        let mean_s = mean(&col);
        let var_s = sample_var(&col, mean_s);
        let z: Vec<f64> = col.iter().map(|&s| s - e).collect();
        let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
        let a_hat_sq = mean(&z2);
        let a_hat_sq_se = libm::sqrt(sample_var(&z2, a_hat_sq) / m);
        let (mean_ratio, sd_ratio) = if e > 0.0 {
            let r: Vec<f64> = col.iter().map(|&s| s / e).collect();
            let mr = mean(&r);
            (Some(mr), Some(libm::sqrt(sample_var(&r, mr))))
        } else {
            (None, None)
        };
        let log_n = libm::log(n as f64);
        let log_normed: Option<Vec<f64>> =
            z.iter().map(|&v| normalized_statistic(v, Norming::LogN, log_n, 0.0).ok()).collect();
        let a_hat = libm::sqrt(a_hat_sq);
        let selfn: Option<Vec<f64>> =
            z.iter().map(|&v| normalized_statistic(v, Norming::SelfNormed, log_n, a_hat).ok()).collect();
        let ks_log = log_normed.as_ref().map(|v| ks_distance(v)).transpose()?;
        let ks_self = selfn.as_ref().map(|v| ks_distance(v)).transpose()?;
        let quantiles = log_normed.map(|mut v| {
            v.sort_by(f64::total_cmp);
            QUANTILE_PROBS.iter().map(|&p| quantile_sorted(&v, p)).collect()
        });
        stats.push(CheckpointStats {
            n,
            expected: e,
            mean_s,
            var_s,
            mean_ratio,
            sd_ratio,
            mean_z: mean(&z),
            a_hat_sq,
            a_hat_sq_se,
            ks_log,
            ks_self,
            quantiles,
        });
    }
    Ok(EnsembleSummary {
        map: plan.schedule.map().name(),
        center: plan.schedule.center(),
        m: plan.m,
        seed: plan.seed,
        checkpoints: plan.checkpoints.clone(),
        stats,
        counts,
    })
}

/// Serial ensemble; parallel drivers split [`simulate_chunk`] and call [`summarize`].
pub fn run_ensemble(
    schedule: &TargetSchedule,
    n_max: usize,
    m: usize,
    seed: u64,
    checkpoints: &[usize],
) -> Result<EnsembleSummary> {
    let plan = EnsemblePlan::new(schedule, n_max, m, seed, checkpoints)?;
    let counts = simulate_chunk(&plan, 0..m)?;
    summarize(&plan, counts)
}

/// Map-level entry point; `schedule` must have been built for `map`.
pub fn run_ensemble_for(
    map: &MapSystem,
    schedule: &TargetSchedule,
    n_max: usize,
    m: usize,
    seed: u64,
    checkpoints: &[usize],
) -> Result<EnsembleSummary> {
    if schedule.map() != map {
        return Err(param("schedule was built for a different map"));
    }
    run_ensemble(schedule, n_max, m, seed, checkpoints)
}

pub fn sbc_ratio(s: u64, e: f64) -> Result<f64> {
    if e == 0.0 {
        return Err(Error::Division("E_n = 0 in the SBC ratio"));
    }
    if !(e > 0.0) {
        return Err(param(format!("E_n must be positive, got {e}")));
    }
    Ok(s as f64 / e)
}

pub fn normalized_statistic(z: f64, mode: Norming, log_n: f64, a_hat: f64) -> Result<f64> {
    let d = match mode {
        Norming::LogN => libm::sqrt(log_n),
        Norming::SelfNormed => a_hat,
    };
    if !(d > 0.0) || !d.is_finite() {
        return Err(param(format!("normalizer must be positive, got {d}")));
    }
    Ok(z / d)
}

/// sup |F_M − Φ| with the two-sided formula at the order statistics.
pub fn ks_distance(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(param("KS distance of an empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(param("KS distance of a sample containing NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    let mut d = 0.0f64;
    for (k, &x) in v.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((k as f64 + 1.0) / m - f).max(f - k as f64 / m);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Linear interpolation between order statistics (the usual "type 7" rule).
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn mean(v: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    v.iter().for_each(|&x| s.add(x));
    s.value() / v.len() as f64
}

fn sample_var(v: &[f64], mu: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mut s = CompensatedSum::default();
    v.iter().for_each(|&x| s.add((x - mu) * (x - mu)));
    s.value() / (v.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::normal_quantile;
    use crate::targets::GENERIC_CENTER;

    #[test]
    fn ks_trivial_cases() {
        assert_eq!(ks_distance(&[0.0; 10]).unwrap(), 0.5);
        let m = 200;
        let q: Vec<f64> = (1..=m).map(|k| normal_quantile((k as f64 - 0.5) / m as f64)).collect();
        assert!((ks_distance(&q).unwrap() - 0.5 / m as f64).abs() < 1e-12);
        assert!(ks_distance(&[]).is_err());
    }

    #[test]
    fn ratio_and_norming() {
        assert_eq!(sbc_ratio(0, 1.0).unwrap(), 0.0);
        assert!(matches!(sbc_ratio(3, 0.0), Err(Error::Division(_))));
        assert_eq!(normalized_statistic(0.0, Norming::LogN, 2.0, 0.0).unwrap(), 0.0);
        let ln = 5.0f64;
        let a = normalized_statistic(1.3, Norming::LogN, ln, 0.0).unwrap();
        let b = normalized_statistic(1.3, Norming::SelfNormed, ln, ln.sqrt()).unwrap();
        assert_eq!(a, b);
        assert!(normalized_statistic(1.0, Norming::SelfNormed, ln, 0.0).is_err());
    }

    #[test]
    fn kernel_matches_generic_orbit() {
        for map in [MapSystem::doubling(), MapSystem::tent()] {
            let s = TargetSchedule::build(&map, Point::Circle(GENERIC_CENTER), 1.0, 1.0, 3000).unwrap();
            let plan = EnsemblePlan::new(&s, 3000, 20, 11, &[10, 500, 3000]).unwrap();
            for t in 0..20 {
                let fast = plan.trajectory(t).unwrap();
                let hits = exact_bit_orbit(RngBits(trajectory_rng(11, t)), &s, 3000).unwrap();
                let mut slow = Vec::new();
                plan.count_into(hits.into_iter(), &mut slow);
                assert_eq!(fast, slow);
            }
        }
    }

    #[test]
    fn degenerate_schedule() {
        let map = MapSystem::doubling();
        let s = TargetSchedule::build(&map, Point::Circle(0.3), 1.0, 1e9, 50).unwrap();
        let sum = run_ensemble(&s, 50, 5, 1, &[1, 50]).unwrap();
        for st in &sum.stats {
            assert_eq!(st.mean_s, st.n as f64);
            assert_eq!(st.mean_ratio, Some(1.0));
            assert_eq!(st.a_hat_sq, 0.0);
        }
    }
}
