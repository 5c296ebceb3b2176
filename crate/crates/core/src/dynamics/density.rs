use alloc::vec::Vec;

use crate::math::LN_2;

/// Invariant density on [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Uniform,
    /// 1/((1 + x) ln 2).
    Gauss,
    /// Constant `values[k]` on `[breaks[k], breaks[k + 1])`.
    Step {
        breaks: Vec<f64>,
        values: Vec<f64>,
        cdf: Vec<f64>,
    },
}

impl Density {
    /// Normalises `values` so that the density integrates to one.
    pub fn step(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(breaks.len(), values.len() + 1);
        let mut total = 0.0;
        for k in 0..values.len() {
            total += values[k] * (breaks[k + 1] - breaks[k]);
        }
        let values: Vec<f64> = values.iter().map(|v| v / total).collect();
        let mut cdf = Vec::with_capacity(breaks.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for k in 0..values.len() {
            acc += values[k] * (breaks[k + 1] - breaks[k]);
            cdf.push(acc);
        }
        let last = cdf.len() - 1;
        cdf[last] = 1.0;
        Density::Step { breaks, values, cdf }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Gauss => 1.0 / ((1.0 + x) * LN_2),
            Density::Step { breaks, values, .. } => values[piece(breaks, x)],
        }
    }

    /// (inf, sup) of the density.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Density::Uniform => (1.0, 1.0),
            Density::Gauss => (1.0 / (2.0 * LN_2), 1.0 / LN_2),
            Density::Step { values, .. } => values
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Density::Uniform => x,
            Density::Gauss => libm::log1p(x) / LN_2,
            Density::Step { breaks, values, cdf } => {
                if x >= 1.0 {
                    return 1.0;
                }
                let k = piece(breaks, x);
                cdf[k] + values[k] * (x - breaks[k])
            }
        }
    }

    /// μ([a, b)) for 0 ≤ a ≤ b ≤ 1, avoiding cancellation on short intervals.
    pub fn measure(&self, a: f64, b: f64) -> f64 {
        let a = a.clamp(0.0, 1.0);
        let b = b.clamp(0.0, 1.0);
        if b <= a {
            return 0.0;
        }
        match self {
            Density::Uniform => b - a,
            Density::Gauss => libm::log1p((b - a) / (1.0 + a)) / LN_2,
            Density::Step { breaks, values, .. } => {
                let ka = piece(breaks, a);
                let kb = piece(breaks, b);
                if ka == kb {
                    return values[ka] * (b - a);
                }
                let mut s = values[ka] * (breaks[ka + 1] - a);
                for k in ka + 1..kb {
                    s += values[k] * (breaks[k + 1] - breaks[k]);
                }
                s += values[kb] * (b - breaks[kb]);
                s
            }
        }
    }

    /// Measure of the circle arc (a, b) where a may be below 0 or b above 1.
    pub fn arc_measure(&self, a: f64, b: f64) -> f64 {
        if b - a >= 1.0 {
            return 1.0;
        }
        if a < 0.0 {
            self.measure(a + 1.0, 1.0) + self.measure(0.0, b)
        } else if b > 1.0 {
            self.measure(a, 1.0) + self.measure(0.0, b - 1.0)
        } else {
            self.measure(a, b)
        }
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Density::Uniform => u,
            Density::Gauss => libm::exp2(u) - 1.0,
            Density::Step { breaks, values, cdf } => {
                let mut k = match cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                    Ok(k) => k,
                    Err(k) => k.saturating_sub(1),
                };
                if k >= values.len() {
                    k = values.len() - 1;
                }
                while values[k] == 0.0 && k + 1 < values.len() {
                    k += 1;
                }
                let x = breaks[k] + (u - cdf[k]) / values[k];
                x.clamp(breaks[k], breaks[k + 1])
            }
        }
    }

    /// Breakpoints of a step density (empty otherwise).
    pub fn breaks(&self) -> &[f64] {
        match self {
            Density::Step { breaks, .. } => breaks,
            _ => &[],
        }
    }
}

fn piece(breaks: &[f64], x: f64) -> usize {
    let n = breaks.len() - 1;
    match breaks.binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
        Ok(k) => k.min(n - 1),
        Err(k) => k.saturating_sub(1).min(n - 1),
    }
}
