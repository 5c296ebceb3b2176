//! The quasi-Hölder seminorm |f|_α = sup_{0<ε≤ε0} ε^{-α} ∫ osc(f, B_ε(x)) dx on the circle.

use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::math::{integrate, CompensatedSum};

/// A function on [0, 1) given on a grid `0 = x_0 < x_1 < … < x_K = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridFunction {
    /// Value `values[j]` on `[x_j, x_{j+1})`.
    Step { breaks: Vec<f64>, values: Vec<f64> },
    /// Linear between knots; `values[K]` is the left limit at 1, so a jump at 0 is allowed.
    Linear { knots: Vec<f64>, values: Vec<f64> },
}

impl GridFunction {
    pub fn step(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&breaks)?;
        if values.len() + 1 != breaks.len() {
            return Err(param("a step function needs one value per cell"));
        }
        Ok(GridFunction::Step { breaks, values })
    }

    pub fn linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&knots)?;
        if values.len() != knots.len() {
            return Err(param("a piecewise-linear function needs one value per knot"));
        }
        Ok(GridFunction::Linear { knots, values })
    }

    /// Indicator of [a, b) with 0 ≤ a < b ≤ 1.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        let mut breaks = alloc::vec![0.0];
        let mut values = Vec::new();
        if a > 0.0 {
            breaks.push(a);
            values.push(0.0);
        }
        breaks.push(b);
        values.push(1.0);
        if b < 1.0 {
            breaks.push(1.0);
            values.push(0.0);
        }
        Self::step(breaks, values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            GridFunction::Step { breaks, values } => {
                GridFunction::Step { breaks: breaks.clone(), values: values.iter().map(|v| c * v).collect() }
            }
            GridFunction::Linear { knots, values } => {
                GridFunction::Linear { knots: knots.clone(), values: values.iter().map(|v| c * v).collect() }
            }
        }
    }

    /// ∫ |f| dx.
    pub fn l1(&self) -> f64 {
        let mut s = CompensatedSum::new();
        match self {
            GridFunction::Step { breaks, values } => {
                for (j, v) in values.iter().enumerate() {
                    s.add(libm::fabs(*v) * (breaks[j + 1] - breaks[j]));
                }
            }
            GridFunction::Linear { knots, values } => {
                for j in 0..knots.len() - 1 {
                    let (a, b) = (values[j], values[j + 1]);
                    let h = knots[j + 1] - knots[j];
                    s.add(if a * b >= 0.0 {
                        0.5 * h * libm::fabs(a + b)
                    } else {
                        0.5 * h * (a * a + b * b) / libm::fabs(a - b)
                    });
                }
            }
        }
        s.value()
    }

    fn knots(&self) -> &[f64] {
        match self {
            GridFunction::Step { breaks, .. } => breaks,
            GridFunction::Linear { knots, .. } => knots,
        }
    }
}

fn check_grid(x: &[f64]) -> Result<()> {
    if x.len() < 2 || x[0] != 0.0 || *x.last().unwrap() != 1.0 || x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param("grid must increase strictly from 0 to 1"));
    }
    Ok(())
}

/// Range maximum and minimum over a fixed array.
struct Sparse {
    max: Vec<Vec<f64>>,
    min: Vec<Vec<f64>>,
}

impl Sparse {
    fn new(v: &[f64]) -> Self {
        let mut max = alloc::vec![v.to_vec()];
        let mut min = alloc::vec![v.to_vec()];
        let mut step = 1;
        while 2 * step <= v.len() {
            let (pm, pn) = (max.last().unwrap(), min.last().unwrap());
            let nm: Vec<f64> = (0..=v.len() - 2 * step).map(|i| pm[i].max(pm[i + step])).collect();
            let nn: Vec<f64> = (0..=v.len() - 2 * step).map(|i| pn[i].min(pn[i + step])).collect();
            max.push(nm);
            min.push(nn);
            step *= 2;
        }
        Sparse { max, min }
    }

    /// (max, min) over indices lo..hi (nonempty).
    fn query(&self, lo: usize, hi: usize) -> (f64, f64) {
        let len = hi - lo;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let j = hi - (1 << k);
        (self.max[k][lo].max(self.max[k][j]), self.min[k][lo].min(self.min[k][j]))
    }
}

/// The function unrolled over three periods, [-1, 2).
struct Unrolled {
    /// Step: cell left ends; linear: knots.
    x: Vec<f64>,
    /// Linear only: right limit and left limit at each knot.
    right: Vec<f64>,
    left: Vec<f64>,
    table_hi: Sparse,
    table_lo: Sparse,
    step: bool,
}

impl Unrolled {
    fn new(f: &GridFunction) -> Self {
        let mut x = Vec::new();
        let mut hi_vals = Vec::new();
        let mut lo_vals = Vec::new();
        let mut right = Vec::new();
        let mut left = Vec::new();
        let step = matches!(f, GridFunction::Step { .. });
        for t in [-1.0, 0.0, 1.0] {
            match f {
                GridFunction::Step { breaks, values } => {
                    for (j, v) in values.iter().enumerate() {
                        x.push(breaks[j] + t);
                        hi_vals.push(*v);
                        lo_vals.push(*v);
                    }
                }
                GridFunction::Linear { knots, values } => {
                    let k = knots.len() - 1;
                    for j in 0..k {
                        let l = if j == 0 { values[k] } else { values[j] };
                        let r = values[j];
                        x.push(knots[j] + t);
                        right.push(r);
                        left.push(l);
                        hi_vals.push(r.max(l));
                        lo_vals.push(r.min(l));
                    }
                }
            }
        }
        if !step {
            x.push(2.0);
            let l = match f {
                GridFunction::Linear { values, .. } => *values.last().unwrap(),
                _ => 0.0,
            };
            right.push(l);
            left.push(l);
            hi_vals.push(l);
            lo_vals.push(l);
        }
        let table_hi = Sparse::new(&hi_vals);
        let table_lo = Sparse::new(&lo_vals);
        Unrolled { x, right, left, table_hi, table_lo, step }
    }

    /// Value at y in [-1, 2) for the linear variant.
    fn linear_at(&self, y: f64) -> f64 {
        let j = self.x.partition_point(|&v| v <= y).max(1) - 1;
        let j = j.min(self.x.len() - 2);
        let (x0, x1) = (self.x[j], self.x[j + 1]);
        let (v0, v1) = (self.right[j], self.left[j + 1]);
        v0 + (y - x0) / (x1 - x0) * (v1 - v0)
    }

    /// ess sup − ess inf over the open window (lo, hi), -1 < lo < hi < 2.
    fn osc(&self, lo: f64, hi: f64) -> f64 {
        if self.step {
            // cells [x_j, x_{j+1}) meeting (lo, hi): x_j < hi and x_{j+1} > lo
            let first = self.x.partition_point(|&v| v <= lo).max(1) - 1;
            let end = self.x.partition_point(|&v| v < hi).max(first + 1);
            let (mx, _) = self.table_hi.query(first, end);
            let (_, mn) = self.table_lo.query(first, end);
            mx - mn
        } else {
            let a = self.linear_at(lo);
            let b = self.linear_at(hi);
            let (mut mx, mut mn) = (a.max(b), a.min(b));
            let first = self.x.partition_point(|&v| v <= lo);
            let end = self.x.partition_point(|&v| v < hi);
            if end > first {
                let (h, _) = self.table_hi.query(first, end);
                let (_, l) = self.table_lo.query(first, end);
                mx = mx.max(h);
                mn = mn.min(l);
            }
            mx - mn
        }
    }
}

/// ∫_0^1 osc(f, (x − ε, x + ε)) dx.
pub fn oscillation_integral(f: &GridFunction, eps: f64) -> f64 {
    let u = Unrolled::new(f);
    if eps >= 0.5 {
        return u.osc(-0.5, 1.5);
    }
    let mut ev: Vec<f64> = alloc::vec![0.0, 1.0];
    for &k in f.knots() {
        for y in [k - eps, k + eps, k - eps + 1.0, k + eps - 1.0] {
            if y > 0.0 && y < 1.0 {
                ev.push(y);
            }
        }
    }
    ev.sort_by(f64::total_cmp);
    ev.dedup();
    let mut s = CompensatedSum::new();
    for w in ev.windows(2) {
        let (a, b) = (w[0], w[1]);
        if u.step {
            let m = 0.5 * (a + b);
            s.add(u.osc(m - eps, m + eps) * (b - a));
        } else {
            let g = |x: f64| u.osc(x - eps, x + eps);
            s.add(integrate(&g, a, b, 1e-14));
        }
    }
    s.value()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiHolder {
    pub alpha: f64,
    pub eps0: f64,
    /// (ε, ε^{-α} ∫ osc) on the grid ε0·2^{-m}.
    pub levels: Vec<(f64, f64)>,
    pub seminorm: f64,
    pub l1: f64,
    /// ‖f‖_α = ‖f‖_1 + |f|_α.
    pub norm: f64,
}

pub fn quasi_holder_seminorm(f: &GridFunction, alpha: f64, eps0: f64, levels: u32) -> Result<QuasiHolder> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(param("alpha must lie in (0, 1]"));
    }
    if !(eps0 > 0.0) {
        return Err(param("eps0 must be positive"));
    }
    let mut out = Vec::with_capacity(levels as usize + 1);
    let mut sup = 0.0f64;
    for m in 0..=levels {
        let eps = libm::ldexp(eps0, -(m as i32));
        let v = oscillation_integral(f, eps) / libm::pow(eps, alpha);
        sup = sup.max(v);
        out.push((eps, v));
    }
    let l1 = f.l1();
    Ok(QuasiHolder { alpha, eps0, levels: out, seminorm: sup, l1, norm: l1 + sup })
}
