//! Small numeric helpers shared by the modules.

use libm::{erfc, fabs, log, sqrt};

pub const LN_2: f64 = core::f64::consts::LN_2;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if fabs(self.sum) >= fabs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Standard normal CDF through erfc, accurate to a few ulp in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / core::f64::consts::SQRT_2)
}

/// Inverse of [`normal_cdf`] on (0, 1): rational start plus two Newton steps.
pub fn normal_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    // Acklam's coefficients for the initial approximation.
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    let lo = 0.02425;
    let mut x = if u < lo {
        let q = sqrt(-2.0 * log(u));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - lo {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = sqrt(-2.0 * log(1.0 - u));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let inv_sqrt_2pi = 0.398_942_280_401_432_7;
    for _ in 0..3 {
        let err = if u < 0.5 {
            normal_cdf(x) - u
        } else {
            // work with the upper tail to keep relative precision
            (1.0 - u) - 0.5 * erfc(x / core::f64::consts::SQRT_2)
        };
        let pdf = inv_sqrt_2pi * libm::exp(-0.5 * x * x);
        if pdf == 0.0 {
            break;
        }
        x -= err / pdf;
    }
    x
}

const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

/// Ten-point Gauss–Legendre rule on [a, b].
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..5 {
        let d = h * GL_NODES[k];
        s += GL_WEIGHTS[k] * (f(c - d) + f(c + d));
    }
    s * h
}

/// Adaptive Gauss–Legendre quadrature with bisection until two levels agree to `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = gauss_legendre(f, a, m);
        let right = gauss_legendre(f, m, b);
        if depth == 0 || fabs(left + right - whole) <= tol {
            left + right
        } else {
            rec(f, a, m, left, 0.5 * tol, depth - 1) + rec(f, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    rec(f, a, b, gauss_legendre(f, a, b), tol, 40)
}

/// Fractional part in [0, 1).
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - libm::floor(x);
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Distance on the unit circle.
#[inline]
pub fn circle_dist(x: f64, y: f64) -> f64 {
    let d = fabs(x - y);
    let d = d - libm::floor(d);
    if d > 0.5 {
        1.0 - d
    } else {
        d
    }
}

/// Harmonic number H_n by compensated summation.
pub fn harmonic(n: usize) -> f64 {
    compensated_sum((1..=n).map(|i| 1.0 / i as f64))
}

/// Ordinary least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for k in 0..n {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_beats_naive() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..10 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-15)).abs() < 1e-30 + f64::EPSILON * 0.01);
    }

    #[test]
    fn cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-6.0) - 9.865_876_450_376_98e-10).abs() < 1e-23);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &u in &[1e-12, 1e-5, 0.01, 0.2, 0.5, 0.7, 0.99, 1.0 - 1e-9] {
            let x = normal_quantile(u);
            let back = normal_cdf(x);
            assert!((back - u).abs() <= 4e-16 * u.max(1e-3), "{u} {x} {back}");
        }
    }

    #[test]
    fn quadrature_of_smooth() {
        let v = integrate(&|x: f64| 1.0 / ((1.0 + x) * LN_2), 0.0, 1.0, 1e-14);
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn circle_distance_wraps() {
        assert!((circle_dist(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert_eq!(circle_dist(0.3, 0.3), 0.0);
    }
}
