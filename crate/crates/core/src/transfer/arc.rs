//! Exact P and U for the doubling map on finite sums of centered arc indicators.
//!
//! A term c·(1_A − |A|) has A = [s, s + ℓ) with s, ℓ in units of 2^-128. Because
//! T is injective on arcs of length ≤ 1/2, P(1_A − |A|) = (1_{TA} − |TA|)/2 with
//! TA = [2s, 2s + 2ℓ); arcs longer than 1/2 are replaced by their complements,
//! which flips the sign of the coefficient. Targets carry 64 significant bits, so
//! every term vanishes exactly within 64 applications of P.

use alloc::vec;
use alloc::vec::Vec;

use super::{Observable, Operator};
use crate::dynamics::MapSystem;
use crate::error::{param, Error, Result};
use crate::math::CompensatedSum;
use crate::targets::TargetSchedule;

const HALF: u128 = 1 << 127;
const SCALE: f64 = 1.0 / 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcTerm {
    pub start: u128,
    /// 0 < len ≤ 2^127.
    pub len: u128,
    pub coef: f64,
    /// Applications of P since the term was created.
    pub age: u32,
}

impl ArcTerm {
    /// Term for c·(1_A − |A|), or None if it is the zero function.
    pub fn new(start: u128, len: u128, coef: f64) -> Option<Self> {
        normalise(ArcTerm { start, len, coef, age: 0 })
    }

    pub fn measure(&self) -> f64 {
        self.len as f64 * SCALE
    }
}

fn normalise(mut t: ArcTerm) -> Option<ArcTerm> {
    if t.len == 0 || t.coef == 0.0 {
        return None;
    }
    if t.len > HALF {
        t.start = t.start.wrapping_add(t.len);
        t.len = t.len.wrapping_neg();
        t.coef = -t.coef;
    }
    Some(t)
}

fn overlap(a: &ArcTerm, b: &ArcTerm) -> u128 {
    let t = b.start.wrapping_sub(a.start);
    if t < a.len {
        (a.len).min(t + b.len) - t
    } else if t > b.len.wrapping_neg() {
        t.wrapping_add(b.len).min(a.len)
    } else {
        0
    }
}

/// Σ c_k (1_{A_k} − |A_k|).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArcFunction {
    pub terms: Vec<ArcTerm>,
}

impl ArcFunction {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value at x = X·2^-128.
    pub fn eval(&self, x: u128) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            let inside = x.wrapping_sub(t.start) < t.len;
            s += t.coef * (if inside { 1.0 } else { 0.0 } - t.measure());
        }
        s
    }

    /// Constant pieces as (length in units of 2^-128, value), in order from 0.
    pub fn pieces(&self) -> Vec<(u128, f64)> {
        let mut base = 0.0;
        let mut events: Vec<(u128, f64)> = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            base -= t.coef * t.measure();
            let end = t.start.wrapping_add(t.len);
            if end < t.start && end != 0 {
                base += t.coef;
            }
            events.push((t.start, t.coef));
            if end != 0 {
                events.push((end, -t.coef));
            }
        }
        events.sort_by_key(|e| e.0);
        let mut out = Vec::with_capacity(events.len() + 1);
        let mut cur = base;
        let mut prev = 0u128;
        for (pos, d) in events {
            if pos > prev {
                out.push((pos - prev, cur));
                prev = pos;
            }
            cur += d;
        }
        let rest = prev.wrapping_neg();
        if rest > 0 || out.is_empty() {
            out.push((rest, cur));
        }
        out
    }
}

/// Exact operator model of the doubling map.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublingArcModel {
    map: MapSystem,
    tolerance: f64,
}

impl DoublingArcModel {
    /// Contraction factor of P on arc terms.
    pub const THETA: f64 = 0.5;

    pub fn new(map: &MapSystem) -> Result<Self> {
        if !map.is_doubling() {
            return Err(Error::UnsupportedMap { op: "arc transfer model", map: map.name() });
        }
        Ok(DoublingArcModel { map: map.clone(), tolerance: 1e-12 })
    }

    /// Budget for the total effect of pruned terms on a_n².
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Truncation constant a = 5/|log θ|.
    pub fn truncation_constant() -> f64 {
        5.0 / libm::fabs(libm::log(Self::THETA))
    }
}

impl Operator for DoublingArcModel {
    type Func = ArcFunction;

    fn zero(&self) -> ArcFunction {
        ArcFunction::default()
    }

    fn transfer(&self, f: &ArcFunction) -> ArcFunction {
        let mut terms = Vec::with_capacity(f.terms.len());
        for t in &f.terms {
            if t.len == HALF {
                continue;
            }
            let moved = ArcTerm { start: t.start << 1, len: t.len << 1, coef: 0.5 * t.coef, age: t.age + 1 };
            if let Some(m) = normalise(moved) {
                terms.push(m);
            }
        }
        ArcFunction { terms }
    }

    fn koopman(&self, f: &ArcFunction) -> ArcFunction {
        let mut terms = Vec::with_capacity(2 * f.terms.len());
        for t in &f.terms {
            debug_assert!(t.start & 1 == 0 && t.len & 1 == 0, "arc resolution exhausted");
            let s = t.start >> 1;
            let l = t.len >> 1;
            terms.push(ArcTerm { start: s, len: l, coef: t.coef, age: t.age });
            terms.push(ArcTerm { start: s | HALF, len: l, coef: t.coef, age: t.age });
        }
        ArcFunction { terms }
    }

    fn axpy(&self, a: f64, x: &ArcFunction, y: &mut ArcFunction) {
        if a == 0.0 {
            return;
        }
        y.terms.extend(x.terms.iter().map(|t| ArcTerm { coef: a * t.coef, ..*t }));
    }

    fn integral(&self, _f: &ArcFunction) -> f64 {
        0.0
    }

    fn inner(&self, f: &ArcFunction, g: &ArcFunction) -> f64 {
        let mut s = CompensatedSum::new();
        for a in &f.terms {
            let la = a.measure();
            for b in &g.terms {
                let o = overlap(a, b) as f64 * SCALE;
                s.add(a.coef * b.coef * (o - la * b.measure()));
            }
        }
        s.value()
    }

    fn l1_norm(&self, f: &ArcFunction) -> f64 {
        let mut s = CompensatedSum::new();
        for (len, v) in f.pieces() {
            s.add(len as f64 * SCALE * libm::fabs(v));
        }
        s.value()
    }

    fn sup_norm(&self, f: &ArcFunction) -> f64 {
        f.pieces().iter().fold(0.0, |m, &(_, v)| m.max(libm::fabs(v)))
    }

    fn observable(&self, schedule: &TargetSchedule, i: usize) -> Result<Observable<ArcFunction>> {
        if !schedule.map().is_doubling() {
            return Err(param("arc model requires a doubling-map schedule"));
        }
        let arc = schedule.arc(i)?;
        if arc.full {
            return Ok(Observable { centered: self.zero(), mean: 1.0, approximate: false });
        }
        let terms = ArcTerm::new((arc.lo as u128) << 64, (arc.len as u128) << 64, 1.0).into_iter().collect();
        Ok(Observable { centered: ArcFunction { terms }, mean: arc.measure(), approximate: false })
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn prune(&self, f: &mut ArcFunction, k: usize, horizon: usize) -> f64 {
        let age_cut = Self::truncation_constant() * libm::log((k.max(2)) as f64);
        let coef_cut = 0.5 * self.tolerance / horizon.max(1) as f64;
        let mut dropped = 0.0;
        f.terms.retain(|t| {
            let drop = t.age as f64 > age_cut && libm::fabs(t.coef) <= coef_cut;
            if drop {
                dropped += 2.0 * libm::fabs(t.coef);
            }
            !drop
        });
        dropped
    }
}

impl DoublingArcModel {
    /// Dense samples of f at the midpoints of 2^bits equal cells, for testing.
    pub fn sample(f: &ArcFunction, bits: u32) -> Vec<f64> {
        let n = 1usize << bits;
        let mut out = vec![0.0; n];
        for (k, v) in out.iter_mut().enumerate() {
            let x = ((k as u128) << (128 - bits)) | (1u128 << (127 - bits));
            *v = f.eval(x);
        }
        out
    }
}
