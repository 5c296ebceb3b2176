use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use super::mollify::{cell_profile_integrals, profile_for};
use super::sparse::SparseMatrix;
use super::{Observable, Operator};
use crate::dynamics::{MapKind, MapSystem};
use crate::error::{param, Error, Result};
use crate::math::CompensatedSum;
use crate::targets::{TargetSchedule, TargetShape};

/// Largest state count accepted for an exact Markov model.
pub const MAX_STATES: usize = 1 << 24;
/// Largest Ulam bin count for the Gauss map, whose Ulam matrix has ~N² raw entries.
pub const MAX_GAUSS_BINS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ulam,
    ExactMarkov,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ulam => "ulam",
            ModelKind::ExactMarkov => "exact-markov",
        }
    }
}

/// Matrix model of P on functions that are constant on the cells of a partition.
///
/// With J_ij = μ(cell_i ∩ T⁻¹ cell_j) and w_i = μ(cell_i), the transfer matrix is
/// L_ji = J_ij / w_j and the Koopman matrix is its μ-adjoint K_ij = J_ij / w_i.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferModel {
    kind: ModelKind,
    map: MapSystem,
    boundaries: Vec<f64>,
    weights: Vec<f64>,
    transfer: SparseMatrix,
    koopman: SparseMatrix,
    depth: Option<u32>,
}

impl TransferModel {
    /// Ulam discretization on N equal bins.
    pub fn ulam(map: &MapSystem, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(param(format!("Ulam bin count must be at least 2, got {n}")));
        }
        if map.is_torus() {
            return Err(Error::UnsupportedMap { op: "ulam_matrix", map: map.name() });
        }
        if matches!(map.kind(), MapKind::Gauss) && n > MAX_GAUSS_BINS {
            return Err(Error::Resource { what: "Gauss Ulam bins", count: n as u64, cap: MAX_GAUSS_BINS as u64 });
        }
        let boundaries: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let weights = cell_weights(map, &boundaries);
        let joint = assemble_joint(map, &boundaries, &weights);
        Self::from_joint(ModelKind::Ulam, map, boundaries, weights, joint, None)
    }

    /// Exact model on the depth-d cylinders of the map's Markov partition.
    pub fn markov_exact(map: &MapSystem, depth: u32) -> Result<Self> {
        if depth < 1 {
            return Err(param("Markov model depth must be at least 1"));
        }
        let Some((partition, _)) = map.markov_partition() else {
            return Err(Error::UnsupportedMap { op: "markov_exact_model", map: map.name() });
        };
        let boundaries = markov_boundaries(map, &partition, depth)?;
        let weights = cell_weights(map, &boundaries);
        let joint = assemble_joint(map, &boundaries, &weights);
        Self::from_joint(ModelKind::ExactMarkov, map, boundaries, weights, joint, Some(depth))
    }

    /// Model from a joint matrix J_ij = μ(cell_i ∩ T⁻¹ cell_j); rows and columns of J
    /// must sum to the weights.
    pub fn from_joint(
        kind: ModelKind,
        map: &MapSystem,
        boundaries: Vec<f64>,
        weights: Vec<f64>,
        joint: SparseMatrix,
        depth: Option<u32>,
    ) -> Result<Self> {
        let n = weights.len();
        if boundaries.len() != n + 1 || joint.dim() != n {
            return Err(param("boundaries, weights and joint matrix disagree in size"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(param("every cell must have positive measure"));
        }
        let mut lt = Vec::with_capacity(joint.nnz());
        let mut kt = Vec::with_capacity(joint.nnz());
        for (i, j, v) in joint.triplets() {
            if v < 0.0 {
                return Err(param("joint matrix has a negative entry"));
            }
            lt.push((j as u32, i as u32, v / weights[j]));
            kt.push((i as u32, j as u32, v / weights[i]));
        }
        Ok(TransferModel {
            kind,
            map: map.clone(),
            boundaries,
            weights,
            transfer: SparseMatrix::from_triplets(n, lt),
            koopman: SparseMatrix::from_triplets(n, kt),
            depth,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn map(&self) -> &MapSystem {
        &self.map
    }

    pub fn depth(&self) -> Option<u32> {
        self.depth
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// L, acting on per-cell values.
    pub fn transfer_matrix(&self) -> &SparseMatrix {
        &self.transfer
    }

    /// K, the μ-adjoint of L.
    pub fn koopman_matrix(&self) -> &SparseMatrix {
        &self.koopman
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.transfer.mul_vec(f)
    }

    pub fn compose(&self, f: &[f64]) -> Vec<f64> {
        self.koopman.mul_vec(f)
    }

    /// Every entry of L is a dyadic rational of at most 52 significant bits.
    pub fn is_dyadic(&self) -> bool {
        self.transfer.triplets().all(|(_, _, v)| {
            let (m, _) = libm::frexp(v);
            let s = libm::ldexp(m, 52);
            libm::floor(s) == s
        })
    }

    /// Index of the cell containing x.
    pub fn cell_of(&self, x: f64) -> usize {
        locate(&self.boundaries, x)
    }

    /// Text dump: header "N kind", then one "row col value" line per entry of L.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n(), self.kind.as_str());
        for (r, c, v) in self.transfer.triplets() {
            let _ = writeln!(s, "{r} {c} {v:.16e}");
        }
        s
    }

    /// Per-cell averages of the indicator of the arc (a, b), where a may be negative
    /// or b above 1 for arcs through 0.
    fn arc_averages(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        let d = self.map.density();
        let mut fill = |lo: f64, hi: f64| {
            if hi <= lo {
                return;
            }
            let mut k = locate(&self.boundaries, lo);
            while k < self.n() && self.boundaries[k] < hi {
                let x0 = lo.max(self.boundaries[k]);
                let x1 = hi.min(self.boundaries[k + 1]);
                if x1 > x0 {
                    out[k] += d.measure(x0, x1) / self.weights[k];
                }
                k += 1;
            }
        };
        if b - a >= 1.0 {
            fill(0.0, 1.0);
        } else if a < 0.0 {
            fill(a + 1.0, 1.0);
            fill(0.0, b);
        } else if b > 1.0 {
            fill(a, 1.0);
            fill(0.0, b - 1.0);
        } else {
            fill(a, b);
        }
        for v in &mut out {
            *v = v.min(1.0);
        }
        out
    }
}

impl Operator for TransferModel {
    type Func = Vec<f64>;

    fn zero(&self) -> Vec<f64> {
        vec![0.0; self.n()]
    }

    fn transfer(&self, f: &Vec<f64>) -> Vec<f64> {
        self.transfer.mul_vec(f)
    }

    fn koopman(&self, f: &Vec<f64>) -> Vec<f64> {
        self.koopman.mul_vec(f)
    }

    fn axpy(&self, a: f64, x: &Vec<f64>, y: &mut Vec<f64>) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }

    fn integral(&self, f: &Vec<f64>) -> f64 {
        let mut s = CompensatedSum::new();
        for (w, v) in self.weights.iter().zip(f) {
            s.add(w * v);
        }
        s.value()
    }

    fn inner(&self, f: &Vec<f64>, g: &Vec<f64>) -> f64 {
        let mut s = CompensatedSum::new();
        for k in 0..self.n() {
            s.add(self.weights[k] * f[k] * g[k]);
        }
        s.value()
    }

    fn l1_norm(&self, f: &Vec<f64>) -> f64 {
        let mut s = CompensatedSum::new();
        for (w, v) in self.weights.iter().zip(f) {
            s.add(w * libm::fabs(*v));
        }
        s.value()
    }

    fn sup_norm(&self, f: &Vec<f64>) -> f64 {
        f.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    fn observable(&self, schedule: &TargetSchedule, i: usize) -> Result<Observable<Vec<f64>>> {
        if schedule.map() != &self.map {
            return Err(param("schedule and model are built on different maps"));
        }
        let mu = schedule.measure(i)?;
        if mu >= 1.0 {
            return Ok(Observable { centered: self.zero(), mean: 1.0, approximate: false });
        }
        let (tilde, approximate) = match (schedule.shape(), self.kind) {
            (TargetShape::Cylinder, _) => {
                let arc = schedule.arc(i)?;
                let a = crate::dyadic::from_fraction(arc.lo);
                let t = self.arc_averages(a, a + arc.measure());
                let misaligned = t.iter().any(|&v| v > 0.0 && v < 1.0);
                (t, misaligned)
            }
            (TargetShape::Ball, ModelKind::ExactMarkov) => {
                let c = schedule.center().circle().ok_or_else(|| param("circle schedule expected"))?;
                let r = schedule.radius(i)?;
                (self.arc_averages(c - r, c + r), true)
            }
            (TargetShape::Ball, ModelKind::Ulam) => {
                let c = schedule.center().circle().ok_or_else(|| param("circle schedule expected"))?;
                let profile = profile_for(schedule, i)?;
                let mut t = vec![0.0; self.n()];
                for (k, v) in cell_profile_integrals(&self.boundaries, self.map.density(), c, &profile) {
                    t[k] = (v / self.weights[k]).min(1.0);
                }
                (t, true)
            }
        };
        let mean = self.integral(&tilde);
        let centered = tilde.iter().map(|v| v - mean).collect();
        Ok(Observable { centered, mean, approximate })
    }

    fn is_exact(&self) -> bool {
        self.kind == ModelKind::ExactMarkov
    }
}

pub(crate) fn locate(b: &[f64], x: f64) -> usize {
    let n = b.len() - 1;
    match b.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(k) => k.min(n - 1),
        Err(k) => k.saturating_sub(1).min(n - 1),
    }
}

fn cell_weights(map: &MapSystem, b: &[f64]) -> Vec<f64> {
    b.windows(2).map(|w| map.density().measure(w[0], w[1])).collect()
}

fn markov_boundaries(map: &MapSystem, partition: &[f64], depth: u32) -> Result<Vec<f64>> {
    let mut b = partition.to_vec();
    for _ in 1..depth {
        let mut next = partition.to_vec();
        for br in map.branches() {
            let (ylo, yhi) = br.image();
            for &y in &b {
                if y >= ylo && y <= yhi {
                    let x = (y - br.offset) / br.slope;
                    if x > br.lo && x < br.hi {
                        next.push(x);
                    }
                }
            }
        }
        next.sort_by(|a, b| a.partial_cmp(b).unwrap());
        next.dedup_by(|a, b| libm::fabs(*a - *b) <= 1e-15);
        if next.len() > MAX_STATES + 1 {
            return Err(Error::Resource { what: "Markov model states", count: next.len() as u64 - 1, cap: MAX_STATES as u64 });
        }
        b = next;
    }
    Ok(b)
}

/// J_ij = μ(cell_i ∩ T⁻¹ cell_j) from branchwise preimages, balanced so that row and
/// column sums both equal the cell weights.
fn assemble_joint(map: &MapSystem, b: &[f64], weights: &[f64]) -> SparseMatrix {
    let n = weights.len();
    let density = map.density();
    let mut t: Vec<(u32, u32, f64)> = Vec::new();
    let distribute = |t: &mut Vec<(u32, u32, f64)>, x0: f64, x1: f64, j: usize, exact: Option<f64>| {
        let mut i = locate(b, x0);
        if let Some(v) = exact.filter(|_| x1 <= b[i + 1]) {
            t.push((i as u32, j as u32, v));
            return;
        }
        while i < n && b[i] < x1 {
            let lo = x0.max(b[i]);
            let hi = x1.min(b[i + 1]);
            if hi > lo {
                t.push((i as u32, j as u32, density.measure(lo, hi)));
            }
            i += 1;
        }
    };
    if matches!(map.kind(), MapKind::Gauss) {
        for k in 1..n {
            let kf = k as f64;
            for j in 0..n {
                let (a, c) = (b[j], b[j + 1]);
                let x0 = 1.0 / (kf + c);
                let x1 = 1.0 / (kf + a);
                // log2 of (1 + x1)/(1 + x0) without cancellation
                let gap = (c - a) / ((kf + a) * (kf + c));
                let exact = libm::log1p(gap / (1.0 + x0)) / crate::math::LN_2;
                distribute(&mut t, x0, x1, j, Some(exact));
            }
        }
        let mut colsum = vec![0.0; n];
        for &(_, j, v) in &t {
            colsum[j as usize] += v;
        }
        for j in 0..n {
            let rest = weights[j] - colsum[j];
            if rest > 0.0 {
                t.push((0, j as u32, rest));
            }
        }
    } else {
        for br in map.branches() {
            let (ylo, yhi) = br.image();
            let j0 = locate(b, ylo);
            for j in j0..n {
                if b[j] >= yhi {
                    break;
                }
                if let Some((x0, x1)) = br.preimage(b[j], b[j + 1]) {
                    distribute(&mut t, x0, x1, j, None);
                }
            }
        }
    }
    let mut joint = SparseMatrix::from_triplets(n, t);
    balance(&mut joint, weights);
    joint
}

/// Alternate row and column scaling until both marginals match the weights.
fn balance(j: &mut SparseMatrix, w: &[f64]) {
    let n = w.len();
    let ones = vec![1.0; n];
    for _ in 0..200 {
        let rs = j.row_sums();
        let worst = (0..n).map(|i| libm::fabs(rs[i] / w[i] - 1.0)).fold(0.0, f64::max);
        let cs = j.col_sums();
        let worst = (0..n).map(|i| libm::fabs(cs[i] / w[i] - 1.0)).fold(worst, f64::max);
        if worst <= 2.0 * f64::EPSILON {
            return;
        }
        let a: Vec<f64> = (0..n).map(|i| if rs[i] > 0.0 { w[i] / rs[i] } else { 1.0 }).collect();
        j.scale(&a, &ones);
        let cs = j.col_sums();
        let b: Vec<f64> = (0..n).map(|i| if cs[i] > 0.0 { w[i] / cs[i] } else { 1.0 }).collect();
        j.scale(&ones, &b);
    }
}
