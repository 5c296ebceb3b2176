//! The decomposition φ_k = ψ_k + (w_{k+1} ∘ T − w_k) and the variance identities.

use alloc::vec::Vec;

use super::Operator;
use crate::error::{param, Result};
use crate::math::CompensatedSum;
use crate::targets::TargetSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecomposeOptions {
    /// Build ψ_k and its residual ‖Pψ_k‖₁.
    pub psi: bool,
    /// Record ∫w_k², ‖w_k‖_∞ and ‖w_k‖₁.
    pub norms: bool,
    /// Keep the per-index functions φ_k, w_k, ψ_k.
    pub retain: bool,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { psi: true, norms: true, retain: false }
    }
}

/// Scalars recorded at step k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub k: usize,
    /// ∫ φ_k dμ.
    pub phi_mean: f64,
    /// E[φ_k²].
    pub phi_sq: f64,
    /// ∫ w_k φ_k dμ.
    pub w_phi: f64,
    pub w_sq: Option<f64>,
    pub w_sup: Option<f64>,
    pub w_l1: Option<f64>,
    pub psi_sq: Option<f64>,
    /// ‖Pψ_k‖₁.
    pub p_psi_l1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DecompositionState<F> {
    pub horizon: usize,
    pub traces: Vec<StepTrace>,
    /// w_{n+1}.
    pub w_last: F,
    pub w_last_sq: f64,
    pub w_last_sup: f64,
    pub w_last_l1: f64,
    /// φ_1..φ_n, w_1..w_n, ψ_1..ψ_n when retained.
    pub phi: Vec<F>,
    pub w: Vec<F>,
    pub psi: Vec<F>,
    /// Some observable is not represented exactly by the model.
    pub approximate: bool,
    /// Bound on the change of a_n² caused by pruning.
    pub truncation_bound: f64,
}

impl<F> DecompositionState<F> {
    /// max_k ‖Pψ_k‖₁ (0 if ψ was not built).
    pub fn max_p_psi(&self) -> f64 {
        self.traces.iter().filter_map(|t| t.p_psi_l1).fold(0.0, f64::max)
    }

    /// max_k |∫ φ_k dμ|.
    pub fn max_phi_mean(&self) -> f64 {
        self.traces.iter().map(|t| libm::fabs(t.phi_mean)).fold(0.0, f64::max)
    }
}

pub fn martingale_decompose<O: Operator>(
    op: &O,
    schedule: &TargetSchedule,
    n: usize,
    opts: DecomposeOptions,
) -> Result<DecompositionState<O::Func>> {
    if n > schedule.n_max() {
        return Err(param(alloc::format!("horizon {n} exceeds the {} available observables", schedule.n_max())));
    }
    let mut traces = Vec::with_capacity(n);
    let (mut phis, mut ws, mut psis) = (Vec::new(), Vec::new(), Vec::new());
    let mut w = op.zero();
    let mut approximate = false;
    let mut truncation_bound = 0.0;
    for k in 1..=n {
        let obs = op.observable(schedule, k)?;
        approximate |= obs.approximate;
        let phi = obs.centered;
        let mut next = phi.clone();
        op.axpy(1.0, &w, &mut next);
        let mut next = op.transfer(&next);
        truncation_bound += op.prune(&mut next, k + 1, n);
        let mut trace = StepTrace {
            k,
            phi_mean: op.integral(&phi),
            phi_sq: op.inner(&phi, &phi),
            w_phi: op.inner(&w, &phi),
            w_sq: None,
            w_sup: None,
            w_l1: None,
            psi_sq: None,
            p_psi_l1: None,
        };
        if opts.norms {
            trace.w_sq = Some(op.inner(&w, &w));
            trace.w_sup = Some(op.sup_norm(&w));
            trace.w_l1 = Some(op.l1_norm(&w));
        }
        if opts.psi {
            let mut psi = phi.clone();
            op.axpy(-1.0, &op.koopman(&next), &mut psi);
            op.axpy(1.0, &w, &mut psi);
            trace.psi_sq = Some(op.inner(&psi, &psi));
            trace.p_psi_l1 = Some(op.l1_norm(&op.transfer(&psi)));
            if opts.retain {
                psis.push(psi);
            }
        }
        traces.push(trace);
        if opts.retain {
            phis.push(phi);
            ws.push(core::mem::replace(&mut w, next));
        } else {
            w = next;
        }
    }
    Ok(DecompositionState {
        horizon: n,
        traces,
        w_last_sq: op.inner(&w, &w),
        w_last_sup: if opts.norms { op.sup_norm(&w) } else { f64::NAN },
        w_last_l1: if opts.norms { op.l1_norm(&w) } else { f64::NAN },
        w_last: w,
        phi: phis,
        w: ws,
        psi: psis,
        approximate,
        truncation_bound,
    })
}

/// w_k = Σ_{j<k} P^{k−j} φ_j evaluated from the definition.
pub fn direct_w<O: Operator>(op: &O, schedule: &TargetSchedule, k: usize) -> Result<O::Func> {
    let mut acc = op.zero();
    for j in 1..k {
        let mut f = op.observable(schedule, j)?.centered;
        for _ in 0..k - j {
            f = op.transfer(&f);
        }
        op.axpy(1.0, &f, &mut acc);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        let abs_residual = libm::fabs(lhs - rhs);
        let scale = libm::fabs(lhs).max(libm::fabs(rhs));
        let rel_residual = if scale > 0.0 { abs_residual / scale } else { 0.0 };
        IdentityCheck { lhs, rhs, abs_residual, rel_residual }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub horizon: usize,
    /// Σ_{i<j} ∫(P^{j−i}φ_i)φ_j against Σ_j ∫ w_j φ_j.
    pub cross_sum: IdentityCheck,
    /// E(Σ φ_i ∘ T^i)² against Σ E[ψ_i²] − ∫w_1² + ∫w_{n+1}².
    pub variance: IdentityCheck,
    pub max_p_psi: f64,
    pub approximate: bool,
}

pub fn variance_identities<O: Operator>(op: &O, schedule: &TargetSchedule, n: usize) -> Result<IdentityReport> {
    let opts = DecomposeOptions { psi: true, norms: false, retain: true };
    let state = martingale_decompose(op, schedule, n, opts)?;
    let mut direct = CompensatedSum::new();
    for i in 0..n {
        let mut f = state.phi[i].clone();
        for j in i + 1..n {
            f = op.transfer(&f);
            direct.add(op.inner(&f, &state.phi[j]));
        }
    }
    let direct = direct.value();
    let via_w = crate::math::compensated_sum(state.traces.iter().map(|t| t.w_phi));
    let sum_sq = crate::math::compensated_sum(state.traces.iter().map(|t| t.phi_sq));
    let sum_psi = crate::math::compensated_sum(state.traces.iter().map(|t| t.psi_sq.unwrap_or(0.0)));
    let w1_sq = state.w.first().map_or(0.0, |w| op.inner(w, w));
    Ok(IdentityReport {
        horizon: n,
        cross_sum: IdentityCheck::new(direct, via_w),
        variance: IdentityCheck::new(sum_sq + 2.0 * direct, sum_psi - w1_sq + state.w_last_sq),
        max_p_psi: state.max_p_psi(),
        approximate: state.approximate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceResult {
    pub checkpoints: Vec<usize>,
    /// a_n² at each checkpoint.
    pub a_sq: Vec<f64>,
    /// Σ_{k≤n} E[φ_k²].
    pub diagonal: Vec<f64>,
    /// 2 Σ_{i<j≤n} ∫(P^{j−i}φ_i)φ_j.
    pub cross: Vec<f64>,
    pub truncation_bound: f64,
    /// The truncation bound is below the model tolerance.
    pub certified: bool,
    pub approximate: bool,
}

/// a_n² = Σ E[φ_i²] + 2 Σ_{i<j} ∫(P^{j−i}φ_i)φ_j at every checkpoint, by the w recurrence.
pub fn exact_variance_path<O: Operator>(
    op: &O,
    schedule: &TargetSchedule,
    checkpoints: &[usize],
    tolerance: f64,
) -> Result<VarianceResult> {
    let n = checkpoints.iter().copied().max().unwrap_or(0);
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param("checkpoints must be strictly increasing"));
    }
    if n > schedule.n_max() {
        return Err(param(alloc::format!("horizon {n} exceeds the {} available observables", schedule.n_max())));
    }
    let mut diag = CompensatedSum::new();
    let mut cross = CompensatedSum::new();
    let mut out = VarianceResult {
        checkpoints: checkpoints.to_vec(),
        a_sq: Vec::new(),
        diagonal: Vec::new(),
        cross: Vec::new(),
        truncation_bound: 0.0,
        certified: true,
        approximate: false,
    };
    let mut w = op.zero();
    let mut next_cp = 0;
    for k in 1..=n {
        let obs = op.observable(schedule, k)?;
        out.approximate |= obs.approximate;
        let phi = obs.centered;
        diag.add(op.inner(&phi, &phi));
        cross.add(2.0 * op.inner(&w, &phi));
        op.axpy(1.0, &phi, &mut w);
        w = op.transfer(&w);
        out.truncation_bound += op.prune(&mut w, k + 1, n);
        while next_cp < checkpoints.len() && checkpoints[next_cp] == k {
            out.diagonal.push(diag.value());
            out.cross.push(cross.value());
            out.a_sq.push(diag.value() + cross.value());
            next_cp += 1;
        }
    }
    while out.a_sq.len() < checkpoints.len() {
        out.diagonal.push(0.0);
        out.cross.push(0.0);
        out.a_sq.push(0.0);
    }
    out.certified = out.truncation_bound < tolerance;
    Ok(out)
}

/// a_n² at a single horizon.
pub fn exact_variance<O: Operator>(op: &O, schedule: &TargetSchedule, n: usize) -> Result<VarianceResult> {
    exact_variance_path(op, schedule, &[n], 1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WTrace {
    /// k = 1..=n+1.
    pub k: Vec<usize>,
    pub sup: Vec<f64>,
    pub l1: Vec<f64>,
}

impl WTrace {
    /// Least-squares slope of ‖w_k‖_∞ against log k over k ∈ [lo, hi].
    pub fn sup_slope(&self, lo: usize, hi: usize) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .k
            .iter()
            .zip(&self.sup)
            .filter(|(k, _)| **k >= lo && **k <= hi)
            .map(|(k, s)| (libm::log(*k as f64), *s))
            .unzip();
        crate::math::ls_slope(&x, &y)
    }

    /// max over k ∈ [lo, hi] of ‖w_k‖₁ · k / log k.
    pub fn l1_scaled_max(&self, lo: usize, hi: usize) -> f64 {
        self.k
            .iter()
            .zip(&self.l1)
            .filter(|(k, _)| **k >= lo.max(2) && **k <= hi)
            .map(|(k, v)| v * *k as f64 / libm::log(*k as f64))
            .fold(0.0, f64::max)
    }

    /// max over k ≤ hi of ‖w_k‖_∞.
    pub fn sup_max(&self, hi: usize) -> f64 {
        self.k.iter().zip(&self.sup).filter(|(k, _)| **k <= hi).map(|(_, s)| *s).fold(0.0, f64::max)
    }
}

/// ‖w_k‖_∞ and ‖w_k‖₁ for k = 1..=n+1 (requires a decomposition with norms).
pub fn w_sup_norm_trace<F>(state: &DecompositionState<F>) -> WTrace {
    let mut t = WTrace { k: Vec::new(), sup: Vec::new(), l1: Vec::new() };
    for s in &state.traces {
        t.k.push(s.k);
        t.sup.push(s.w_sup.unwrap_or(f64::NAN));
        t.l1.push(s.w_l1.unwrap_or(f64::NAN));
    }
    t.k.push(state.horizon + 1);
    t.sup.push(state.w_last_sup);
    t.l1.push(state.w_last_l1);
    t
}
