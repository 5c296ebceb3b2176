//! Finite models of the transfer operator P and the martingale decomposition.
//!
//! Two models implement [`Operator`]: the matrix [`TransferModel`] (Ulam bins or
//! exact Markov cylinders) and [`DoublingArcModel`], which represents functions on
//! the doubling circle as finite sums of centered arc indicators and applies P and
//! composition with T without discretization error.

mod arc;
mod decompose;
pub mod eigen;
mod model;
mod mollify;
mod sparse;
mod spectral;

pub use arc::{ArcFunction, ArcTerm, DoublingArcModel};
pub use decompose::{
    direct_w, exact_variance, exact_variance_path, martingale_decompose, variance_identities, w_sup_norm_trace,
    DecomposeOptions, DecompositionState, IdentityCheck, IdentityReport, StepTrace, VarianceResult, WTrace,
};
pub use model::{ModelKind, TransferModel};
pub use mollify::{mollify_indicator, MollifiedObservable, RadialProfile};
pub use sparse::SparseMatrix;
pub use spectral::{spectral_gap, SpectralEstimate};

use crate::error::Result;
use crate::targets::TargetSchedule;

/// A mean-zero observable φ_i = 1̃_{B_i} − ∫1̃_{B_i} dμ on a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable<F> {
    pub centered: F,
    /// ∫ φ̃_i dμ (the target measure for exact indicators).
    pub mean: f64,
    /// The model does not represent 1_{B_i} exactly.
    pub approximate: bool,
}

/// A finite model of (L², P, U) over an invariant measure μ.
pub trait Operator {
    type Func: Clone;

    fn zero(&self) -> Self::Func;
    /// P f.
    fn transfer(&self, f: &Self::Func) -> Self::Func;
    /// U f = f ∘ T.
    fn koopman(&self, f: &Self::Func) -> Self::Func;
    /// y ← y + a·x.
    fn axpy(&self, a: f64, x: &Self::Func, y: &mut Self::Func);
    fn integral(&self, f: &Self::Func) -> f64;
    fn inner(&self, f: &Self::Func, g: &Self::Func) -> f64;
    fn l1_norm(&self, f: &Self::Func) -> f64;
    fn sup_norm(&self, f: &Self::Func) -> f64;
    fn observable(&self, schedule: &TargetSchedule, i: usize) -> Result<Observable<Self::Func>>;
    /// Whether P and U are represented without discretization error.
    fn is_exact(&self) -> bool;
    /// Drop negligible parts of w_k before step `k` of a run of length `horizon`;
    /// returns a bound on the resulting change of a_n².
    fn prune(&self, _f: &mut Self::Func, _k: usize, _horizon: usize) -> f64 {
        0.0
    }
}
