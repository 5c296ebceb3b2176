//! Report structures. Everything here is a function of the config alone; wall time
//! and timestamps live in [`RunMeta`] so reruns compare byte for byte.

use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub artifact: Artifact,
    pub config: ExperimentConfig,
    pub resolved: Resolved,
    pub results: Results,
    pub verdicts: Vec<VerdictRow>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for Artifact {
    fn default() -> Self {
        Artifact { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub map: String,
    pub center: Vec<f64>,
    pub shape: &'static str,
    pub schedule_length: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<&'static str>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub kind: &'static str,
    pub states: Option<usize>,
    pub exact: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<Vec<SpectralRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identities: Option<IdentitiesBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_trace: Option<WTraceBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sp: Option<Vec<SpRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<Vec<EnsembleRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_vs_ensemble: Option<Vec<VarianceComparison>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gal_koksma: Option<Vec<GkRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumption_c: Option<AssumptionCBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recurrence: Option<Vec<RecurrenceRow>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralRow {
    pub bins: usize,
    pub theta: f64,
    pub iterations: usize,
    pub nilpotent: bool,
    pub block: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub n: usize,
    pub cross_lhs: f64,
    pub cross_rhs: f64,
    pub cross_rel_residual: f64,
    pub variance_lhs: f64,
    pub variance_rhs: f64,
    pub variance_rel_residual: f64,
    pub max_p_psi: f64,
    pub approximate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentitiesBlock {
    pub rows: Vec<IdentityRow>,
    pub nullity_horizon: usize,
    pub max_p_psi: f64,
    pub max_phi_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceRow {
    pub n: usize,
    pub a_sq: f64,
    pub expected: f64,
    pub ratio_expected: f64,
    pub ratio_log: Option<f64>,
    pub diagonal: f64,
    pub cross: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceBlock {
    pub rows: Vec<VarianceRow>,
    pub truncation_bound: f64,
    pub certified: bool,
    pub approximate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WTracePoint {
    pub k: usize,
    pub sup: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WTraceBlock {
    pub horizon: usize,
    pub points: Vec<WTracePoint>,
    pub sup_at_100: Option<f64>,
    pub sup_max: f64,
    pub sup_slope: Option<f64>,
    pub l1_scaled_max_early: f64,
    pub l1_scaled_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpRow {
    pub k: u32,
    pub m: usize,
    pub n: usize,
    pub correlation_sum: f64,
    pub expectation_sum: f64,
    pub constant: f64,
    pub truncation_bound: f64,
    pub approximate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleRow {
    pub n: usize,
    pub expected: f64,
    pub mean_s: f64,
    pub var_s: f64,
    pub mean_ratio: Option<f64>,
    pub sd_ratio: Option<f64>,
    pub mean_z: f64,
    pub a_hat_sq: f64,
    pub a_hat_sq_se: f64,
    pub ks_log: Option<f64>,
    pub ks_self: Option<f64>,
    pub quantile_probs: Vec<f64>,
    pub quantiles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceComparison {
    pub n: usize,
    pub exact: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GkRow {
    pub n: usize,
    pub theta: f64,
    pub max_residual: Option<f64>,
    pub mean_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCRow {
    pub i: usize,
    pub lags: usize,
    pub worst_r: usize,
    pub worst_ratio: f64,
    pub worst_std_error: f64,
    pub verdict: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCBlock {
    pub eta: f64,
    pub kappa: f64,
    pub i_threshold: usize,
    pub eta_regime: &'static str,
    pub tested: Option<[usize; 2]>,
    pub periodic_center: Option<usize>,
    pub verdict: &'static str,
    pub counts: VerdictCounts,
    pub worst: Option<AssumptionCRow>,
    /// Rows at i_min, powers of ten and i_max.
    pub sample: Vec<AssumptionCRow>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerdictCounts {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceRow {
    pub k: usize,
    pub eps: f64,
    pub measure: f64,
    pub std_error: f64,
    pub method: &'static str,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictRow {
    pub mode: &'static str,
    pub check: String,
    pub value: f64,
    /// The config entry the value was judged against, with its value.
    pub tolerance: String,
    pub pass: bool,
}

/// Non-reproducible facts about a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub version: &'static str,
    pub timestamp_unix: u64,
    pub wall_seconds: f64,
    pub threads: usize,
    /// Where the files went; may differ from output.dir via --output-dir.
    pub output_dir: String,
}
