//! Experiment configuration: TOML with fixed sections, unknown keys rejected.

use serde::{Deserialize, Serialize};
use shrinktarget_core::dynamics::sample_initial;
use shrinktarget_core::targets::{GENERIC_CENTER, GENERIC_TORUS_CENTER};
use shrinktarget_core::{MapSystem, MarkovBranch, Point};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    #[serde(default)]
    pub targets: TargetsConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub modes: Modes,
    #[serde(default)]
    pub transfer: TransferConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    Doubling,
    Tent,
    Gauss,
    Beta { beta: f64 },
    Toral { factors: [u32; 2] },
    MarkovLinear { partition: Vec<f64>, branches: Vec<BranchSpec> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub first: usize,
    pub last: usize,
    pub increasing: bool,
}

/// `"generic-default"`, `"random(<seed>)"`, a circle point or a torus pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterSpec {
    Named(String),
    Circle(f64),
    Torus([f64; 2]),
}

impl Default for CenterSpec {
    fn default() -> Self {
        CenterSpec::Named("generic-default".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    #[default]
    Ball,
    Dyadic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsConfig {
    #[serde(default)]
    pub center: CenterSpec,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub constant: f64,
    #[serde(default)]
    pub shape: Shape,
}

impl Default for TargetsConfig {
    fn default() -> Self {
        TargetsConfig { center: CenterSpec::default(), gamma: 1.0, constant: 1.0, shape: Shape::Ball }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_max: usize,
    /// Trajectory count M.
    pub trajectories: usize,
    pub seed: u64,
    /// Empty means {10^3, 10^4.5, 10^6} clipped to n_max, plus n_max.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Modes {
    #[serde(default = "yes")]
    pub sbc: bool,
    #[serde(default = "yes")]
    pub clt_paper_norm: bool,
    #[serde(default = "yes")]
    pub clt_self_norm: bool,
    #[serde(default)]
    pub identities: bool,
    #[serde(default)]
    pub variance: bool,
    #[serde(default)]
    pub w_trace: bool,
    #[serde(default)]
    pub assumption_c: bool,
    #[serde(default)]
    pub sp: bool,
    #[serde(default)]
    pub gal_koksma: bool,
    #[serde(default)]
    pub recurrence: bool,
    #[serde(default)]
    pub spectral: bool,
}

impl Default for Modes {
    fn default() -> Self {
        Modes {
            sbc: true,
            clt_paper_norm: true,
            clt_self_norm: true,
            identities: false,
            variance: false,
            w_trace: false,
            assumption_c: false,
            sp: false,
            gal_koksma: false,
            recurrence: false,
            spectral: false,
        }
    }
}

impl Modes {
    pub fn needs_ensemble(&self) -> bool {
        self.sbc || self.clt_paper_norm || self.clt_self_norm
    }

    pub fn needs_model(&self) -> bool {
        self.identities || self.variance || self.w_trace || self.sp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Doubling: the arc model; dyadic targets on Markov maps: exact Markov; else Ulam.
    #[default]
    Auto,
    Ulam,
    ExactMarkov,
    DoublingArc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_depth")]
    pub depth: u32,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Horizons for the variance identities.
    #[serde(default = "default_identity_horizons")]
    pub identity_horizons: Vec<usize>,
    /// Horizon for max_k ‖Pψ_k‖₁.
    #[serde(default = "default_nullity")]
    pub nullity_horizon: usize,
    /// Empty means the run checkpoints.
    #[serde(default)]
    pub variance_checkpoints: Vec<usize>,
    #[serde(default = "default_w_horizon")]
    pub w_horizon: usize,
    #[serde(default = "default_spectral_bins")]
    pub spectral_bins: Vec<usize>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            model: ModelSpec::Auto,
            depth: default_depth(),
            bins: default_bins(),
            identity_horizons: default_identity_horizons(),
            nullity_horizon: default_nullity(),
            variance_checkpoints: Vec::new(),
            w_horizon: default_w_horizon(),
            spectral_bins: default_spectral_bins(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_threshold")]
    pub i_threshold: usize,
    /// Indices i_min, i_min + i_step, … ≤ i_max checked for Assumption C.
    #[serde(default = "default_threshold")]
    pub i_min: usize,
    #[serde(default = "default_i_max")]
    pub i_max: usize,
    #[serde(default = "one_usize")]
    pub i_step: usize,
    #[serde(default = "default_cap")]
    pub preimage_cap: u64,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub force_monte_carlo: bool,
    #[serde(default = "default_sp_k")]
    pub sp_k_max: u32,
    #[serde(default = "default_rec_k")]
    pub recurrence_k_max: usize,
    #[serde(default = "default_gk_eps")]
    pub gk_eps: f64,
    #[serde(default = "default_gk_traj")]
    pub gk_trajectories: usize,
    #[serde(default = "default_gk_n_min")]
    pub gk_n_min: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            eta: default_eta(),
            kappa: default_kappa(),
            i_threshold: default_threshold(),
            i_min: default_threshold(),
            i_max: default_i_max(),
            i_step: 1,
            preimage_cap: default_cap(),
            mc_samples: default_samples(),
            force_monte_carlo: false,
            sp_k_max: default_sp_k(),
            recurrence_k_max: default_rec_k(),
            gk_eps: default_gk_eps(),
            gk_trajectories: default_gk_traj(),
            gk_n_min: default_gk_n_min(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_rel")]
    pub identity_rel: f64,
    #[serde(default = "default_rel")]
    pub p_psi: f64,
    #[serde(default = "default_sbc_band")]
    pub sbc_ratio_band: [f64; 2],
    /// Band for the per-trajectory spread of S_n/E_n; unchecked when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbc_sd_band: Option<[f64; 2]>,
    #[serde(default = "default_ks_final")]
    pub ks_final: f64,
    #[serde(default = "default_ks_noise")]
    pub ks_noise: f64,
    #[serde(default = "default_self_gap")]
    pub self_norm_gap: f64,
    #[serde(default = "default_var_band")]
    pub variance_band: [f64; 2],
    #[serde(default = "default_flat")]
    pub variance_flatness: f64,
    #[serde(default = "default_log_min")]
    pub variance_log_min: f64,
    /// Allowed |â_n² − a_n²| in Monte Carlo standard errors.
    #[serde(default = "default_mc_se")]
    pub variance_mc_se: f64,
    #[serde(default = "two")]
    pub w_sup_growth: f64,
    #[serde(default = "two")]
    pub w_l1_growth: f64,
    #[serde(default = "two")]
    pub sp_spread: f64,
    #[serde(default = "default_rec_abs")]
    pub recurrence_abs: f64,
    /// Bound on μ(E_k(ε))/ε.
    #[serde(default = "default_rec_ratio")]
    pub recurrence_ratio: f64,
    /// Expected second eigenvalue modulus; unchecked when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_target: Option<f64>,
    #[serde(default = "default_spectral_abs")]
    pub spectral_abs: f64,
    #[serde(default = "default_gk_bound")]
    pub gk_bound: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        toml::from_str("").expect("defaults parse")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "yes")]
    pub raw: bool,
    #[serde(default = "yes")]
    pub cdf: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), raw: true, cdf: true }
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_depth() -> u32 {
    10
}
fn default_bins() -> usize {
    1024
}
fn default_identity_horizons() -> Vec<usize> {
    vec![1, 10, 100]
}
fn default_nullity() -> usize {
    200
}
fn default_w_horizon() -> usize {
    10_000
}
fn default_spectral_bins() -> Vec<usize> {
    vec![16, 256, 4096]
}
fn default_eta() -> f64 {
    0.5
}
fn default_kappa() -> f64 {
    1.5
}
fn default_threshold() -> usize {
    100
}
fn default_i_max() -> usize {
    10_000
}
fn default_cap() -> u64 {
    10_000_000
}
fn default_samples() -> usize {
    100_000
}
fn default_sp_k() -> u32 {
    18
}
fn default_rec_k() -> usize {
    20
}
fn default_gk_eps() -> f64 {
    0.1
}
fn default_gk_traj() -> usize {
    100
}
fn default_gk_n_min() -> usize {
    1000
}
fn default_rel() -> f64 {
    1e-10
}
fn default_sbc_band() -> [f64; 2] {
    [0.95, 1.05]
}
fn default_ks_final() -> f64 {
    0.12
}
fn default_ks_noise() -> f64 {
    0.01
}
fn default_self_gap() -> f64 {
    0.03
}
fn default_var_band() -> [f64; 2] {
    [0.7, 1.3]
}
fn default_flat() -> f64 {
    0.1
}
fn default_log_min() -> f64 {
    0.9
}
fn default_mc_se() -> f64 {
    3.0
}
fn default_rec_abs() -> f64 {
    1e-12
}
fn default_rec_ratio() -> f64 {
    4.0
}
fn default_spectral_abs() -> f64 {
    1e-6
}
fn default_gk_bound() -> f64 {
    5.0
}
fn default_dir() -> String {
    "shrinktarget-out".into()
}

/// Checkpoints {10^3, 10^4.5, 10^6} below n_max, followed by n_max.
pub fn default_checkpoints(n_max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [1_000usize, 31_623, 1_000_000].into_iter().filter(|&c| c < n_max).collect();
    v.push(n_max);
    v
}

impl ExperimentConfig {
    /// Resolved config as TOML; parsing it back gives the same config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build_map(&self) -> Result<MapSystem, ConfigError> {
        let m = match &self.map {
            MapSpec::Doubling => Ok(MapSystem::doubling()),
            MapSpec::Tent => Ok(MapSystem::tent()),
            MapSpec::Gauss => Ok(MapSystem::gauss()),
            MapSpec::Beta { beta } => MapSystem::beta(*beta),
            MapSpec::Toral { factors } => MapSystem::toral(*factors),
            MapSpec::MarkovLinear { partition, branches } => MapSystem::markov_linear(
                partition.clone(),
                branches
                    .iter()
                    .map(|b| MarkovBranch { first: b.first, last: b.last, increasing: b.increasing })
                    .collect(),
            ),
        };
        m.map_err(|e| ConfigError { line: None, message: format!("[map]: {e}") })
    }

    pub fn resolve_center(&self, map: &MapSystem) -> Result<Point, ConfigError> {
        let err = |m: String| ConfigError { line: None, message: format!("[targets] center: {m}") };
        match &self.targets.center {
            CenterSpec::Named(s) if s == "generic-default" => Ok(if map.is_torus() {
                Point::Torus(GENERIC_TORUS_CENTER)
            } else {
                Point::Circle(GENERIC_CENTER)
            }),
            CenterSpec::Named(s) => {
                let seed = s
                    .strip_prefix("random(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|r| r.trim().parse::<u64>().ok())
                    .ok_or_else(|| err(format!("expected \"generic-default\", \"random(<seed>)\" or a point, got {s:?}")))?;
                Ok(sample_initial(map, seed, 1)[0])
            }
            CenterSpec::Circle(x) if !map.is_torus() => Ok(Point::Circle(*x)),
            CenterSpec::Torus(p) if map.is_torus() => Ok(Point::Torus(*p)),
            _ => Err(err("point dimension does not match the map".into())),
        }
    }
}

/// Parse, apply defaults and validate.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_at(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    if cfg.run.checkpoints.is_empty() {
        cfg.run.checkpoints = default_checkpoints(cfg.run.n_max);
    }
    validate(&cfg).map_err(|(section, key, message)| ConfigError {
        line: key_line(text, section, key),
        message: format!("[{section}] {key}: {message}"),
    })?;
    let map = cfg.build_map()?;
    cfg.resolve_center(&map)?;
    Ok(cfg)
}

type Violation = (&'static str, &'static str, String);

fn check(ok: bool, section: &'static str, key: &'static str, msg: impl FnOnce() -> String) -> Result<(), Violation> {
    if ok {
        Ok(())
    } else {
        Err((section, key, msg()))
    }
}

fn increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn validate(c: &ExperimentConfig) -> Result<(), Violation> {
    let t = &c.targets;
    check(t.gamma > 0.0 && t.gamma <= 1.0, "targets", "gamma", || format!("must lie in (0, 1], got {}", t.gamma))?;
    check(t.constant > 0.0 && t.constant.is_finite(), "targets", "constant", || {
        format!("must be positive, got {}", t.constant)
    })?;
    let r = &c.run;
    check(r.n_max >= 1, "run", "n_max", || "must be positive".into())?;
    check(r.trajectories >= 1, "run", "trajectories", || "must be positive".into())?;
    check(increasing(&r.checkpoints), "run", "checkpoints", || "must be strictly increasing".into())?;
    check(r.checkpoints.iter().all(|&k| k >= 1 && k <= r.n_max), "run", "checkpoints", || {
        format!("must lie in [1, {}]", r.n_max)
    })?;
    let x = &c.transfer;
    check(x.depth >= 1, "transfer", "depth", || "must be positive".into())?;
    check(x.bins >= 2, "transfer", "bins", || "must be at least 2".into())?;
    check(x.identity_horizons.iter().all(|&n| n >= 1), "transfer", "identity_horizons", || "must be positive".into())?;
    check(x.nullity_horizon >= 1, "transfer", "nullity_horizon", || "must be positive".into())?;
    check(x.w_horizon >= 1, "transfer", "w_horizon", || "must be positive".into())?;
    check(increasing(&x.variance_checkpoints) && !x.variance_checkpoints.contains(&0), "transfer", "variance_checkpoints", || {
        "must be positive and strictly increasing".into()
    })?;
    check(x.spectral_bins.iter().all(|&n| n >= 2), "transfer", "spectral_bins", || "must be at least 2".into())?;
    let d = &c.diagnostics;
    check(d.eta > 0.0 && d.eta < 2.0, "diagnostics", "eta", || format!("must lie in (0, 2), got {}", d.eta))?;
    check(d.kappa > 1.0, "diagnostics", "kappa", || format!("must exceed 1, got {}", d.kappa))?;
    check(d.i_min >= 1 && d.i_min <= d.i_max, "diagnostics", "i_min", || "need 1 ≤ i_min ≤ i_max".into())?;
    check(d.i_step >= 1, "diagnostics", "i_step", || "must be positive".into())?;
    check(d.preimage_cap >= 1, "diagnostics", "preimage_cap", || "must be positive".into())?;
    check(d.mc_samples >= 1, "diagnostics", "mc_samples", || "must be positive".into())?;
    check(d.recurrence_k_max >= 1, "diagnostics", "recurrence_k_max", || "must be positive".into())?;
    check(d.gk_eps > 0.0, "diagnostics", "gk_eps", || "must be positive".into())?;
    check(d.gk_trajectories >= 1, "diagnostics", "gk_trajectories", || "must be positive".into())?;
    check(d.gk_n_min >= 1, "diagnostics", "gk_n_min", || "must be positive".into())?;
    let l = &c.tolerances;
    for (key, band) in [("sbc_ratio_band", l.sbc_ratio_band), ("variance_band", l.variance_band)] {
        check(band[0] <= band[1], "tolerances", key, || "band must be [low, high]".into())?;
    }
    if let Some(b) = l.sbc_sd_band {
        check(b[0] <= b[1], "tolerances", "sbc_sd_band", || "band must be [low, high]".into())?;
    }
    for (key, v) in [
        ("identity_rel", l.identity_rel),
        ("p_psi", l.p_psi),
        ("ks_final", l.ks_final),
        ("ks_noise", l.ks_noise),
        ("self_norm_gap", l.self_norm_gap),
        ("variance_flatness", l.variance_flatness),
        ("variance_mc_se", l.variance_mc_se),
        ("w_sup_growth", l.w_sup_growth),
        ("w_l1_growth", l.w_l1_growth),
        ("sp_spread", l.sp_spread),
        ("recurrence_abs", l.recurrence_abs),
        ("recurrence_ratio", l.recurrence_ratio),
        ("spectral_abs", l.spectral_abs),
        ("gk_bound", l.gk_bound),
    ] {
        check(v >= 0.0, "tolerances", key, || format!("must be nonnegative, got {v}"))?;
    }
    check(!c.output.dir.is_empty(), "output", "dir", || "must not be empty".into())?;
    Ok(())
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside `[section]`, or of the section header if the key is absent.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                header = Some(k + 1);
            }
        } else if current == section {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == key {
                    return Some(k + 1);
                }
            }
        }
    }
    header
}
