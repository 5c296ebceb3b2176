//! Runs the enabled modes in dependency order and assembles the report.

use anyhow::{anyhow, Context, Result};
use shrinktarget_core::diagnostics::{
    assumption_c_report, gal_koksma_from_sums, recurrence_set_measure, sp_dyadic_windows, AssumptionCParams,
    CheckOptions, EtaRegime, IndexCheck, Method, Verdict,
};
use shrinktarget_core::mcstats::{EnsemblePlan, EnsembleSummary, Route, QUANTILE_PROBS};
use shrinktarget_core::transfer::{
    exact_variance_path, martingale_decompose, spectral_gap, variance_identities, w_sup_norm_trace, DecomposeOptions,
    DoublingArcModel, Operator, TransferModel, VarianceResult,
};
use shrinktarget_core::{Error, MapKind, MapSystem, Point, TargetSchedule};

use crate::config::{ExperimentConfig, ModelSpec, Shape};
use crate::parallel;
use crate::report::*;

pub struct Outcome {
    pub report: RunReport,
    pub ensemble: Option<EnsembleSummary>,
}

enum Model {
    Matrix(Box<TransferModel>),
    Arc(DoublingArcModel),
}

struct Verdicts(Vec<VerdictRow>);

impl Verdicts {
    fn push(&mut self, mode: &'static str, check: String, value: f64, tolerance: String, pass: bool) {
        self.0.push(VerdictRow { mode, check, value, tolerance, pass });
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::UniformExact => "uniform-exact",
        Method::PiecewiseExact => "piecewise-exact",
        Method::MonteCarlo => "monte-carlo",
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
        Verdict::Skipped => "skipped",
    }
}

fn center_vec(p: Point) -> Vec<f64> {
    match p {
        Point::Circle(x) => vec![x],
        Point::Torus(v) => v.to_vec(),
    }
}

/// Length the schedule needs to serve every enabled mode.
fn schedule_length(cfg: &ExperimentConfig) -> usize {
    let m = &cfg.modes;
    let t = &cfg.transfer;
    let mut n = cfg.run.n_max;
    if m.identities {
        n = n.max(t.nullity_horizon).max(t.identity_horizons.iter().copied().max().unwrap_or(1));
    }
    if m.variance {
        n = n.max(t.variance_checkpoints.last().copied().unwrap_or(1));
    }
    if m.w_trace {
        n = n.max(t.w_horizon);
    }
    if m.sp {
        n = n.max(1 << (cfg.diagnostics.sp_k_max + 1));
    }
    if m.assumption_c {
        n = n.max(cfg.diagnostics.i_max);
    }
    n
}

fn build_model(cfg: &ExperimentConfig, map: &MapSystem) -> Result<Model> {
    let t = &cfg.transfer;
    let spec = match t.model {
        ModelSpec::Auto if map.is_doubling() => ModelSpec::DoublingArc,
        ModelSpec::Auto if cfg.targets.shape == Shape::Dyadic && map.markov_partition().is_some() => {
            ModelSpec::ExactMarkov
        }
        ModelSpec::Auto => ModelSpec::Ulam,
        s => s,
    };
    Ok(match spec {
        ModelSpec::DoublingArc => Model::Arc(DoublingArcModel::new(map)?),
        ModelSpec::ExactMarkov => Model::Matrix(Box::new(TransferModel::markov_exact(map, t.depth)?)),
        _ => Model::Matrix(Box::new(TransferModel::ulam(map, t.bins)?)),
    })
}

fn model_info(m: &Model) -> ModelInfo {
    match m {
        Model::Matrix(t) => ModelInfo { kind: t.kind().as_str(), states: Some(t.n()), exact: t.is_exact() },
        Model::Arc(_) => ModelInfo { kind: "doubling-arc", states: None, exact: true },
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Outcome> {
    let map = cfg.build_map()?;
    let center = cfg.resolve_center(&map)?;
    let len = schedule_length(cfg);
    let schedule = match cfg.targets.shape {
        Shape::Ball => TargetSchedule::build(&map, center, cfg.targets.gamma, cfg.targets.constant, len),
        Shape::Dyadic => {
            let p = center.circle().ok_or_else(|| anyhow!("dyadic targets need a circle center"))?;
            TargetSchedule::dyadic(&map, p, len)
        }
    }
    .context("building the target schedule")?;
    let pool = parallel::thread_pool(threads)?;
    let mut results = Results::default();
    let mut v = Verdicts(Vec::new());

    if cfg.modes.spectral {
        results.spectral = Some(spectral_mode(cfg, &map, &mut v).context("mode spectral")?);
    }

    let model = if cfg.modes.needs_model() { Some(build_model(cfg, &map).context("building the transfer model")?) } else { None };
    let mut exact_var = None;
    if let Some(m) = &model {
        exact_var = match m {
            Model::Matrix(t) => transfer_modes(t.as_ref(), cfg, &schedule, &mut results, &mut v)?,
            Model::Arc(a) => transfer_modes(a, cfg, &schedule, &mut results, &mut v)?,
        };
    }

    let mut ensemble = None;
    let mut route = None;
    if cfg.modes.needs_ensemble() || cfg.modes.gal_koksma {
        let r = &cfg.run;
        let plan = EnsemblePlan::new(&schedule, r.n_max, r.trajectories, r.seed, &r.checkpoints).context("mode ensemble")?;
        route = Some(match plan.route() {
            Route::ExactBits { tent: false } => "exact-bits",
            Route::ExactBits { tent: true } => "exact-bits-tent",
            Route::Float => "float",
        });
        if cfg.modes.needs_ensemble() {
            let e = parallel::run_ensemble(&plan, &pool).context("mode ensemble")?;
            ensemble_verdicts(cfg, &e, &mut v);
            results.ensemble = Some(e.stats.iter().map(ensemble_row).collect());
            if let (Some(var), Some(md)) = (&exact_var, &model) {
                results.variance_vs_ensemble = Some(compare_variance(cfg, var, &e, model_info(md).exact, &mut v));
            }
            ensemble = Some(e);
        }
        if cfg.modes.gal_koksma {
            results.gal_koksma = Some(gal_koksma_mode(cfg, &schedule, &pool, &mut v).context("mode gal-koksma")?);
        }
    }

    if cfg.modes.assumption_c {
        results.assumption_c = Some(assumption_c_mode(cfg, &schedule, &mut v).context("mode assumption-c")?);
    }
    if cfg.modes.recurrence {
        results.recurrence = Some(recurrence_mode(cfg, &map, &mut v).context("mode recurrence")?);
    }

    let passed = v.0.iter().all(|r| r.pass);
    let report = RunReport {
        artifact: Artifact::default(),
        config: cfg.clone(),
        resolved: Resolved {
            map: map.name(),
            center: center_vec(center),
            shape: match cfg.targets.shape {
                Shape::Ball => "ball",
                Shape::Dyadic => "dyadic",
            },
            schedule_length: len,
            model: model.as_ref().map(model_info),
            route,
        },
        results,
        verdicts: v.0,
        passed,
    };
    Ok(Outcome { report, ensemble })
}

fn spectral_mode(cfg: &ExperimentConfig, map: &MapSystem, v: &mut Verdicts) -> Result<Vec<SpectralRow>> {
    let tol = &cfg.tolerances;
    let mut rows = Vec::new();
    for &bins in &cfg.transfer.spectral_bins {
        let model = TransferModel::ulam(map, bins)?;
        let row = match spectral_gap(&model) {
            Ok(e) => SpectralRow {
                bins,
                theta: e.theta,
                iterations: e.iterations,
                nilpotent: e.nilpotent,
                block: e.block,
                converged: true,
            },
            Err(Error::Convergence { iterations, estimate, .. }) => {
                SpectralRow { bins, theta: estimate, iterations, nilpotent: false, block: 0, converged: false }
            }
            Err(e) => return Err(e.into()),
        };
        v.push("spectral", format!("power iteration converged, N = {bins}"), row.iterations as f64, "relative tolerance 1e-8".into(), row.converged);
        if let Some(target) = tol.spectral_target {
            let dev = (row.theta - target).abs();
            v.push(
                "spectral",
                format!("|θ − {target}| at N = {bins} (θ = {})", row.theta),
                dev,
                format!("tolerances.spectral_abs = {}", tol.spectral_abs),
                row.converged && dev <= tol.spectral_abs,
            );
        }
        rows.push(row);
    }
    Ok(rows)
}

fn transfer_modes<O: Operator>(
    op: &O,
    cfg: &ExperimentConfig,
    schedule: &TargetSchedule,
    results: &mut Results,
    v: &mut Verdicts,
) -> Result<Option<VarianceResult>> {
    let tol = &cfg.tolerances;
    let t = &cfg.transfer;
    if cfg.modes.identities {
        let mut rows = Vec::new();
        for &n in &t.identity_horizons {
            let r = variance_identities(op, schedule, n).context("mode identities")?;
            for (name, c) in [("cross-sum identity", r.cross_sum), ("variance identity", r.variance)] {
                v.push(
                    "identities",
                    format!("{name} relative residual, n = {n}"),
                    c.rel_residual,
                    format!("tolerances.identity_rel = {:e}", tol.identity_rel),
                    c.rel_residual <= tol.identity_rel,
                );
            }
            rows.push(IdentityRow {
                n,
                cross_lhs: r.cross_sum.lhs,
                cross_rhs: r.cross_sum.rhs,
                cross_rel_residual: r.cross_sum.rel_residual,
                variance_lhs: r.variance.lhs,
                variance_rhs: r.variance.rhs,
                variance_rel_residual: r.variance.rel_residual,
                max_p_psi: r.max_p_psi,
                approximate: r.approximate,
            });
        }
        let opts = DecomposeOptions { psi: true, norms: false, retain: false };
        let st = martingale_decompose(op, schedule, t.nullity_horizon, opts).context("mode identities")?;
        let p = st.max_p_psi();
        v.push(
            "identities",
            format!("max ‖Pψ_k‖₁ over k ≤ {}", t.nullity_horizon),
            p,
            format!("tolerances.p_psi = {:e}", tol.p_psi),
            p <= tol.p_psi,
        );
        results.identities =
            Some(IdentitiesBlock { rows, nullity_horizon: t.nullity_horizon, max_p_psi: p, max_phi_mean: st.max_phi_mean() });
    }

    let mut exact = None;
    if cfg.modes.variance {
        let cps = if t.variance_checkpoints.is_empty() { &cfg.run.checkpoints } else { &t.variance_checkpoints };
        let r = exact_variance_path(op, schedule, cps, 1e-12).context("mode variance")?;
        let mut rows = Vec::new();
        for (k, &n) in cps.iter().enumerate() {
            let e = schedule.expected(n)?;
            let ln = (n as f64).ln();
            rows.push(VarianceRow {
                n,
                a_sq: r.a_sq[k],
                expected: e,
                ratio_expected: r.a_sq[k] / e,
                ratio_log: (n > 1).then(|| r.a_sq[k] / ln),
                diagonal: r.diagonal[k],
                cross: r.cross[k],
            });
        }
        let [lo, hi] = tol.variance_band;
        for row in &rows {
            v.push(
                "variance",
                format!("a_n²/E_n at n = {}", row.n),
                row.ratio_expected,
                format!("tolerances.variance_band = [{lo}, {hi}]"),
                (lo..=hi).contains(&row.ratio_expected),
            );
        }
        if rows.len() >= 2 {
            let (a, b) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
            let d = (b.ratio_expected - a.ratio_expected).abs();
            v.push(
                "variance",
                format!("|a_n²/E_n at {} − at {}|", b.n, a.n),
                d,
                format!("tolerances.variance_flatness = {}", tol.variance_flatness),
                d < tol.variance_flatness,
            );
        }
        if let Some(last) = rows.last().filter(|r| r.ratio_log.is_some()) {
            let q = last.ratio_log.unwrap();
            v.push(
                "variance",
                format!("a_n²/log n at n = {}", last.n),
                q,
                format!("tolerances.variance_log_min = {}", tol.variance_log_min),
                q >= tol.variance_log_min,
            );
        }
        v.push("variance", "truncation certified".into(), r.truncation_bound, "residual bound < 1e-12".into(), r.certified);
        results.variance =
            Some(VarianceBlock { rows, truncation_bound: r.truncation_bound, certified: r.certified, approximate: r.approximate });
        exact = Some(r);
    }

    if cfg.modes.w_trace {
        let h = t.w_horizon;
        let opts = DecomposeOptions { psi: false, norms: true, retain: false };
        let st = martingale_decompose(op, schedule, h, opts).context("mode w-trace")?;
        let tr = w_sup_norm_trace(&st);
        let mut points = Vec::new();
        let mut k = 1usize;
        while k <= h + 1 {
            points.push(WTracePoint { k, sup: tr.sup[k - 1], l1: tr.l1[k - 1] });
            k = if k < 10 { k + 1 } else { (k as f64 * 10f64.powf(0.1)).ceil() as usize };
        }
        if points.last().map(|p| p.k) != Some(h + 1) {
            points.push(WTracePoint { k: h + 1, sup: tr.sup[h], l1: tr.l1[h] });
        }
        let sup_at_100 = (h >= 100).then(|| tr.sup[99]);
        let sup_max = tr.sup_max(h);
        let early = tr.l1_scaled_max(10, 100.min(h));
        let all = tr.l1_scaled_max(10, h);
        if let Some(s100) = sup_at_100 {
            v.push(
                "w-trace",
                format!("max_{{k ≤ {h}}} ‖w_k‖_∞ / ‖w_100‖_∞"),
                sup_max / s100,
                format!("tolerances.w_sup_growth = {}", tol.w_sup_growth),
                sup_max <= tol.w_sup_growth * s100,
            );
        }
        v.push(
            "w-trace",
            format!("max over [10, {h}] of ‖w_k‖₁·k/log k relative to [10, 100]"),
            if early > 0.0 { all / early } else { f64::INFINITY },
            format!("tolerances.w_l1_growth = {}", tol.w_l1_growth),
            all <= tol.w_l1_growth * early,
        );
        results.w_trace = Some(WTraceBlock {
            horizon: h,
            points,
            sup_at_100,
            sup_max,
            sup_slope: (h >= 200).then(|| tr.sup_slope(100, h)),
            l1_scaled_max_early: early,
            l1_scaled_max: all,
        });
    }

    if cfg.modes.sp {
        let k_max = cfg.diagnostics.sp_k_max;
        let w = sp_dyadic_windows(op, schedule, k_max).context("mode sp")?;
        let rows: Vec<SpRow> = w
            .iter()
            .enumerate()
            .map(|(k, s)| SpRow {
                k: k as u32,
                m: s.m,
                n: s.n,
                correlation_sum: s.correlation_sum,
                expectation_sum: s.expectation_sum,
                constant: s.constant,
                truncation_bound: s.truncation_bound,
                approximate: s.approximate,
            })
            .collect();
        let mut cs: Vec<f64> = rows.iter().map(|r| r.constant).collect();
        cs.sort_by(f64::total_cmp);
        let median = if cs.len() % 2 == 1 { cs[cs.len() / 2] } else { 0.5 * (cs[cs.len() / 2 - 1] + cs[cs.len() / 2]) };
        let max = *cs.last().unwrap();
        v.push(
            "sp",
            format!("max / median window constant over k ≤ {k_max}"),
            max / median,
            format!("tolerances.sp_spread = {}", tol.sp_spread),
            max <= tol.sp_spread * median,
        );
        results.sp = Some(rows);
    }
    Ok(exact)
}

fn ensemble_row(s: &shrinktarget_core::mcstats::CheckpointStats) -> EnsembleRow {
    EnsembleRow {
        n: s.n,
        expected: s.expected,
        mean_s: s.mean_s,
        var_s: s.var_s,
        mean_ratio: s.mean_ratio,
        sd_ratio: s.sd_ratio,
        mean_z: s.mean_z,
        a_hat_sq: s.a_hat_sq,
        a_hat_sq_se: s.a_hat_sq_se,
        ks_log: s.ks_log,
        ks_self: s.ks_self,
        quantile_probs: QUANTILE_PROBS.to_vec(),
        quantiles: s.quantiles.clone(),
    }
}

fn ensemble_verdicts(cfg: &ExperimentConfig, e: &EnsembleSummary, v: &mut Verdicts) {
    let tol = &cfg.tolerances;
    let last = e.stats.last().expect("checkpoints are nonempty");
    let n = last.n;
    if cfg.modes.sbc {
        let [lo, hi] = tol.sbc_ratio_band;
        let r = last.mean_ratio.unwrap_or(f64::NAN);
        v.push("sbc", format!("mean S_n/E_n at n = {n}"), r, format!("tolerances.sbc_ratio_band = [{lo}, {hi}]"), (lo..=hi).contains(&r));
        if let Some([lo, hi]) = tol.sbc_sd_band {
            let s = last.sd_ratio.unwrap_or(f64::NAN);
            v.push(
                "sbc",
                format!("per-trajectory sd of S_n/E_n at n = {n}"),
                s,
                format!("tolerances.sbc_sd_band = [{lo}, {hi}]"),
                (lo..=hi).contains(&s),
            );
        }
    }
    if cfg.modes.clt_paper_norm {
        let ks = last.ks_log.unwrap_or(f64::NAN);
        v.push("clt-paper-norm", format!("KS distance at n = {n}"), ks, format!("tolerances.ks_final = {}", tol.ks_final), ks <= tol.ks_final);
        let seq: Vec<(usize, f64)> = e.stats.iter().filter_map(|s| s.ks_log.map(|k| (s.n, k))).collect();
        for w in seq.windows(2) {
            let rise = w[1].1 - w[0].1;
            v.push(
                "clt-paper-norm",
                format!("KS increase from n = {} to n = {}", w[0].0, w[1].0),
                rise,
                format!("tolerances.ks_noise = {}", tol.ks_noise),
                rise <= tol.ks_noise,
            );
        }
    }
    if cfg.modes.clt_self_norm {
        let gap = match (last.ks_self, last.ks_log) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => f64::NAN,
        };
        v.push(
            "clt-self-norm",
            format!("|KS self-normed − KS log-normed| at n = {n}"),
            gap,
            format!("tolerances.self_norm_gap = {}", tol.self_norm_gap),
            gap <= tol.self_norm_gap,
        );
    }
}

fn compare_variance(
    cfg: &ExperimentConfig,
    exact: &VarianceResult,
    e: &EnsembleSummary,
    model_exact: bool,
    v: &mut Verdicts,
) -> Vec<VarianceComparison> {
    let mut out = Vec::new();
    for (k, &n) in exact.checkpoints.iter().enumerate() {
        let Some(s) = e.at(n) else { continue };
        let z = if s.a_hat_sq_se > 0.0 { (s.a_hat_sq - exact.a_sq[k]) / s.a_hat_sq_se } else { 0.0 };
        if model_exact && !exact.approximate {
            v.push(
                "variance",
                format!("|â_n² − a_n²| in standard errors at n = {n}"),
                z.abs(),
                format!("tolerances.variance_mc_se = {}", cfg.tolerances.variance_mc_se),
                z.abs() <= cfg.tolerances.variance_mc_se,
            );
        }
        out.push(VarianceComparison { n, exact: exact.a_sq[k], monte_carlo: s.a_hat_sq, std_error: s.a_hat_sq_se, z });
    }
    out
}

/// Ten grid points per decade from gk_n_min, ending at n_max.
fn gk_grid(lo: usize, hi: usize) -> Vec<usize> {
    let mut g = Vec::new();
    let mut k = 0;
    loop {
        let n = (lo as f64 * 10f64.powf(k as f64 / 10.0)).round() as usize;
        if n >= hi {
            break;
        }
        if g.last() != Some(&n) {
            g.push(n);
        }
        k += 1;
    }
    g.push(hi);
    g
}

fn gal_koksma_mode(
    cfg: &ExperimentConfig,
    schedule: &TargetSchedule,
    pool: &rayon::ThreadPool,
    v: &mut Verdicts,
) -> Result<Vec<GkRow>> {
    let d = &cfg.diagnostics;
    let n_max = cfg.run.n_max;
    if d.gk_n_min > n_max {
        return Err(anyhow!("gk_n_min = {} exceeds n_max = {n_max}", d.gk_n_min));
    }
    let grid = gk_grid(d.gk_n_min, n_max);
    // same seed, so these are the first trajectories of the ensemble
    let plan = EnsemblePlan::new(schedule, n_max, d.gk_trajectories, cfg.run.seed, &grid)?;
    let counts = parallel::simulate(&plan, pool)?;
    let expected: Vec<f64> = grid.iter().map(|&n| schedule.expected(n)).collect::<shrinktarget_core::Result<_>>()?;
    let mut max = vec![None::<f64>; grid.len()];
    let mut sum = vec![0.0; grid.len()];
    let mut count = vec![0usize; grid.len()];
    for t in 0..d.gk_trajectories {
        let pts: Vec<_> =
            grid.iter().enumerate().map(|(c, &n)| (n, counts[t * grid.len() + c] as f64, expected[c], expected[c])).collect();
        for (c, p) in gal_koksma_from_sums(&pts, d.gk_eps)?.iter().enumerate() {
            if let Some(r) = p.residual {
                max[c] = Some(max[c].map_or(r, |m: f64| m.max(r)));
                sum[c] += r;
                count[c] += 1;
            }
        }
    }
    let rows: Vec<GkRow> = grid
        .iter()
        .enumerate()
        .map(|(c, &n)| GkRow {
            n,
            theta: expected[c],
            max_residual: max[c],
            mean_residual: (count[c] > 0).then(|| sum[c] / count[c] as f64),
        })
        .collect();
    let worst = rows.iter().filter_map(|r| r.max_residual).fold(f64::NAN, f64::max);
    v.push(
        "gal-koksma",
        format!("max residual over {} trajectories, n ∈ [{}, {n_max}], ε = {}", d.gk_trajectories, d.gk_n_min, d.gk_eps),
        worst,
        format!("tolerances.gk_bound = {}", cfg.tolerances.gk_bound),
        worst <= cfg.tolerances.gk_bound,
    );
    Ok(rows)
}

fn is_power_of_ten(mut i: usize) -> bool {
    while i >= 10 && i.is_multiple_of(10) {
        i /= 10;
    }
    i == 1
}

fn a_row(r: &IndexCheck) -> AssumptionCRow {
    AssumptionCRow {
        i: r.i,
        lags: r.lags,
        worst_r: r.worst_r,
        worst_ratio: r.worst_ratio,
        worst_std_error: r.worst_std_error,
        verdict: verdict_name(r.verdict),
    }
}

fn assumption_c_mode(cfg: &ExperimentConfig, schedule: &TargetSchedule, v: &mut Verdicts) -> Result<AssumptionCBlock> {
    let d = &cfg.diagnostics;
    let params = AssumptionCParams { eta: d.eta, kappa: d.kappa, i_threshold: d.i_threshold };
    let opts = CheckOptions {
        cap: d.preimage_cap,
        samples: d.mc_samples,
        seed: cfg.run.seed,
        force_monte_carlo: d.force_monte_carlo,
    };
    let indices: Vec<usize> = (d.i_min..=d.i_max).step_by(d.i_step).collect();
    let rep = assumption_c_report(schedule, params, &indices, &opts)?;
    let mut counts = VerdictCounts::default();
    for r in &rep.rows {
        match r.verdict {
            Verdict::Pass => counts.pass += 1,
            Verdict::Fail => counts.fail += 1,
            Verdict::Inconclusive => counts.inconclusive += 1,
            Verdict::Skipped => counts.skipped += 1,
        }
    }
    let worst = rep.rows.iter().filter(|r| r.verdict != Verdict::Skipped).max_by(|a, b| a.worst_ratio.total_cmp(&b.worst_ratio));
    let mut sample = Vec::new();
    for r in &rep.rows {
        if r.i == d.i_min || r.i == *indices.last().unwrap() || is_power_of_ten(r.i) {
            sample.push(a_row(r));
        }
    }
    v.push(
        "assumption-c",
        format!(
            "every r ≤ ⌈(log i)^κ⌉ satisfies the short-return bound over the tested indices ({} pass, {} fail, {} inconclusive)",
            counts.pass, counts.fail, counts.inconclusive
        ),
        worst.map_or(0.0, |w| w.worst_ratio),
        format!("diagnostics.eta = {}, diagnostics.kappa = {}", d.eta, d.kappa),
        rep.verdict == Verdict::Pass,
    );
    Ok(AssumptionCBlock {
        eta: d.eta,
        kappa: d.kappa,
        i_threshold: d.i_threshold,
        eta_regime: match rep.regime {
            EtaRegime::Unit => "unit (0, 1)",
            EtaRegime::Extended => "extended [1, 2)",
        },
        tested: rep.tested.map(|(a, b)| [a, b]),
        periodic_center: rep.periodic,
        verdict: verdict_name(rep.verdict),
        counts,
        worst: worst.map(a_row),
        sample,
    })
}

fn recurrence_mode(cfg: &ExperimentConfig, map: &MapSystem, v: &mut Verdicts) -> Result<Vec<RecurrenceRow>> {
    let d = &cfg.diagnostics;
    let tol = &cfg.tolerances;
    let opts = CheckOptions {
        cap: d.preimage_cap,
        samples: d.mc_samples,
        seed: cfg.run.seed,
        force_monte_carlo: d.force_monte_carlo,
    };
    let uniform = !map.is_torus() && map.uniform_full_branches().is_some() && !matches!(map.kind(), MapKind::Tent);
    let mut rows = Vec::new();
    let mut worst_dev: f64 = 0.0;
    for k in 1..=d.recurrence_k_max {
        let base = 2f64.powi(-(k as i32) - 2);
        for eps in [base, base / 4.0, base / 64.0] {
            let e = recurrence_set_measure(map, k, eps, &opts)?;
            worst_dev = worst_dev.max((e.value - 2.0 * eps).abs());
            rows.push(RecurrenceRow {
                k,
                eps,
                measure: e.value,
                std_error: e.std_error,
                method: method_name(e.method),
                ratio: e.value / eps,
            });
        }
    }
    let worst_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    v.push(
        "recurrence",
        format!("max μ(E_k(ε))/ε over k ≤ {}", d.recurrence_k_max),
        worst_ratio,
        format!("tolerances.recurrence_ratio = {}", tol.recurrence_ratio),
        worst_ratio <= tol.recurrence_ratio,
    );
    if uniform {
        v.push(
            "recurrence",
            format!("max |μ(E_k(ε)) − 2ε| over k ≤ {}, ε ≤ 2^(−k−2)", d.recurrence_k_max),
            worst_dev,
            format!("tolerances.recurrence_abs = {:e}", tol.recurrence_abs),
            worst_dev <= tol.recurrence_abs,
        );
    }
    Ok(rows)
}
