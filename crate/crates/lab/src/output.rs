//! Files written by a run.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use shrinktarget_core::math::normal_cdf;
use shrinktarget_core::mcstats::{normalized_statistic, EnsembleSummary, Norming};

use crate::config::ExperimentConfig;
use crate::report::{RunMeta, RunReport};

pub const RAW_HEADER: &str = "trajectory_id,checkpoint_n,S_n,Z_n,normalized_statistic";

/// 17 significant digits, enough to read back the same binary64.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".into()
    }
}

pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One record per (trajectory, checkpoint); the statistic column is log-normed and
/// empty where log n = 0.
pub fn raw_csv(e: Option<&EnsembleSummary>) -> String {
    let mut s = String::from(RAW_HEADER);
    s.push('\n');
    let Some(e) = e else { return s };
    for t in 0..e.m {
        for (c, st) in e.stats.iter().enumerate() {
            let hits = e.count(t, c);
            let z = hits as f64 - st.expected;
            let stat = normalized_statistic(z, Norming::LogN, (st.n as f64).ln(), 0.0).map(fmt17).unwrap_or_default();
            let _ = writeln!(s, "{t},{},{hits},{},{stat}", st.n, fmt17(z));
        }
    }
    s
}

/// (Φ(x_(k)), k/M) at the order statistics of the normalized statistic; None when
/// the normalizer vanishes.
pub fn cdf_csv(e: &EnsembleSummary, c: usize, mode: Norming) -> Option<String> {
    let st = &e.stats[c];
    let log_n = (st.n as f64).ln();
    let a_hat = st.a_hat_sq.sqrt();
    let mut xs: Vec<f64> = (0..e.m)
        .map(|t| normalized_statistic(e.count(t, c) as f64 - st.expected, mode, log_n, a_hat).ok())
        .collect::<Option<_>>()?;
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let mut s = String::from("normal_cdf,empirical_cdf\n");
    for (k, x) in xs.iter().enumerate() {
        let _ = writeln!(s, "{},{}", fmt17(normal_cdf(*x)), fmt17((k + 1) as f64 / m));
    }
    Some(s)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
}

pub fn emit_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &RunReport,
    ensemble: Option<&EnsembleSummary>,
    meta: &RunMeta,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, "report.json", &report_json(report))?;
    write(dir, "config.resolved.toml", &cfg.to_toml())?;
    let mut m = serde_json::to_string_pretty(meta)?;
    m.push('\n');
    write(dir, "run_meta.json", &m)?;
    if cfg.output.raw {
        write(dir, "raw.csv", &raw_csv(ensemble))?;
    }
    if let (true, Some(e)) = (cfg.output.cdf, ensemble) {
        for (c, st) in e.stats.iter().enumerate() {
            for (tag, mode) in [("log", Norming::LogN), ("self", Norming::SelfNormed)] {
                if let Some(body) = cdf_csv(e, c, mode) {
                    write(dir, &format!("cdf_{tag}_n{}.csv", st.n), &body)?;
                }
            }
        }
    }
    Ok(())
}
