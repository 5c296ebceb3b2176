use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use shrinktarget::output::{cdf_csv, emit_outputs, raw_csv, report_json, RAW_HEADER};
use shrinktarget::report::RunMeta;
use shrinktarget::{parse_config, run_experiment};
use shrinktarget_core::mcstats::Norming;

const BIN: &str = env!("CARGO_BIN_EXE_shrinktarget");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn read_report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const IDENTITIES: &str = r#"
[map]
kind = "doubling"

[targets]
shape = "dyadic"

[run]
n_max = 100
trajectories = 1
seed = 0

[modes]
sbc = false
clt-paper-norm = false
clt-self-norm = false
identities = true

[transfer]
model = "exact-markov"
depth = 8
"#;

const DEGENERATE: &str = r#"
[map]
kind = "tent"

[targets]
gamma = 0.01
constant = 1e9

[run]
n_max = 500
trajectories = 40
seed = 5

[modes]
clt-paper-norm = false
clt-self-norm = false
"#;

const SMALL: &str = r#"
[map]
kind = "gauss"

[run]
n_max = 2000
trajectories = 150
seed = 11
checkpoints = [10, 200, 2000]
"#;

#[test]
fn version_and_validate() {
    let out = cli(&["version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("shrinktarget "));

    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.toml", "[map]\nkind = \"doubling\"\n[run]\nn_max = 10\ntrajectories = 2\nseed = 1\n");
    let out = cli(&["validate", p.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gamma = 1.0") && text.contains("center = \"generic-default\""), "{text}");
    assert_eq!(parse_config(&text).unwrap(), parse_config(&fs::read_to_string(&p).unwrap()).unwrap());

    let bad = write_config(dir.path(), "bad.toml", "[map]\nkind = \"doubling\"\n[targets]\ngamma = 1.5\n[run]\nn_max = 10\ntrajectories = 2\nseed = 1\n");
    let out = cli(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("gamma"), "{err}");
}

#[test]
fn identities_run_passes_with_exact_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.toml", IDENTITIES);
    let out_dir = dir.path().join("out");
    let out = cli(&["run", p.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = read_report(&out_dir);
    assert_eq!(r["passed"], Value::Bool(true));
    assert_eq!(r["resolved"]["model"]["kind"], "exact-markov");
    for row in r["results"]["identities"]["rows"].as_array().unwrap() {
        assert!(row["cross_rel_residual"].as_f64().unwrap() <= 1e-10);
        assert!(row["variance_rel_residual"].as_f64().unwrap() <= 1e-10);
    }
    assert!(r["results"]["identities"]["max_p_psi"].as_f64().unwrap() <= 1e-10);
    // every verdict names the config entry it was judged against
    for v in r["verdicts"].as_array().unwrap() {
        assert!(v["tolerance"].as_str().unwrap().starts_with("tolerances."), "{v}");
    }
    let raw = fs::read_to_string(out_dir.join("raw.csv")).unwrap();
    assert_eq!(raw, format!("{RAW_HEADER}\n"));
}

#[test]
fn degenerate_schedule_gives_ratio_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.toml", DEGENERATE);
    let out_dir = dir.path().join("out");
    let out = cli(&["run", p.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = read_report(&out_dir);
    let last = r["results"]["ensemble"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["mean_ratio"].as_f64(), Some(1.0));
    assert_eq!(last["var_s"].as_f64(), Some(0.0));
}

#[test]
fn failing_verdict_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.toml", &format!("{DEGENERATE}\n[tolerances]\nsbc_ratio_band = [1.5, 2.0]\n"));
    let out_dir = dir.path().join("out");
    let out = cli(&["run", p.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL [sbc]"));
    let out = cli(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cdf_files_are_monotone_and_raw_has_all_records() {
    let cfg = parse_config(SMALL).unwrap();
    let o = run_experiment(&cfg, 2).unwrap();
    let e = o.ensemble.as_ref().unwrap();
    let raw = raw_csv(Some(e));
    let mut lines = raw.lines();
    assert_eq!(lines.next(), Some(RAW_HEADER));
    let recs: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(recs.len(), 150 * 3);
    for r in &recs {
        assert_eq!(r.len(), 5);
        let s: f64 = r[2].parse().unwrap();
        let z: f64 = r[3].parse().unwrap();
        let n: usize = r[1].parse().unwrap();
        let expected = e.at(n).unwrap().expected;
        assert_eq!(z, s - expected);
        let stat: f64 = r[4].parse().unwrap();
        assert!((stat - z / (n as f64).ln().sqrt()).abs() < 1e-15 * (1.0 + stat.abs()));
    }
    for c in 0..3 {
        for mode in [Norming::LogN, Norming::SelfNormed] {
            let body = cdf_csv(e, c, mode).unwrap();
            let rows: Vec<(f64, f64)> = body
                .lines()
                .skip(1)
                .map(|l| {
                    let (a, b) = l.split_once(',').unwrap();
                    (a.parse().unwrap(), b.parse().unwrap())
                })
                .collect();
            assert_eq!(rows.len(), 150);
            assert!(rows.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
            assert_eq!(rows.last().unwrap().1, 1.0);
        }
    }
}

#[test]
fn emission_and_thread_count_are_deterministic() {
    let cfg = parse_config(SMALL).unwrap();
    let a = run_experiment(&cfg, 1).unwrap();
    let b = run_experiment(&cfg, 4).unwrap();
    assert_eq!(report_json(&a.report), report_json(&b.report));
    assert_eq!(raw_csv(a.ensemble.as_ref()), raw_csv(b.ensemble.as_ref()));

    let dir = tempfile::tempdir().unwrap();
    let meta = RunMeta { version: "test", timestamp_unix: 0, wall_seconds: 0.0, threads: 1, output_dir: String::new() };
    let (d1, d2) = (dir.path().join("one"), dir.path().join("two"));
    emit_outputs(&d1, &cfg, &a.report, a.ensemble.as_ref(), &meta).unwrap();
    emit_outputs(&d2, &cfg, &a.report, a.ensemble.as_ref(), &meta).unwrap();
    let mut names: Vec<_> = fs::read_dir(&d1).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for name in names {
        assert_eq!(fs::read(d1.join(&name)).unwrap(), fs::read(d2.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn cli_reports_match_across_threads_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.toml", SMALL);
    let run = |sub: &str, extra: &[&str]| {
        let d = dir.path().join(sub);
        let mut args = vec!["run", p.to_str().unwrap(), "--output-dir", d.to_str().unwrap()];
        args.extend_from_slice(extra);
        cli(&args);
        (fs::read(d.join("report.json")).unwrap(), fs::read(d.join("raw.csv")).unwrap())
    };
    let one = run("t1", &["--threads", "1"]);
    let many = run("t8", &["--threads", "8"]);
    assert!(one == many);
    let seeded = run("s", &["--seed", "12"]);
    assert!(seeded.1 != one.1);
    let r: Value = serde_json::from_slice(&seeded.0).unwrap();
    assert_eq!(r["config"]["run"]["seed"], 12);
}

#[test]
fn golden_report() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_report.json");
    let cfg = parse_config(
        "[map]\nkind = \"doubling\"\n[run]\nn_max = 1000\ntrajectories = 100\nseed = 7\ncheckpoints = [10, 100, 1000]\n",
    )
    .unwrap();
    let text = report_json(&run_experiment(&cfg, 1).unwrap().report);
    if std::env::var_os("UPDATE_GOLDEN").is_some() || !golden.exists() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(&golden, &text).unwrap();
    }
    assert_eq!(text, fs::read_to_string(&golden).unwrap());
}
