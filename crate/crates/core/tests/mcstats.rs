#![allow(clippy::needless_range_loop)]

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use shrinktarget_core::math::{normal_cdf, normal_quantile};
use shrinktarget_core::mcstats::*;
use shrinktarget_core::targets::GENERIC_CENTER;
use shrinktarget_core::transfer::{exact_variance_path, TransferModel};
use shrinktarget_core::{Error, MapSystem, Point, TargetSchedule};

fn generic(map: &MapSystem, n: usize) -> TargetSchedule {
    TargetSchedule::build(map, Point::Circle(GENERIC_CENTER), 1.0, 1.0, n).unwrap()
}

#[test]
fn chunking_does_not_change_counts() {
    for map in [MapSystem::doubling(), MapSystem::tent(), MapSystem::gauss()] {
        let s = generic(&map, 40);
        let plan = EnsemblePlan::new(&s, 40, 97, 5, &[3, 10, 40]).unwrap();
        let all = simulate_chunk(&plan, 0..97).unwrap();
        let mut pieces = Vec::new();
        for r in [0..1, 1..30, 30..31, 31..97] {
            pieces.extend(simulate_chunk(&plan, r).unwrap());
        }
        assert_eq!(all, pieces);
        let a = summarize(&plan, all).unwrap();
        let b = run_ensemble(&s, 40, 97, 5, &[3, 10, 40]).unwrap();
        assert_eq!(a, b);
        let c = run_ensemble(&s, 40, 97, 6, &[3, 10, 40]).unwrap();
        assert_ne!(a.counts, c.counts);
    }
}

#[test]
fn counts_are_bounded_and_monotone() {
    let s = generic(&MapSystem::doubling(), 5000);
    let cps = [1, 2, 50, 999, 5000];
    let e = run_ensemble(&s, 5000, 500, 1, &cps).unwrap();
    for t in 0..500 {
        assert_eq!(e.count(t, 0), 1);
        for c in 1..cps.len() {
            assert!(e.count(t, c) >= e.count(t, c - 1));
            assert!(e.count(t, c) as usize <= cps[c]);
        }
    }
    for (st, &n) in e.stats.iter().zip(&cps) {
        assert!((st.mean_z - (st.mean_s - s.expected(n).unwrap())).abs() < 1e-9);
        assert!(st.a_hat_sq >= 0.0);
    }
}

#[test]
fn mean_hits_match_expectation() {
    let d = MapSystem::doubling();
    let cases = [
        (TargetSchedule::dyadic(&d, GENERIC_CENTER, 10_000).unwrap(), 10_000),
        (TargetSchedule::dyadic(&MapSystem::tent(), 0.7, 10_000).unwrap(), 10_000),
        (generic(&d, 10_000), 10_000),
        (generic(&MapSystem::gauss(), 30), 30),
        (generic(&MapSystem::beta(2.5).unwrap(), 30), 30),
    ];
    for (s, n) in &cases {
        let e = run_ensemble(s, *n, 10_000, 3, &[*n]).unwrap();
        let st = e.at(*n).unwrap();
        let se = (st.var_s / 10_000.0).sqrt();
        let z = (st.mean_s - st.expected) / se;
        assert!(z.abs() < 4.0, "{}: mean {} vs E {} (z = {z})", s.map().name(), st.mean_s, st.expected);
    }
}

#[test]
fn tent_variance_matches_exact_markov() {
    let tent = MapSystem::tent();
    let n = 2000;
    let s = TargetSchedule::dyadic(&tent, 0.7, n).unwrap();
    let model = TransferModel::markov_exact(&tent, 11).unwrap();
    let exact = exact_variance_path(&model, &s, &[n], 1e-12).unwrap();
    assert!(!exact.approximate);
    let mc = run_ensemble(&s, n, 10_000, 9, &[n]).unwrap();
    let st = mc.at(n).unwrap();
    let z = (st.a_hat_sq - exact.a_sq[0]) / st.a_hat_sq_se;
    assert!(z.abs() < 3.0, "â² {} ± {} vs {}", st.a_hat_sq, st.a_hat_sq_se, exact.a_sq[0]);
}

#[test]
fn degenerate_and_trivial_ensembles() {
    let d = MapSystem::doubling();
    let full = TargetSchedule::build(&d, Point::Circle(0.2), 1.0, 1e9, 100).unwrap();
    let e = run_ensemble(&full, 100, 20, 0, &[10, 100]).unwrap();
    for t in 0..20 {
        assert_eq!(e.count(t, 1), 100);
    }
    for st in &e.stats {
        assert_eq!(st.mean_ratio, Some(1.0));
        assert_eq!(st.sd_ratio, Some(0.0));
        assert_eq!(st.a_hat_sq, 0.0);
        // Z_n = 0 for every trajectory: self-norming is undefined
        assert_eq!(st.ks_self, None);
        assert_eq!(st.ks_log, Some(0.5));
    }
    let s = generic(&d, 1);
    let e = run_ensemble(&s, 1, 1, 0, &[1]).unwrap();
    assert_eq!(e.count(0, 0), 1);
    assert_eq!(e.stats[0].mean_ratio, Some(1.0));
    assert_eq!(e.stats[0].var_s, 0.0);
}

#[test]
fn bad_plans_are_rejected() {
    let d = MapSystem::doubling();
    let s = generic(&d, 100);
    assert!(matches!(run_ensemble(&s, 100, 10, 0, &[]), Err(Error::Parameter(_))));
    assert!(run_ensemble(&s, 100, 0, 0, &[10]).is_err());
    assert!(run_ensemble(&s, 100, 10, 0, &[10, 10]).is_err());
    assert!(run_ensemble(&s, 100, 10, 0, &[0]).is_err());
    assert!(run_ensemble(&s, 100, 10, 0, &[101]).is_err());
    assert!(run_ensemble(&s, 200, 10, 0, &[10]).is_err());
    // even-coefficient toral maps lose one bit per step in binary64
    let torus = MapSystem::toral([2, 2]).unwrap();
    let g = TargetSchedule::build(&torus, Point::Torus([0.3, 0.6]), 1.0, 1.0, 1000).unwrap();
    assert!(matches!(run_ensemble(&g, 1000, 10, 0, &[1000]), Err(Error::PrecisionLoss { .. })));
    assert!(run_ensemble(&g, 1000, 10, 0, &[40]).is_ok());
    assert!(run_ensemble_for(&MapSystem::tent(), &s, 100, 10, 0, &[10]).is_err());
}

#[test]
fn ratio_and_normalizers() {
    assert_eq!(sbc_ratio(0, 1.0).unwrap(), 0.0);
    assert_eq!(sbc_ratio(7, 7.0).unwrap(), 1.0);
    assert!(matches!(sbc_ratio(3, 0.0), Err(Error::Division(_))));
    assert!(sbc_ratio(3, -1.0).is_err());
    let l = 13.8f64;
    for mode in [Norming::LogN, Norming::SelfNormed] {
        assert_eq!(normalized_statistic(0.0, mode, l, 2.0).unwrap(), 0.0);
    }
    let a = normalized_statistic(1.7, Norming::LogN, l, 0.0).unwrap();
    let b = normalized_statistic(1.7, Norming::SelfNormed, l, l.sqrt()).unwrap();
    assert!((a - b).abs() < 1e-15);
    assert!(normalized_statistic(1.0, Norming::SelfNormed, l, 0.0).is_err());
    assert!(normalized_statistic(1.0, Norming::LogN, -1.0, 1.0).is_err());
}

#[test]
fn normal_cdf_against_erfc() {
    // 0.5·erfc(−x/√2) from the platform libm
    let table = [
        (-8.0, 6.220960574271819e-16),
        (-5.0, 2.866515718791946e-07),
        (-3.0, 0.0013498980316300957),
        (-1.5, 0.06680720126885809),
        (-0.5, 0.3085375387259869),
        (0.0, 0.5),
        (0.3, 0.6179114221889526),
        (1.0, 0.8413447460685429),
        (2.5, 0.9937903346742238),
        (4.0, 0.9999683287581669),
        (7.0, 0.9999999999987201),
    ];
    for (x, p) in table {
        assert!((normal_cdf(x) - p).abs() <= 1e-15, "Φ({x}) = {} vs {p}", normal_cdf(x));
    }
    for k in 1..100 {
        let u = k as f64 / 100.0;
        assert!((normal_cdf(normal_quantile(u)) - u).abs() < 1e-14);
    }
}

#[test]
fn ks_examples() {
    assert_eq!(ks_distance(&[0.0; 17]).unwrap(), 0.5);
    assert!(ks_distance(&[]).is_err());
    assert!(ks_distance(&[1.0, f64::NAN]).is_err());
    for m in [1usize, 10, 1000] {
        let v: Vec<f64> = (1..=m).map(|k| normal_quantile((k as f64 - 0.5) / m as f64)).collect();
        assert!((ks_distance(&v).unwrap() - 0.5 / m as f64).abs() < 1e-13);
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let v: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let d = ks_distance(&v).unwrap();
    // 1e-3 critical value 1.949/√M
    assert!(d < 1.949 / (1e5f64).sqrt() && d < 0.01, "{d}");
    let shifted: Vec<f64> = v.iter().map(|x| x + 0.1).collect();
    assert!(ks_distance(&shifted).unwrap() > 0.03);
}

#[test]
fn quantiles_interpolate() {
    let v = [1.0, 2.0, 4.0, 8.0];
    assert_eq!(quantile_sorted(&v, 0.0), 1.0);
    assert_eq!(quantile_sorted(&v, 1.0), 8.0);
    assert_eq!(quantile_sorted(&v, 0.5), 3.0);
    let s = generic(&MapSystem::doubling(), 1000);
    let e = run_ensemble(&s, 1000, 400, 4, &[1000]).unwrap();
    let q = e.stats[0].quantiles.as_ref().unwrap();
    assert_eq!(q.len(), QUANTILE_PROBS.len());
    assert!(q.windows(2).all(|w| w[0] <= w[1]));
}
