use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use shrinktarget_core::dynamics::{exact_bit_orbit, sample_initial, RngBits, WordBits};
use shrinktarget_core::targets::GENERIC_CENTER;
use shrinktarget_core::{Error, MapSystem, MarkovBranch, Point, TargetSchedule};

/// Composite Simpson rule, independent of the crate's quadrature.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn gauss_density(x: f64) -> f64 {
    1.0 / ((1.0 + x) * std::f64::consts::LN_2)
}

fn shipped_maps() -> Vec<MapSystem> {
    let markov = MapSystem::markov_linear(
        vec![0.0, 0.25, 0.5, 1.0],
        vec![
            MarkovBranch { first: 1, last: 2, increasing: true },
            MarkovBranch { first: 0, last: 2, increasing: false },
            MarkovBranch { first: 0, last: 2, increasing: true },
        ],
    )
    .unwrap();
    vec![
        MapSystem::doubling(),
        MapSystem::tent(),
        MapSystem::gauss(),
        MapSystem::beta(3.0).unwrap(),
        MapSystem::beta(2.5).unwrap(),
        MapSystem::beta((1.0 + 5f64.sqrt()) / 2.0).unwrap(),
        markov,
    ]
}

#[test]
fn iterate_examples() {
    let d = MapSystem::doubling();
    assert_eq!(d.iterate(Point::Circle(0.25), 1).unwrap(), Point::Circle(0.5));
    let Point::Circle(y) = d.iterate(Point::Circle(1.0 / 3.0), 2).unwrap() else { panic!() };
    assert!((y - 1.0 / 3.0).abs() < 1e-15);
    let g = MapSystem::gauss();
    let Point::Circle(y) = g.iterate(Point::Circle(GENERIC_CENTER), 1).unwrap() else { panic!() };
    assert!((y - GENERIC_CENTER).abs() < 1e-14);
    assert_eq!(d.iterate(Point::Circle(0.7), 0).unwrap(), Point::Circle(0.7));
    assert!(matches!(d.iterate(Point::Circle(1.2), 1), Err(Error::Domain(_))));
    let t = MapSystem::toral([2, 3]).unwrap();
    let Point::Torus(v) = t.iterate(Point::Torus([0.3, 0.3]), 1).unwrap() else { panic!() };
    assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.9).abs() < 1e-15);
}

#[test]
fn iterate_composes() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(4);
    for map in [MapSystem::gauss(), MapSystem::beta(2.5).unwrap(), MapSystem::tent()] {
        for _ in 0..50 {
            let x = Point::Circle(rng.random::<f64>());
            let (a, b) = (rng.random_range(0..15), rng.random_range(0..15));
            let direct = map.iterate(x, a + b).unwrap();
            let split = map.iterate(map.iterate(x, a).unwrap(), b).unwrap();
            assert_eq!(direct, split);
        }
    }
}

#[test]
fn invariant_densities_integrate_to_one() {
    for map in shipped_maps() {
        let d = map.density();
        let breaks: Vec<f64> = d.breaks().to_vec();
        let mut pts = vec![0.0, 1.0];
        pts.extend(breaks);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        // one-sided values at the ends of each piece
        let total: f64 = pts
            .windows(2)
            .map(|w| {
                let eps = 1e-12 * (w[1] - w[0]);
                simpson(|x| d.value(x.clamp(w[0] + eps, w[1] - eps)), w[0], w[1], 2000)
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-10, "{}: {total}", map.name());
        let (lo, hi) = d.bounds();
        assert!(lo > 0.0 && hi < f64::INFINITY && lo <= hi);
        assert!(map.min_expansion() > 1.0);
    }
}

#[test]
fn measure_preserved_by_preimages() {
    for map in shipped_maps() {
        let d = map.density();
        let cap = 1 << 20;
        // Gauss branches beyond the cap lie in [0, 1/(cap + 1))
        let tail = if map.is_piecewise_linear() { 0.0 } else { d.measure(0.0, 1.0 / (cap as f64 + 1.0)) };
        for k in 0..32 {
            let (a, b) = (k as f64 / 32.0, (k + 1) as f64 / 32.0);
            let pre: f64 = map.preimages(a, b, cap).iter().map(|&(x, y)| d.measure(x, y)).sum();
            let err = d.measure(a, b) - pre;
            assert!(err > -1e-9 && err < 1e-9 + tail, "{} cell {k}: {pre}", map.name());
        }
    }
}

#[test]
fn markov_images_are_unions_of_cells() {
    let maps = shipped_maps();
    let m = maps.last().unwrap();
    let (part, _) = m.markov_partition().unwrap();
    for b in m.branches() {
        let (lo, hi) = b.image();
        assert!(part.iter().any(|&p| (p - lo).abs() < 1e-15));
        assert!(part.iter().any(|&p| (p - hi).abs() < 1e-15));
    }
}

#[test]
fn sampling_means() {
    let m = 100_000;
    let xs = sample_initial(&MapSystem::doubling(), 1, m);
    let mean: f64 = xs.iter().map(|p| p.circle().unwrap()).sum::<f64>() / m as f64;
    assert!((mean - 0.5).abs() < 3.0 / (12.0 * m as f64).sqrt());
    let xs = sample_initial(&MapSystem::gauss(), 2, m);
    let mean: f64 = xs.iter().map(|p| p.circle().unwrap()).sum::<f64>() / m as f64;
    let mu = simpson(|x| x * gauss_density(x), 0.0, 1.0, 4000);
    let var = simpson(|x| (x - mu) * (x - mu) * gauss_density(x), 0.0, 1.0, 4000);
    assert!((mean - mu).abs() < 3.0 * (var / m as f64).sqrt());
    assert!(sample_initial(&MapSystem::gauss(), 2, 0).is_empty());
    assert_eq!(sample_initial(&MapSystem::gauss(), 9, 10), sample_initial(&MapSystem::gauss(), 9, 10));
}

#[test]
fn sampling_passes_chi_square() {
    // 63 degrees of freedom, upper 1e-3 point
    const CRIT: f64 = 103.442;
    let m = 100_000;
    for (seed, map) in shipped_maps().into_iter().enumerate() {
        let d = map.density();
        let mut counts = [0usize; 64];
        for p in sample_initial(&map, seed as u64 + 10, m) {
            counts[(p.circle().unwrap() * 64.0) as usize] += 1;
        }
        let chi: f64 = (0..64)
            .map(|k| {
                let e = m as f64 * d.measure(k as f64 / 64.0, (k + 1) as f64 / 64.0);
                (counts[k] as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi < CRIT, "{}: chi² = {chi}", map.name());
    }
}

#[test]
fn ball_measures() {
    let d = MapSystem::doubling();
    assert!((d.measure_of_ball(Point::Circle(0.77), 0.005).unwrap() - 0.01).abs() < 1e-15);
    assert_eq!(d.measure_of_ball(Point::Circle(0.2), 0.7).unwrap(), 1.0);
    let t = MapSystem::toral([2, 2]).unwrap();
    let m = t.measure_of_ball(Point::Torus([0.5, 0.5]), 0.1).unwrap();
    assert!((m - std::f64::consts::PI * 0.01).abs() < 1e-15);
    let g = MapSystem::gauss();
    let m = g.measure_of_ball(Point::Circle(0.4), 0.05).unwrap();
    let q = simpson(gauss_density, 0.35, 0.45, 1000);
    assert!((m - q).abs() < 1e-12, "{m} vs {q}");
    // wraps past 0
    let q = simpson(gauss_density, 0.0, 0.05, 1000) + simpson(gauss_density, 0.95, 1.0, 1000);
    assert!((g.measure_of_ball(Point::Circle(0.0), 0.05).unwrap() - q).abs() < 1e-12);
}

/// T^i x for x = k/2^L in exact rationals.
fn rational_orbit(bits: &[bool], steps: usize, tent: bool) -> Vec<BigRational> {
    let mut num = BigInt::zero();
    for &b in bits {
        num = num * 2 + if b { 1 } else { 0 };
    }
    let mut x = BigRational::new(num, BigInt::one() << bits.len());
    let one = BigRational::one();
    let half = BigRational::new(1.into(), 2.into());
    let mut out = Vec::new();
    for _ in 0..steps {
        let two = BigRational::from_integer(2.into());
        x = if tent {
            if x < half {
                &x * &two
            } else {
                &two - &x * &two
            }
        } else {
            let y = &x * &two;
            if y >= one {
                y - &one
            } else {
                y
            }
        };
        if x == one {
            x = BigRational::zero();
        }
        out.push(x.clone());
    }
    out
}

fn rational_hits(s: &TargetSchedule, orbit: &[BigRational]) -> Vec<bool> {
    let Point::Circle(p) = s.center() else { panic!() };
    let p = BigRational::from_float(p).unwrap();
    orbit
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let i = k + 1;
            if s.measure(i).unwrap() >= 1.0 {
                return true;
            }
            let r = BigRational::from_float(s.radius(i).unwrap()).unwrap();
            let mut d = (y - &p).abs();
            let one = BigRational::one();
            if d > BigRational::new(1.into(), 2.into()) {
                d = one - d;
            }
            d < r
        })
        .collect()
}

#[test]
fn bit_orbit_matches_rational_arithmetic() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(77);
    for map in [MapSystem::doubling(), MapSystem::tent()] {
        let tent = !map.is_doubling();
        for p in [GENERIC_CENTER, 0.3, 0.71] {
            let s = TargetSchedule::build(&map, Point::Circle(p), 1.0, 1.0, 40).unwrap();
            for _ in 0..25 {
                let bits: Vec<bool> = (0..100).map(|_| rng.random()).collect();
                let exact = exact_bit_orbit(WordBits::from_bits(&bits), &s, 20).unwrap();
                let orbit = rational_orbit(&bits, 20, tent);
                assert_eq!(exact, rational_hits(&s, &orbit));
            }
        }
    }
}

#[test]
fn bit_orbit_ties_use_the_tail() {
    // T²x lands exactly on the open left end of the 64-bit arc of B_2
    let map = MapSystem::doubling();
    let s = TargetSchedule::build(&map, Point::Circle(0.3), 1.0, 1.0, 4).unwrap();
    let lo = s.arc(2).unwrap().lo;
    let mut bits = vec![true, false];
    bits.extend((0..64).map(|k| (lo >> (63 - k)) & 1 == 1));
    let tie = exact_bit_orbit(WordBits::from_bits(&bits), &s, 2).unwrap();
    assert!(!tie[1]);
    let mut more = bits.clone();
    more.extend(std::iter::repeat_n(false, 300));
    more.push(true);
    let above = exact_bit_orbit(WordBits::from_bits(&more), &s, 2).unwrap();
    assert!(above[1]);
}

#[test]
fn bit_orbit_examples_and_errors() {
    let map = MapSystem::doubling();
    let s = TargetSchedule::build(&map, Point::Circle(0.3), 1.0, 1.0, 100).unwrap();
    let zeros = WordBits::from_bits(&[false; 200]);
    let hits = exact_bit_orbit(zeros, &s, 100).unwrap();
    assert!(hits[0]);
    for (k, &h) in hits.iter().enumerate().skip(1) {
        let r = s.radius(k + 1).unwrap();
        assert_eq!(h, r > 0.3, "i = {}", k + 1);
    }
    let any = RngBits(rand_chacha::ChaCha8Rng::seed_from_u64(1));
    assert!(exact_bit_orbit(any, &s, 1).unwrap()[0]);
    let short = WordBits::from_bits(&[true; 10]);
    assert!(matches!(exact_bit_orbit(short, &s, 50), Err(Error::InputExhausted { .. })));
    let g = MapSystem::gauss();
    let sg = TargetSchedule::build(&g, Point::Circle(0.3), 1.0, 1.0, 10).unwrap();
    let src = WordBits::from_bits(&[true; 100]);
    assert!(matches!(exact_bit_orbit(src, &sg, 5), Err(Error::UnsupportedMap { .. })));
}

#[test]
fn float_orbits_of_dyadic_maps_are_refused() {
    let d = MapSystem::doubling();
    assert!(d.iterate(Point::Circle(0.3), 40).is_ok());
    assert!(matches!(d.iterate(Point::Circle(0.3), 41), Err(Error::PrecisionLoss { .. })));
    assert!(MapSystem::gauss().iterate(Point::Circle(0.3), 1000).is_ok());
}
