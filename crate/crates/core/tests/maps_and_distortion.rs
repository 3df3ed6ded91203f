use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solenoid_core::circle::{extract_solenoid, CircleMap, TrigTerm, DEFAULT_INTERVAL_CAP};
use solenoid_core::classify::{classify_cross, classify_ratio, ClassifyConfig, Smoothness};
use solenoid_core::distortion::{
    build_grid, classical_cross_ratio, cross_ratio_lengths, crd, sweep, GridSource, GridSpec, Homeomorphism,
};

#[test]
fn cross_ratio_identity_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let x0: f64 = rng.random_range(-1.0..1.0);
        let (l, l1, l2): (f64, f64, f64) = (rng.random_range(0.01..1.0), rng.random_range(0.01..1.0), rng.random_range(0.01..1.0));
        let a = cross_ratio_lengths(l, l1, l2);
        let b = classical_cross_ratio(x0, x0 + l, x0 + l + l1, x0 + l + l1 + l2);
        assert!((a - b).abs() <= 1e-13, "{a} {b}");
    }
}

fn random_grid(seed: u64, depth: usize) -> GridSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = vec![vec![0.0, 1.0]];
    for _ in 0..depth {
        let prev = levels.last().unwrap().clone();
        let mut next = vec![prev[0]];
        for w in prev.windows(2) {
            next.push(w[0] + (w[1] - w[0]) * rng.random_range(0.35..0.65));
            next.push(w[1]);
        }
        levels.push(next);
    }
    GridSpec::new(levels).unwrap()
}

#[test]
fn moebius_invariance_on_random_grids() {
    let h = Homeomorphism::moebius(1.0, 0.0, -1.0, 2.0, (0.0, 1.0)).unwrap();
    for seed in 0..5 {
        let g = random_grid(seed, 10);
        let ds = sweep(&h, &g, 2..=10).unwrap();
        assert!(ds.records.iter().all(|r| r.crd.is_nan() || r.crd.abs() <= 1e-12));
    }
}

#[test]
fn lrd_telescopes() {
    let h = Homeomorphism::power(0.7, (0.0, 1.0)).unwrap();
    let g = random_grid(3, 9);
    let ds = sweep(&h, &g, 9..=9).unwrap();
    let total: f64 = ds.records.iter().filter(|r| !r.lrd.is_nan()).map(|r| r.lrd).sum();
    let first = ds.records.first().unwrap();
    let last = ds.records.last().unwrap();
    let pts = g.level(9).unwrap();
    let n = pts.len();
    let ldh = |x0: f64, x1: f64| (h.increment(x0, x1).unwrap() / (x1 - x0)).ln();
    let oracle = ldh(pts[n - 2], pts[n - 1]) - ldh(pts[0], pts[1]);
    assert!((total - oracle).abs() <= 1e-11, "{total} {oracle} {} {}", first.len, last.len);
}

fn assert_same_functionals(a: &solenoid_core::distortion::DistortionDataset, b: &solenoid_core::distortion::DistortionDataset) {
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        for (u, v) in [(x.lrd, y.lrd), (x.crd, y.crd)] {
            assert!((u.is_nan() && v.is_nan()) || (u - v).abs() <= 1e-12, "{u} {v}");
        }
    }
}

fn same_rung(a: Smoothness, b: Smoothness) {
    assert_eq!(a.name(), b.name());
    match (a.alpha(), b.alpha()) {
        (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-9),
        (None, None) => {}
        _ => panic!("{a:?} {b:?}"),
    }
}

#[test]
fn verdicts_survive_affine_reparametrization() {
    let c = ClassifyConfig::default();
    let g = build_grid(GridSource::Dyadic { a: 0.0, b: 1.0, depth: 12 }).unwrap();

    // x/(2-x) written in y = 3x + 2 is (y + 10)/(8 - y) on [2, 5].
    let m = Homeomorphism::moebius(1.0, 0.0, -1.0, 2.0, (0.0, 1.0)).unwrap();
    let m2 = Homeomorphism::moebius(1.0, 10.0, -1.0, 8.0, (2.0, 5.0)).unwrap();
    let g2 = g.affine_image(3.0, 2.0).unwrap();
    let (a, b) = (sweep(&m, &g, 4..=12).unwrap(), sweep(&m2, &g2, 4..=12).unwrap());
    assert_same_functionals(&a, &b);
    assert_eq!(classify_ratio(&a, &c).unwrap().verdict, classify_ratio(&b, &c).unwrap().verdict);
    assert_eq!(classify_cross(&a, &c).unwrap().verdict, classify_cross(&b, &c).unwrap().verdict);

    // x + c x^p written in y = 4x is y + c 4^{1-p} y^p on [0, 4].
    for p in [1.5, 2.0] {
        let h = Homeomorphism::perturbation(vec![(0.1, p)], (0.0, 1.0)).unwrap();
        let h2 = Homeomorphism::perturbation(vec![(0.1 * 4f64.powf(1.0 - p), p)], (0.0, 4.0)).unwrap();
        let g4 = g.affine_image(4.0, 0.0).unwrap();
        let (a, b) = (sweep(&h, &g, 4..=12).unwrap(), sweep(&h2, &g4, 4..=12).unwrap());
        assert_same_functionals(&a, &b);
        same_rung(classify_ratio(&a, &c).unwrap().verdict, classify_ratio(&b, &c).unwrap().verdict);
        same_rung(classify_cross(&a, &c).unwrap().verdict, classify_cross(&b, &c).unwrap().verdict);
    }
}

#[test]
fn post_composition_leaves_crd_alone() {
    let c = ClassifyConfig::default();
    let g = build_grid(GridSource::Dyadic { a: 0.0, b: 1.0, depth: 12 }).unwrap();
    let h = Homeomorphism::perturbation(vec![(0.1, 2.0)], (0.0, 1.0)).unwrap();
    let post = Homeomorphism::affine(5.0, -1.0, (0.0, 2.0)).unwrap();
    let knots = g.level(12).unwrap().to_vec();
    let values: Vec<f64> = knots.iter().map(|&x| post.eval(h.eval(x).unwrap()).unwrap()).collect();
    let composed = Homeomorphism::sampled(knots, values).unwrap();
    let (a, b) = (sweep(&composed, &g, 4..=10).unwrap(), sweep(&h, &g, 4..=10).unwrap());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert!((x.crd.is_nan() && y.crd.is_nan()) || (x.crd - y.crd).abs() <= 1e-12);
    }
    assert_eq!(classify_cross(&a, &c).unwrap().verdict, classify_cross(&b, &c).unwrap().verdict);
}

#[test]
fn ladder_is_monotone_under_strengthening() {
    let c = ClassifyConfig::default();
    let g = build_grid(GridSource::Dyadic { a: 0.0, b: 1.0, depth: 12 }).unwrap();
    let maps = [
        Homeomorphism::power(0.7, (0.0, 1.0)).unwrap(),
        Homeomorphism::perturbation(vec![(0.1, 1.5)], (0.0, 1.0)).unwrap(),
        Homeomorphism::perturbation(vec![(0.1, 2.0)], (0.0, 1.0)).unwrap(),
    ];
    for h in &maps {
        let ds = sweep(h, &g, 4..=12).unwrap();
        let base = classify_ratio(&ds, &c).unwrap().verdict.rank();
        for delta in [0.25, 0.5, 1.0] {
            assert!(classify_ratio(&ds.strengthened(delta), &c).unwrap().verdict.rank() >= base);
        }
    }
}

#[test]
fn crd_of_x_squared_on_thirds() {
    let h = Homeomorphism::power(2.0, (1.0, 2.0)).unwrap();
    let v = crd(&h, (1.0, 4.0 / 3.0), (4.0 / 3.0, 5.0 / 3.0), (5.0 / 3.0, 2.0)).unwrap();
    assert!((v - ((320f64 / 77.0).ln() - 4f64.ln())).abs() < 1e-14);
    assert!((v - 0.038221).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn trig_partitions_refine(eps in -0.1f64..0.1, phase in 0.0f64..6.0, harmonic in 1u32..3) {
        let m = CircleMap::trig(2, vec![TrigTerm { harmonic, amplitude: eps / f64::from(harmonic), phase }]).unwrap();
        let p = m.partition(8, DEFAULT_INTERVAL_CAP).unwrap();
        prop_assert!(p.is_nested());
        let g = build_grid(GridSource::FromPartition(&p)).unwrap();
        prop_assert_eq!(g.max_children(), 2);
    }

    #[test]
    fn extraction_ratios_positive(eps in -0.1f64..0.1) {
        let ex = extract_solenoid(&CircleMap::sine(3, eps).unwrap(), 5, 200).unwrap();
        prop_assert!(ex.table.values().iter().all(|&v| v > 0.0 && v.is_finite()));
    }
}
