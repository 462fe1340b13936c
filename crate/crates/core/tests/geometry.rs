use ndarray::Array2;
use proptest::prelude::*;
use sip_core::*;

mod common;
use common::area_below;

fn cloud(n: usize, seed: u64) -> (ParameterDomain<f64>, SampleSet<f64>) {
    let d = ParameterDomain::unit(2);
    let s = generate(&SamplingRule::uniform(seed), &d, n).unwrap();
    (d, s)
}

#[test]
fn coverage_examples() {
    let d = ParameterDomain::<f64>::unit(2);
    let s = generate(&SamplingRule::serpentine(vec![2, 2]), &d, 4).unwrap();
    let all = voronoi_coverage(&d, &s, &Event::whole(&d)).unwrap();
    assert_eq!(all.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    let left = Event::boxed(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
    assert_eq!(voronoi_coverage(&d, &s, &left).unwrap().into_iter().collect::<Vec<_>>(), vec![0, 1]);
    let none = Event::boxed(vec![0.0, 0.0], vec![0.1, 0.1]).unwrap();
    assert!(voronoi_coverage(&d, &s, &none).unwrap().is_empty());
}

#[test]
fn single_cell_fills_the_domain() {
    let d = ParameterDomain::new(vec![0.0, -1.0], vec![2.0, 3.0], Metric::Euclidean).unwrap();
    let s = SampleSet::from_rows(&d, &[vec![1.0, 0.0]]).unwrap();
    let v = estimate_cell_volumes(&d, &s, 1_000, 4).unwrap();
    assert_eq!(v[0].value, 8.0);
    assert_eq!(v[0].std_error, 0.0);
}

#[test]
fn cell_volumes_sum_to_domain_volume() {
    let (d, s) = cloud(200, 3);
    let v = estimate_cell_volumes(&d, &s, 50_000, 9).unwrap();
    let total: f64 = v.iter().map(|e| e.value).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(estimate_cell_volumes(&d, &s, 100, 9).is_err());
}

#[test]
fn max_radius_bounded_by_diameter_and_refines() {
    let d = ParameterDomain::<f64>::unit(2);
    let mut prev: Option<f64> = None;
    for r in [5, 10, 20, 40] {
        let s = generate(&SamplingRule::serpentine(vec![r, r]), &d, r * r).unwrap();
        let rad = max_cell_radius(&d, &s, 200_000, 12).unwrap();
        assert!(rad <= d.diameter());
        let exact = std::f64::consts::SQRT_2 / (2.0 * r as f64);
        assert!(rad <= exact + 1e-12 && rad > 0.8 * exact);
        if let Some(p) = prev {
            assert!(rad <= p);
        }
        prev = Some(rad);
    }
}

#[test]
fn evaluation_is_independent_of_thread_count() {
    let (d, s) = cloud(500, 8);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_adjacency(&d, &s, 50_000, 2).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    let vols = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_cell_volumes(&d, &s, 50_000, 2).unwrap())
    };
    assert_eq!(vols(1), vols(3));
}

#[test]
fn slab_oracle_matches_dense_grid() {
    let n = 2000;
    let h = 1.0 / n as f64;
    let mut count = 0usize;
    let box_lo = [0.1, 0.2];
    let box_hi = [0.7, 0.9];
    let mut boxed = 0usize;
    for a in 0..n {
        for b in 0..n {
            let (x, y) = ((a as f64 + 0.5) * h, (b as f64 + 0.5) * h);
            if x + y < 0.5 {
                count += 1;
            }
            if x + y < 1.1 && (box_lo[0]..=box_hi[0]).contains(&x) && (box_lo[1]..=box_hi[1]).contains(&y) {
                boxed += 1;
            }
        }
    }
    let area = count as f64 * h * h;
    assert!((area - 0.125).abs() < 1e-3);
    assert!((area_below(0.5, [0.0, 0.0], [1.0, 1.0]) - 0.125).abs() < 1e-15);
    assert!((boxed as f64 * h * h - area_below(1.1, box_lo, box_hi)).abs() < 2e-3);
}

#[test]
fn one_norm_grid_radius() {
    let d = ParameterDomain::<f64>::unit(2).with_metric(Metric::OneNorm);
    let s = generate(&SamplingRule::serpentine(vec![10, 10]), &d, 100).unwrap();
    let r = max_cell_radius(&d, &s, 400_000, 6).unwrap();
    assert!(r <= 0.1 + 1e-12 && r > 0.095);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coverage_is_monotone(seed in 0u64..1000, a in 0.0f64..0.5, b in 0.0f64..0.5, w in 0.05f64..0.5, grow in 0.0f64..0.3) {
        let (d, s) = cloud(150, seed);
        let inner = Event::boxed(vec![a, b], vec![a + w, b + w]).unwrap();
        let outer = Event::boxed(vec![a - grow, b], vec![a + w + grow, b + w + grow]).unwrap();
        let ci = voronoi_coverage(&d, &s, &inner).unwrap();
        let co = voronoi_coverage(&d, &s, &outer).unwrap();
        prop_assert!(ci.is_subset(&co));
    }

    #[test]
    fn nearest_sample_matches_linear_scan(seed in 0u64..1000, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let (d, s) = cloud(40, seed);
        let j = nearest_sample(&d, &s, &[x, y]).unwrap();
        let dist = |k: usize| Metric::Euclidean.distance(s.point(k), &[x, y]);
        for k in 0..s.len() {
            prop_assert!(dist(j) < dist(k) || (dist(j) == dist(k) && j <= k));
        }
    }

    #[test]
    fn duplicate_rows_are_rejected(x in 0.0f64..1.0) {
        let d = ParameterDomain::unit(1);
        let pts = Array2::from_shape_vec((2, 1), vec![x, x]).unwrap();
        prop_assert!(SampleSet::new(&d, pts, RuleTag::Explicit, 0).is_err());
    }
}
