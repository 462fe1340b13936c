use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;
use sip_core::*;

mod common;
use common::slab_probability;

fn sum_model() -> qoi::LinearMap<f64> {
    linear_map(ndarray::array![[1.0, 1.0]]).unwrap()
}

fn band_density(bins: usize) -> SimpleFunctionDensity<f64> {
    let part = DataPartition::uniform(&[0.0], &[2.0], &[bins]).unwrap();
    SimpleFunctionDensity::uniform_on_box(part, &[0.25], &[0.75]).unwrap()
}

fn cell_box(j: usize, r: usize) -> ([f64; 2], [f64; 2]) {
    let (a, b) = ((j / r) as f64, (j % r) as f64);
    let h = 1.0 / r as f64;
    ([a * h, b * h], [(a + 1.0) * h, (b + 1.0) * h])
}

#[test]
fn grid_measure_matches_slab_oracle() {
    let d = ParameterDomain::unit(2);
    let rho = band_density(20);
    let g = solve_grid(&d, &[10, 10], &sum_model(), &rho, 4_000, 5).unwrap();
    assert!((g.total() - 1.0).abs() < 1e-12);
    let mut worst: f64 = 0.0;
    for j in 0..100 {
        let (lo, hi) = cell_box(j, 10);
        let exact = slab_probability(rho.partition().edges(0), rho.probabilities(), lo, hi);
        let z = if g.std_error[j] > 0.0 { (g.cell_prob[j] - exact).abs() / g.std_error[j] } else { 0.0 };
        if g.std_error[j] == 0.0 {
            assert!((g.cell_prob[j] - exact).abs() < 1e-12);
        }
        worst = worst.max(z);
    }
    assert!(worst <= 3.0, "largest deviation {worst} standard errors");
}

#[test]
fn grid_and_counting_agree_on_generating_boxes() {
    let d = ParameterDomain::unit(2);
    let rho = band_density(20);
    let g = solve_grid(&d, &[10, 10], &sum_model(), &rho, 4_000, 11).unwrap();
    let s = generate(&SamplingRule::uniform(12), &d, 100_000).unwrap();
    let q = evaluate_samples(&sum_model(), &s).unwrap();
    let m = solve_counting(&s, &q, &rho, None, None).unwrap();
    let p = rho.probabilities();
    for j in 0..100 {
        let (lo, hi) = cell_box(j, 10);
        let cover = voronoi_coverage(&d, &s, &Event::boxed(lo.to_vec(), hi.to_vec()).unwrap()).unwrap();
        let counted: f64 = cover.iter().map(|&k| m.cell_prob()[k]).sum();
        let mut var = 0.0;
        for i in 0..p.len() {
            let c = m.counts()[i];
            if c > 0 && p[i] > 0.0 {
                let inside = cover.iter().filter(|&&k| m.pointer()[k] == Some(i)).count();
                let f = inside as f64 / c as f64;
                var += p[i] * p[i] * f * (1.0 - f) / c as f64;
            }
        }
        let slack = 3.0 * (var + g.std_error[j].powi(2)).sqrt();
        assert!((counted - g.cell_prob[j]).abs() <= slack.max(1e-12), "box {j}: {counted} vs {}", g.cell_prob[j]);
    }
}

#[test]
fn counting_error_shrinks_with_sample_size() {
    let rho = band_density(40);
    let (lo, hi) = ([0.1, 0.3], [0.6, 0.55]);
    let exact = slab_probability(rho.partition().edges(0), rho.probabilities(), lo, hi);
    let d = ParameterDomain::unit(2);
    let event = Event::boxed(lo.to_vec(), hi.to_vec()).unwrap();
    let errs: Vec<f64> = [1_000, 100_000]
        .iter()
        .map(|&n| {
            let s = generate(&SamplingRule::latin_hypercube(40), &d, n).unwrap();
            let q = evaluate_samples(&sum_model(), &s).unwrap();
            let m = solve_counting(&s, &q, &rho, None, None).unwrap();
            (event_probability(&m, &d, &event).unwrap() - exact).abs()
        })
        .collect();
    assert!(errs[1] < 0.01 && errs[1] < errs[0], "{errs:?}");
}

#[test]
fn marginal_of_uniform_grid_is_flat() {
    let d = ParameterDomain::<f64>::unit(3);
    let s = generate(&SamplingRule::serpentine(vec![20, 20, 2]), &d, 800).unwrap();
    let q = Array2::from_elem((800, 1), 0.5);
    let rho = SimpleFunctionDensity::new(DataPartition::uniform(&[0.0], &[1.0], &[1]).unwrap(), vec![1.0]).unwrap();
    let m = solve_counting(&s, &q, &rho, None, None).unwrap();
    let t = marginalize(&m, &d, (0, 1), (10, 10)).unwrap();
    assert!(t.prob.iter().all(|&p| (p - 0.01).abs() < 1e-12));
    assert!((t.total() - 1.0).abs() < 1e-12);
}

#[test]
fn marginal_of_point_mass() {
    let d = ParameterDomain::<f64>::unit(2);
    let s = SampleSet::from_rows(&d, &[vec![0.15, 0.85], vec![0.5, 0.5]]).unwrap();
    let q = ndarray::array![[0.2], [0.8]];
    let rho = SimpleFunctionDensity::new(DataPartition::uniform(&[0.0], &[1.0], &[2]).unwrap(), vec![1.0, 0.0]).unwrap();
    let m = solve_counting(&s, &q, &rho, None, None).unwrap();
    let t = marginalize(&m, &d, (0, 1), (10, 10)).unwrap();
    assert_eq!(t.prob[[1, 8]], 1.0);
    assert_eq!(t.prob.iter().filter(|&&p| p != 0.0).count(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn push_forward_is_exact(seed in 0u64..10_000, bins in 2usize..30, n in 50usize..600) {
        let d = ParameterDomain::unit(2);
        let s = generate(&SamplingRule::uniform(seed), &d, n).unwrap();
        let q = evaluate_samples(&sum_model(), &s).unwrap();
        let part = DataPartition::uniform(&[0.0], &[2.0], &[bins]).unwrap();
        let p: Vec<f64> = (0..bins).map(|i| ((i * 7 + seed as usize) % 5) as f64 + 0.5).collect();
        let rho = SimpleFunctionDensity::new(part, p).unwrap();
        let m = solve_counting(&s, &q, &rho, None, None).unwrap();
        for (i, got) in m.push_forward().iter().enumerate() {
            if m.counts()[i] > 0 {
                prop_assert!((got - rho.probabilities()[i]).abs() <= 1e-12);
            }
        }
        prop_assert!((m.total() + m.lost_mass() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn contour_events_ignore_the_ansatz(seed in 0u64..10_000, pick in proptest::collection::vec(any::<bool>(), 10)) {
        let d = ParameterDomain::unit(2);
        let s = generate(&SamplingRule::uniform(seed), &d, 400).unwrap();
        let q = evaluate_samples(&sum_model(), &s).unwrap();
        let part = DataPartition::uniform(&[0.0], &[2.0], &[10]).unwrap();
        let rho = SimpleFunctionDensity::new(part, (1..=10).map(f64::from).collect()).unwrap();
        let plain = solve_counting(&s, &q, &rho, None, None).unwrap();
        let w: Vec<f64> = (0..400).map(|j| 0.1 + ((j as u64 * 2654435761 + seed) % 1000) as f64 / 100.0).collect();
        let ansatz = AnsatzWeights::new(w).unwrap();
        let weighted = solve_counting(&s, &q, &rho, None, Some(&ansatz)).unwrap();
        let cells: BTreeSet<usize> =
            (0..400).filter(|&j| plain.pointer()[j].is_some_and(|i| pick[i])).collect();
        let e = Event::CellUnion(cells);
        let a = event_probability(&plain, &d, &e).unwrap();
        let b = event_probability(&weighted, &d, &e).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}
