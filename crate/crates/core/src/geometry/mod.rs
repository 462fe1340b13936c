//! Parameter domain, sample sets and the implicit Voronoi tessellation.
//!
//! Cells are never built explicitly. Every geometric quantity (cell volumes,
//! adjacency, coverage error, cell radii) comes from nearest-sample queries,
//! either on the samples themselves or on uniformly drawn emulation points.

mod emulation;
pub mod kdtree;

use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use emulation::{Adjacency, Emulation};
pub use kdtree::{KdTree, Neighbor};

/// Metric defining the Voronoi cells. The volume measure is always Lebesgue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Metric {
    #[default]
    Euclidean,
    OneNorm,
}

impl Metric {
    /// Monotone stand-in for the distance used for comparisons.
    #[inline]
    pub fn key<T: Real>(self, a: &[T], b: &[T]) -> T {
        match self {
            Metric::Euclidean => a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| {
                let d = x - y;
                s + d * d
            }),
            Metric::OneNorm => a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + (x - y).abs()),
        }
    }

    /// Lower bound on the key of any point separated by `gap` along one axis.
    #[inline]
    pub fn key_from_gap<T: Real>(self, gap: T) -> T {
        match self {
            Metric::Euclidean => gap * gap,
            Metric::OneNorm => gap,
        }
    }

    #[inline]
    pub fn key_to_distance<T: Real>(self, key: T) -> T {
        match self {
            Metric::Euclidean => key.sqrt(),
            Metric::OneNorm => key,
        }
    }

    pub fn distance<T: Real>(self, a: &[T], b: &[T]) -> T {
        self.key_to_distance(self.key(a, b))
    }
}

/// Compact axis-aligned parameter domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDomain<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    metric: Metric,
}

impl<T: Real> ParameterDomain<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, metric: Metric) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::arg("domain must have at least one dimension"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        for (k, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::arg(format!("degenerate domain bounds in dimension {k}")));
            }
        }
        let domain = Self { lower, upper, metric };
        let volume = domain.volume();
        if !(volume.is_finite() && volume > T::zero()) {
            return Err(Error::arg("domain volume must be positive and finite"));
        }
        Ok(domain)
    }

    /// `[0, 1]^n` under the Euclidean metric.
    pub fn unit(n: usize) -> Self {
        Self::new(vec![T::zero(); n], vec![T::one(); n], Metric::Euclidean)
            .expect("unit cube is valid")
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn width(&self, k: usize) -> T {
        self.upper[k] - self.lower[k]
    }

    pub fn volume(&self) -> T {
        (0..self.dim()).map(|k| self.width(k)).fold(T::one(), |v, w| v * w)
    }

    /// Largest distance between two points of the domain under its metric.
    pub fn diameter(&self) -> T {
        self.metric.distance(&self.lower, &self.upper)
    }

    pub fn contains(&self, point: &[T]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| lo <= x && x <= hi)
    }

    pub fn as_box(&self) -> BoxRegion<T> {
        BoxRegion { lower: self.lower.clone(), upper: self.upper.clone() }
    }

    pub(crate) fn check_point(&self, point: &[T]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: point.len() });
        }
        if !self.contains(point) {
            return Err(Error::OutsideDomain { point: point.iter().map(|x| x.as_f64()).collect() });
        }
        Ok(())
    }
}

/// Provenance of a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleTag {
    UniformIid,
    SerpentineGrid,
    LatinHypercube,
    DensityWeighted,
    /// Points supplied directly by the caller.
    Explicit,
}

impl RuleTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleTag::UniformIid => "uniform-iid",
            RuleTag::SerpentineGrid => "serpentine-grid",
            RuleTag::LatinHypercube => "latin-hypercube",
            RuleTag::DensityWeighted => "density-weighted",
            RuleTag::Explicit => "explicit",
        }
    }
}

/// N distinct points of the domain; each generates one Voronoi cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    points: Array2<T>,
    rule: RuleTag,
    seed: u64,
}

impl<T: Real> SampleSet<T> {
    pub fn new(domain: &ParameterDomain<T>, points: Array2<T>, rule: RuleTag, seed: u64) -> Result<Self> {
        if points.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: points.ncols() });
        }
        let points = points.as_standard_layout().into_owned();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.nrows());
        for (j, row) in points.outer_iter().enumerate() {
            let row = row.as_slice().expect("standard layout");
            domain.check_point(row)?;
            // +0.0 and -0.0 are the same point.
            let bits = row.iter().map(|&x| (x.as_f64() + 0.0).to_bits()).collect();
            if let Some(&first) = seen.get(&bits) {
                return Err(Error::DuplicateSample { first, second: j });
            }
            seen.insert(bits, j);
        }
        Ok(Self { points, rule, seed })
    }

    pub fn from_rows(domain: &ParameterDomain<T>, rows: &[Vec<T>]) -> Result<Self> {
        let n = domain.dim();
        let mut flat = Vec::with_capacity(rows.len() * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            flat.extend_from_slice(row);
        }
        let points = Array2::from_shape_vec((rows.len(), n), flat).expect("shape checked");
        Self::new(domain, points, RuleTag::Explicit, 0)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, j: usize) -> &[T] {
        let n = self.dim();
        &self.flat()[j * n..(j + 1) * n]
    }

    pub fn points(&self) -> &Array2<T> {
        &self.points
    }

    pub(crate) fn flat(&self) -> &[T] {
        self.points.as_slice().expect("standard layout")
    }

    pub fn rule(&self) -> RuleTag {
        self.rule
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.flat().chunks_exact(self.dim())
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> BoxRegion<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(&a, &b)| !(a <= b)) {
            return Err(Error::arg("box lower bound exceeds upper bound"));
        }
        Ok(Self { lower, upper })
    }

    #[inline]
    pub fn contains(&self, point: &[T]) -> bool {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&lo, &hi))| lo <= x && x <= hi)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Lebesgue measure of the intersection with `domain`.
    pub fn volume_within(&self, domain: &ParameterDomain<T>) -> T {
        (0..self.dim()).fold(T::one(), |v, k| {
            let lo = self.lower[k].max(domain.lower()[k]);
            let hi = self.upper[k].min(domain.upper()[k]);
            v * (hi - lo).max(T::zero())
        })
    }
}

/// Events on the parameter domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Event<T> {
    Box(BoxRegion<T>),
    Union(Vec<BoxRegion<T>>),
    /// Union of Voronoi cells, by zero-based sample index.
    CellUnion(BTreeSet<usize>),
}

impl<T: Real> Event<T> {
    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        BoxRegion::new(lower, upper).map(Event::Box)
    }

    pub fn cells(indices: impl IntoIterator<Item = usize>) -> Self {
        Event::CellUnion(indices.into_iter().collect())
    }

    pub fn whole(domain: &ParameterDomain<T>) -> Self {
        Event::Box(domain.as_box())
    }

    /// Point membership for geometric events; `None` for cell unions.
    pub fn contains(&self, point: &[T]) -> Option<bool> {
        match self {
            Event::Box(b) => Some(b.contains(point)),
            Event::Union(bs) => Some(bs.iter().any(|b| b.contains(point))),
            Event::CellUnion(_) => None,
        }
    }

    fn check_dims(&self, n: usize) -> Result<()> {
        let boxes: &[BoxRegion<T>] = match self {
            Event::Box(b) => std::slice::from_ref(b),
            Event::Union(bs) => bs,
            Event::CellUnion(_) => &[],
        };
        match boxes.iter().find(|b| b.dim() != n) {
            Some(b) => Err(Error::DimensionMismatch { expected: n, got: b.dim() }),
            None => Ok(()),
        }
    }
}

/// Monte Carlo volume with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate<T> {
    pub value: T,
    pub n_emulated: usize,
    pub std_error: T,
}

impl<T: Real> VolumeEstimate<T> {
    /// Volume of `hits` out of `n` uniform draws in a region of volume `total`.
    pub fn from_hits(hits: usize, n: usize, total: T) -> Self {
        let n_t = T::from_count(n);
        let frac = T::from_count(hits) / n_t;
        Self {
            value: total * frac,
            n_emulated: n,
            std_error: total * (frac * (T::one() - frac) / n_t).sqrt(),
        }
    }
}

/// Index of the sample whose cell contains `point`; ties go to the smallest index.
pub fn nearest_sample<T: Real>(domain: &ParameterDomain<T>, samples: &SampleSet<T>, point: &[T]) -> Result<usize> {
    domain.check_point(point)?;
    if samples.is_empty() {
        return Err(Error::arg("sample set is empty"));
    }
    Ok(kdtree::brute_nearest(samples.flat(), samples.dim(), domain.metric(), point).index)
}

/// Indices of the cells making up the Voronoi coverage of `event`.
///
/// For geometric events this is the set of samples lying in the event; cell
/// unions are returned as given after range checking.
pub fn voronoi_coverage<T: Real>(
    domain: &ParameterDomain<T>,
    samples: &SampleSet<T>,
    event: &Event<T>,
) -> Result<BTreeSet<usize>> {
    event.check_dims(domain.dim())?;
    match event {
        Event::CellUnion(cells) => {
            if let Some(&bad) = cells.iter().find(|&&j| j >= samples.len()) {
                return Err(Error::IndexOutOfRange { index: bad, len: samples.len() });
            }
            Ok(cells.clone())
        }
        _ => Ok(samples
            .iter()
            .enumerate()
            .filter(|(_, p)| event.contains(p) == Some(true))
            .map(|(j, _)| j)
            .collect()),
    }
}

/// Per-cell volume estimates from `n_emulated` uniform points.
pub fn estimate_cell_volumes<T: Real>(
    domain: &ParameterDomain<T>,
    samples: &SampleSet<T>,
    n_emulated: usize,
    seed: u64,
) -> Result<Vec<VolumeEstimate<T>>> {
    if n_emulated < samples.len() {
        return Err(Error::arg(format!(
            "n_emulated = {n_emulated} is smaller than the sample count {}",
            samples.len()
        )));
    }
    Ok(Emulation::new(domain, samples, n_emulated, seed, false)?.cell_volumes())
}

/// Cells that share boundary, detected through nearest/second-nearest pairs.
pub fn estimate_adjacency<T: Real>(
    domain: &ParameterDomain<T>,
    samples: &SampleSet<T>,
    n_emulated: usize,
    seed: u64,
) -> Result<Adjacency> {
    if samples.len() < 2 {
        return Err(Error::arg("adjacency needs at least two samples"));
    }
    if n_emulated < 10 * samples.len() {
        return Err(Error::arg(format!(
            "n_emulated = {n_emulated} is below 10 x {} samples",
            samples.len()
        )));
    }
    Emulation::new(domain, samples, n_emulated, seed, true)?.adjacency()
}

/// Largest observed distance from an emulation point to its generating sample.
pub fn max_cell_radius<T: Real>(
    domain: &ParameterDomain<T>,
    samples: &SampleSet<T>,
    n_emulated: usize,
    seed: u64,
) -> Result<T> {
    if n_emulated < samples.len() {
        return Err(Error::arg("n_emulated must be at least the sample count"));
    }
    Ok(Emulation::new(domain, samples, n_emulated, seed, false)?.max_radius())
}

/// Estimated volume of the symmetric difference between `event` and its
/// Voronoi coverage.
pub fn coverage_symmetric_difference<T: Real>(
    domain: &ParameterDomain<T>,
    samples: &SampleSet<T>,
    event: &Event<T>,
    n_emulated: usize,
    seed: u64,
) -> Result<VolumeEstimate<T>> {
    Emulation::new(domain, samples, n_emulated, seed, false)?.symmetric_difference(samples, event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_points() -> (ParameterDomain<f64>, SampleSet<f64>) {
        let d = ParameterDomain::unit(2);
        let s = SampleSet::new(&d, array![[0.0, 0.0], [1.0, 1.0]], RuleTag::Explicit, 0).unwrap();
        (d, s)
    }

    fn grid_2x2() -> (ParameterDomain<f64>, SampleSet<f64>) {
        let d = ParameterDomain::unit(2);
        let pts = array![[0.25, 0.25], [0.25, 0.75], [0.75, 0.75], [0.75, 0.25]];
        (d.clone(), SampleSet::new(&d, pts, RuleTag::SerpentineGrid, 0).unwrap())
    }

    fn line(xs: &[f64]) -> (ParameterDomain<f64>, SampleSet<f64>) {
        let d = ParameterDomain::unit(1);
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        (d.clone(), SampleSet::from_rows(&d, &rows).unwrap())
    }

    #[test]
    fn nearest_sample_examples() {
        let (d, s) = two_points();
        assert_eq!(nearest_sample(&d, &s, &[0.1, 0.2]).unwrap(), 0);
        assert_eq!(nearest_sample(&d, &s, &[0.5, 0.5]).unwrap(), 0);
        assert_eq!(nearest_sample(&d, &s, &[0.9, 0.8]).unwrap(), 1);
        assert!(matches!(nearest_sample(&d, &s, &[1.5, 0.5]), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn sample_set_rejects_duplicates_and_outside_points() {
        let d = ParameterDomain::unit(2);
        let dup = SampleSet::new(&d, array![[0.2, 0.2], [0.3, 0.1], [0.2, 0.2]], RuleTag::Explicit, 0);
        assert!(matches!(dup, Err(Error::DuplicateSample { first: 0, second: 2 })));
        let out = SampleSet::new(&d, array![[0.2, 1.2]], RuleTag::Explicit, 0);
        assert!(matches!(out, Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn domain_rejects_degenerate_bounds() {
        assert!(ParameterDomain::new(vec![0.0, 1.0], vec![1.0, 1.0], Metric::Euclidean).is_err());
        assert!(ParameterDomain::new(vec![0.0], vec![f64::INFINITY], Metric::Euclidean).is_err());
        let d = ParameterDomain::new(vec![-1.0, 0.0], vec![1.0, 3.0], Metric::OneNorm).unwrap();
        assert_eq!(d.volume(), 6.0);
        assert_eq!(d.diameter(), 5.0);
    }

    #[test]
    fn coverage_examples() {
        let (d, s) = grid_2x2();
        let all = voronoi_coverage(&d, &s, &Event::whole(&d)).unwrap();
        assert_eq!(all, (0..4).collect());
        let none = voronoi_coverage(&d, &s, &Event::boxed(vec![0.4, 0.4], vec![0.6, 0.6]).unwrap()).unwrap();
        assert!(none.is_empty());
        let left = voronoi_coverage(&d, &s, &Event::boxed(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap()).unwrap();
        assert_eq!(left, [0, 1].into_iter().collect());
        let cells = Event::cells([3, 1]);
        assert_eq!(voronoi_coverage(&d, &s, &cells).unwrap(), [1, 3].into_iter().collect());
        assert!(matches!(
            voronoi_coverage(&d, &s, &Event::cells([4])),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn cell_volumes_single_cell_is_exact() {
        let (d, s) = line(&[0.37]);
        let v = estimate_cell_volumes(&d, &s, 1000, 3).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].value, 1.0);
        assert_eq!(v[0].std_error, 0.0);
    }

    #[test]
    fn cell_volumes_match_midpoint_geometry() {
        // Exact 1-D cells: [0, 0.3], [0.3, 0.7], [0.7, 1].
        let (d, s) = line(&[0.1, 0.5, 0.9]);
        let v = estimate_cell_volumes(&d, &s, 200_000, 11).unwrap();
        for (est, exact) in v.iter().zip([0.3, 0.4, 0.3]) {
            assert!((est.value - exact).abs() <= 3.0 * est.std_error, "{est:?} vs {exact}");
        }
        let total: f64 = v.iter().map(|e| e.value).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cell_volumes_symmetric_pair() {
        let d = ParameterDomain::<f64>::unit(2);
        let s = SampleSet::new(&d, array![[0.25, 0.5], [0.75, 0.5]], RuleTag::Explicit, 0).unwrap();
        let v = estimate_cell_volumes(&d, &s, 400_000, 5).unwrap();
        for e in &v {
            assert!((e.value - 0.5).abs() <= 3.0 * e.std_error);
        }
        assert!(matches!(estimate_cell_volumes(&d, &s, 1, 5), Err(Error::Argument(_))));
    }

    #[test]
    fn adjacency_in_one_dimension() {
        let (d, s) = line(&[0.1, 0.5, 0.9]);
        let adj = estimate_adjacency(&d, &s, 10_000, 2).unwrap();
        assert!(adj.are_adjacent(0, 1));
        assert!(adj.are_adjacent(1, 2));
        assert!(!adj.are_adjacent(0, 2));
        let (d2, s2) = line(&[0.2, 0.6]);
        let adj2 = estimate_adjacency(&d2, &s2, 100, 2).unwrap();
        assert!(adj2.are_adjacent(0, 1) && adj2.are_adjacent(1, 0));
        let (d1, s1) = line(&[0.2]);
        assert!(estimate_adjacency(&d1, &s1, 100, 2).is_err());
        assert!(estimate_adjacency(&d, &s, 29, 2).is_err());
    }

    #[test]
    fn adjacency_of_grid_center_is_four_edge_neighbors() {
        let d = ParameterDomain::unit(2);
        let mut rows = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                rows.push(vec![(a as f64 + 0.5) / 3.0, (b as f64 + 0.5) / 3.0]);
            }
        }
        let s = SampleSet::from_rows(&d, &rows).unwrap();
        let adj = estimate_adjacency(&d, &s, 200_000, 9).unwrap();
        assert_eq!(adj.neighbors(4), &[1, 3, 5, 7]);
        for j in 0..9 {
            assert!(!adj.are_adjacent(j, j));
            for &k in adj.neighbors(j) {
                assert!(adj.are_adjacent(k, j));
            }
        }
    }

    #[test]
    fn max_radius_examples() {
        let d = ParameterDomain::unit(2);
        let s = SampleSet::new(&d, array![[0.5, 0.5]], RuleTag::Explicit, 0).unwrap();
        let r = max_cell_radius(&d, &s, 200_000, 1).unwrap();
        let target = std::f64::consts::FRAC_1_SQRT_2;
        assert!(r <= target && r > target - 0.01, "{r}");
        assert!(r <= d.diameter());

        let d1 = ParameterDomain::unit(2).with_metric(Metric::OneNorm);
        let mut rows = Vec::new();
        for a in 0..10 {
            for b in 0..10 {
                rows.push(vec![(a as f64 + 0.5) / 10.0, (b as f64 + 0.5) / 10.0]);
            }
        }
        let grid = SampleSet::from_rows(&d1, &rows).unwrap();
        let r = max_cell_radius(&d1, &grid, 500_000, 4).unwrap();
        assert!(r <= 0.1 + 1e-12 && r > 0.095, "{r}");
    }

    #[test]
    fn symmetric_difference_of_aligned_box_vanishes() {
        let (d, s) = grid_2x2();
        let ev = Event::boxed(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let sd = coverage_symmetric_difference(&d, &s, &ev, 50_000, 8).unwrap();
        assert_eq!(sd.value, 0.0);
        let off = Event::boxed(vec![0.0, 0.0], vec![0.4, 1.0]).unwrap();
        let sd = coverage_symmetric_difference(&d, &s, &off, 200_000, 8).unwrap();
        assert!((sd.value - 0.1).abs() < 3.0 * sd.std_error + 1e-12);
    }
}
