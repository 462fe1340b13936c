use std::collections::BTreeSet;

use rayon::prelude::*;

use super::kdtree::{brute_nearest, brute_two_nearest, KdTree};
use super::{Event, Metric, ParameterDomain, SampleSet, VolumeEstimate};
use crate::error::{Error, Result};
use crate::rng::{seeded, uniform_in};
use crate::scalar::Real;

/// Above this dimension the tree prunes too little to pay for itself.
const TREE_MAX_DIM: usize = 8;

/// Nearest-sample search over a fixed sample set.
pub(crate) enum Search<'a, T> {
    Brute { points: &'a [T], dim: usize, metric: Metric },
    Tree(KdTree<T>),
}

impl<'a, T: Real> Search<'a, T> {
    pub(crate) fn new(samples: &'a SampleSet<T>, metric: Metric) -> Self {
        if samples.dim() <= TREE_MAX_DIM && samples.len() > 64 {
            Search::Tree(KdTree::new(samples.flat(), samples.dim(), metric))
        } else {
            Search::Brute { points: samples.flat(), dim: samples.dim(), metric }
        }
    }

    pub(crate) fn nearest(&self, q: &[T]) -> (usize, T) {
        let nb = match self {
            Search::Brute { points, dim, metric } => brute_nearest(points, *dim, *metric, q),
            Search::Tree(t) => t.nearest(q),
        };
        (nb.index, nb.key)
    }

    pub(crate) fn two_nearest(&self, q: &[T]) -> (usize, usize, T) {
        let (a, b) = match self {
            Search::Brute { points, dim, metric } => brute_two_nearest(points, *dim, *metric, q),
            Search::Tree(t) => t.two_nearest(q),
        };
        (a.index, b.index, a.key)
    }
}

/// Uniform emulation points with their nearest (and optionally second-nearest)
/// samples.
///
/// One `Emulation` backs every volume in a computation so that inclusions
/// between cell unions carry over exactly to their estimated volumes.
#[derive(Debug, Clone)]
pub struct Emulation<T> {
    domain: ParameterDomain<T>,
    n_cells: usize,
    points: Vec<T>,
    nearest: Vec<usize>,
    nearest_key: Vec<T>,
    second: Option<Vec<usize>>,
}

impl<T: Real> Emulation<T> {
    pub fn new(
        domain: &ParameterDomain<T>,
        samples: &SampleSet<T>,
        n_emulated: usize,
        seed: u64,
        with_second: bool,
    ) -> Result<Self> {
        if samples.dim() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: samples.dim() });
        }
        if samples.is_empty() || n_emulated == 0 {
            return Err(Error::arg("emulation needs samples and at least one emulation point"));
        }
        if with_second && samples.len() < 2 {
            return Err(Error::arg("second-nearest search needs at least two samples"));
        }
        let n = domain.dim();
        let mut rng = seeded(seed);
        let mut points = Vec::with_capacity(n_emulated * n);
        for _ in 0..n_emulated {
            for k in 0..n {
                points.push(uniform_in(&mut rng, domain.lower()[k], domain.upper()[k]));
            }
        }
        let search = Search::new(samples, domain.metric());
        let (nearest, nearest_key, second) = if with_second {
            let found: Vec<(usize, usize, T)> =
                points.par_chunks_exact(n).map(|q| search.two_nearest(q)).collect();
            let nearest = found.iter().map(|f| f.0).collect();
            let second = found.iter().map(|f| f.1).collect();
            let keys = found.iter().map(|f| f.2).collect();
            (nearest, keys, Some(second))
        } else {
            let found: Vec<(usize, T)> = points.par_chunks_exact(n).map(|q| search.nearest(q)).collect();
            (found.iter().map(|f| f.0).collect(), found.iter().map(|f| f.1).collect(), None)
        };
        Ok(Self { domain: domain.clone(), n_cells: samples.len(), points, nearest, nearest_key, second })
    }

    pub fn n_emulated(&self) -> usize {
        self.nearest.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Generating sample of each emulation point.
    pub fn nearest(&self) -> &[usize] {
        &self.nearest
    }

    pub fn point(&self, i: usize) -> &[T] {
        let n = self.domain.dim();
        &self.points[i * n..(i + 1) * n]
    }

    pub fn hits_per_cell(&self) -> Vec<usize> {
        let mut hits = vec![0usize; self.n_cells];
        for &j in &self.nearest {
            hits[j] += 1;
        }
        hits
    }

    pub fn cell_volumes(&self) -> Vec<VolumeEstimate<T>> {
        let vol = self.domain.volume();
        let n = self.n_emulated();
        self.hits_per_cell().into_iter().map(|h| VolumeEstimate::from_hits(h, n, vol)).collect()
    }

    /// Volume of a union of cells.
    pub fn region_volume(&self, cells: &BTreeSet<usize>) -> VolumeEstimate<T> {
        let hits = self.nearest.iter().filter(|j| cells.contains(j)).count();
        VolumeEstimate::from_hits(hits, self.n_emulated(), self.domain.volume())
    }

    pub fn adjacency(&self) -> Result<Adjacency> {
        let second = self
            .second
            .as_ref()
            .ok_or_else(|| Error::arg("emulation was built without second-nearest samples"))?;
        let pairs = self.nearest.iter().zip(second).map(|(&a, &b)| (a, b));
        Ok(Adjacency::from_pairs(self.n_cells, pairs))
    }

    pub fn max_radius(&self) -> T {
        let key = self.nearest_key.iter().fold(T::zero(), |m, &k| m.max(k));
        self.domain.metric().key_to_distance(key)
    }

    /// Volume of `event` △ (its Voronoi coverage). Zero for cell unions.
    pub fn symmetric_difference(&self, samples: &SampleSet<T>, event: &Event<T>) -> Result<VolumeEstimate<T>> {
        if samples.len() != self.n_cells {
            return Err(Error::DimensionMismatch { expected: self.n_cells, got: samples.len() });
        }
        let n = self.n_emulated();
        if matches!(event, Event::CellUnion(_)) {
            return Ok(VolumeEstimate::from_hits(0, n, self.domain.volume()));
        }
        let covered: Vec<bool> = samples.iter().map(|p| event.contains(p) == Some(true)).collect();
        let hits = (0..n)
            .into_par_iter()
            .filter(|&i| event.contains(self.point(i)) != Some(covered[self.nearest[i]]))
            .count();
        Ok(VolumeEstimate::from_hits(hits, n, self.domain.volume()))
    }
}

/// Symmetric, irreflexive neighbor relation between cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn from_pairs(n_cells: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut neighbors = vec![Vec::new(); n_cells];
        for (a, b) in pairs {
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { neighbors }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }
}
