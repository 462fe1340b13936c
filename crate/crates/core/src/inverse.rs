//! Counting-measure and grid approximations of the inverse measure.

use std::collections::BTreeSet;

use ndarray::Array2;
use rayon::prelude::*;

use crate::density::{DataPartition, SimpleFunctionDensity};
use crate::error::{Error, Result};
use crate::geometry::{voronoi_coverage, Event, ParameterDomain, SampleSet};
use crate::qoi::QoiModel;
use crate::rng::{substream, uniform_in};
use crate::scalar::Real;

/// Strictly positive relative weights of samples within each contour region.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzWeights<T> {
    w: Vec<T>,
}

impl<T: Real> AnsatzWeights<T> {
    pub fn new(w: Vec<T>) -> Result<Self> {
        if w.iter().any(|x| !(x.is_finite() && *x > T::zero())) {
            return Err(Error::arg("ansatz weights must be finite and positive"));
        }
        Ok(Self { w })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.w
    }
}

/// Bin index of every row of `values`, `None` outside the partition box.
pub fn assign_bins<T: Real>(values: &Array2<T>, partition: &DataPartition<T>) -> Result<Vec<Option<usize>>> {
    if values.ncols() != partition.dim() {
        return Err(Error::DimensionMismatch { expected: partition.dim(), got: values.ncols() });
    }
    Ok((0..values.nrows())
        .into_par_iter()
        .map(|j| {
            let q: Vec<T> = values.row(j).to_vec();
            partition.locate(&q)
        })
        .collect())
}

/// Probability `P(V_j)` of every Voronoi cell of a sample set.
#[derive(Debug, Clone)]
pub struct CountingMeasure<'s, T> {
    samples: &'s SampleSet<T>,
    bin_prob: Vec<T>,
    cell_prob: Vec<T>,
    pointer: Vec<Option<usize>>,
    counts: Vec<usize>,
    lost_mass: T,
    empty_bins: Vec<usize>,
}

impl<'s, T: Real> CountingMeasure<'s, T> {
    pub fn samples(&self) -> &'s SampleSet<T> {
        self.samples
    }

    pub fn cell_prob(&self) -> &[T] {
        &self.cell_prob
    }

    /// Zero-based bin of each sample.
    pub fn pointer(&self) -> &[Option<usize>] {
        &self.pointer
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn bin_prob(&self) -> &[T] {
        &self.bin_prob
    }

    /// Output mass of supported bins that received no sample.
    pub fn lost_mass(&self) -> T {
        self.lost_mass
    }

    /// Supported bins without samples.
    pub fn empty_bins(&self) -> &[usize] {
        &self.empty_bins
    }

    pub fn total(&self) -> T {
        self.cell_prob.iter().copied().fold(T::zero(), |a, b| a + b)
    }

    /// Total mass of cells assigned to each bin.
    pub fn push_forward(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.counts.len()];
        for (p, bin) in self.cell_prob.iter().zip(&self.pointer) {
            if let Some(i) = bin {
                out[*i] = out[*i] + *p;
            }
        }
        out
    }

    /// Copy with cell probabilities scaled to sum to one.
    pub fn renormalized(&self) -> Self {
        let mut out = self.clone();
        let total = self.total();
        if total > T::zero() {
            for p in &mut out.cell_prob {
                *p = *p / total;
            }
            out.lost_mass = T::zero();
        }
        out
    }
}

/// Counting measure from QoI values at the samples.
///
/// Without weights each cell gets `p_i / c_i`. With weights `w` (cell volume
/// fractions, an ansatz, or both multiplied together) each cell gets
/// `p_i w_j / Σ_{k in bin i} w_k`.
pub fn solve_counting<'s, T: Real>(
    samples: &'s SampleSet<T>,
    qoi_values: &Array2<T>,
    density: &SimpleFunctionDensity<T>,
    weights: Option<&[T]>,
    ansatz: Option<&AnsatzWeights<T>>,
) -> Result<CountingMeasure<'s, T>> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::arg("sample set is empty"));
    }
    if qoi_values.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: qoi_values.nrows() });
    }
    for len in [weights.map(|w| w.len()), ansatz.map(|a| a.as_slice().len())].into_iter().flatten() {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let partition = density.partition();
    let pointer = assign_bins(qoi_values, partition)?;
    let m = partition.n_cells();
    let mut counts = vec![0usize; m];
    for i in pointer.iter().flatten() {
        counts[*i] += 1;
    }
    let p = density.probabilities();

    let combined: Option<Vec<T>> = match (weights, ansatz) {
        (None, None) => None,
        (Some(w), None) => Some(w.to_vec()),
        (None, Some(a)) => Some(a.as_slice().to_vec()),
        (Some(w), Some(a)) => Some(w.iter().zip(a.as_slice()).map(|(&x, &y)| x * y).collect()),
    };
    let cell_prob: Vec<T> = match &combined {
        None => pointer
            .iter()
            .map(|bin| bin.map_or(T::zero(), |i| p[i] / T::from_count(counts[i])))
            .collect(),
        Some(w) => {
            if w.iter().any(|x| !(x.is_finite() && *x >= T::zero())) {
                return Err(Error::arg("cell weights must be finite and nonnegative"));
            }
            let mut sums = vec![T::zero(); m];
            for (bin, &wj) in pointer.iter().zip(w) {
                if let Some(i) = bin {
                    sums[*i] = sums[*i] + wj;
                }
            }
            if let Some(i) = (0..m).find(|&i| counts[i] > 0 && p[i] > T::zero() && !(sums[i] > T::zero())) {
                return Err(Error::arg(format!("cell weights of bin {} sum to zero", i + 1)));
            }
            pointer
                .iter()
                .zip(w)
                .map(|(bin, &wj)| bin.map_or(T::zero(), |i| if p[i] > T::zero() { p[i] * wj / sums[i] } else { T::zero() }))
                .collect()
        }
    };
    let empty_bins: Vec<usize> = (0..m).filter(|&i| counts[i] == 0 && p[i] > T::zero()).collect();
    let lost_mass = empty_bins.iter().map(|&i| p[i]).fold(T::zero(), |a, b| a + b);
    Ok(CountingMeasure {
        samples,
        bin_prob: p.to_vec(),
        cell_prob,
        pointer,
        counts,
        lost_mass,
        empty_bins,
    })
}

/// `P(A)` as the mass of the Voronoi coverage of `event`.
pub fn event_probability<T: Real>(
    measure: &CountingMeasure<'_, T>,
    domain: &ParameterDomain<T>,
    event: &Event<T>,
) -> Result<T> {
    let cover = voronoi_coverage(domain, measure.samples, event)?;
    Ok(cover_probability(measure, &cover))
}

pub(crate) fn cover_probability<T: Real>(measure: &CountingMeasure<'_, T>, cover: &BTreeSet<usize>) -> T {
    cover.iter().map(|&j| measure.cell_prob[j]).fold(T::zero(), |a, b| a + b)
}

/// Two-dimensional marginal of a counting measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable<T> {
    /// Zero-based parameter dimensions (rows, columns).
    pub dims: (usize, usize),
    pub row_edges: Vec<T>,
    pub col_edges: Vec<T>,
    pub prob: Array2<T>,
}

impl<T: Real> MarginalTable<T> {
    pub fn total(&self) -> T {
        self.prob.iter().copied().fold(T::zero(), |a, b| a + b)
    }

    /// Population variance of the table entries.
    pub fn variance(&self) -> T {
        let n = T::from_count(self.prob.len());
        let mean = self.total() / n;
        self.prob.iter().map(|&x| (x - mean) * (x - mean)).fold(T::zero(), |a, b| a + b) / n
    }

    /// Cell containing the projected point.
    pub fn cell_of(&self, x: T, y: T) -> Option<(usize, usize)> {
        let part = DataPartition::new(vec![self.row_edges.clone(), self.col_edges.clone()]).ok()?;
        part.locate(&[x, y]).map(|f| (f / (self.col_edges.len() - 1), f % (self.col_edges.len() - 1)))
    }
}

/// Sums cell probabilities over a `resolution` grid on the projection of the
/// domain onto `dims` (zero-based).
pub fn marginalize<T: Real>(
    measure: &CountingMeasure<'_, T>,
    domain: &ParameterDomain<T>,
    dims: (usize, usize),
    resolution: (usize, usize),
) -> Result<MarginalTable<T>> {
    let n = domain.dim();
    if dims.0 == dims.1 || dims.0 >= n || dims.1 >= n {
        return Err(Error::arg("marginal dimensions must be distinct and within the domain"));
    }
    let part = DataPartition::uniform(
        &[domain.lower()[dims.0], domain.lower()[dims.1]],
        &[domain.upper()[dims.0], domain.upper()[dims.1]],
        &[resolution.0, resolution.1],
    )?;
    let mut prob = Array2::zeros(resolution);
    for (j, point) in measure.samples.iter().enumerate() {
        if let Some(f) = part.locate(&[point[dims.0], point[dims.1]]) {
            let cell = &mut prob[[f / resolution.1, f % resolution.1]];
            *cell = *cell + measure.cell_prob[j];
        }
    }
    Ok(MarginalTable {
        dims,
        row_edges: part.edges(0).to_vec(),
        col_edges: part.edges(1).to_vec(),
        prob,
    })
}

/// Inverse measure on a tensor grid of parameter cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure<T> {
    pub grid: DataPartition<T>,
    pub cell_prob: Vec<T>,
    pub std_error: Vec<T>,
    pub lost_mass: T,
    pub empty_bins: Vec<usize>,
    pub budget: usize,
    pub seed: u64,
}

impl<T: Real> GridMeasure<T> {
    pub fn total(&self) -> T {
        self.cell_prob.iter().copied().fold(T::zero(), |a, b| a + b)
    }
}

/// Grid approximation `P(b_j) = Σ_i p_i V_ij / Σ_k V_ik`, with `V_ij`
/// estimated from `budget` uniform points per grid cell.
///
/// Grid cell `j` draws from stream `j` of `seed`.
pub fn solve_grid<T, M>(
    domain: &ParameterDomain<T>,
    resolution: &[usize],
    model: &M,
    density: &SimpleFunctionDensity<T>,
    budget: usize,
    seed: u64,
) -> Result<GridMeasure<T>>
where
    T: Real,
    M: QoiModel<T> + ?Sized,
{
    if resolution.len() != domain.dim() || model.input_dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: resolution.len() });
    }
    if model.output_dim() != density.partition().dim() {
        return Err(Error::DimensionMismatch { expected: density.partition().dim(), got: model.output_dim() });
    }
    if budget == 0 {
        return Err(Error::arg("volume budget must be positive"));
    }
    let grid = DataPartition::uniform(domain.lower(), domain.upper(), resolution)?;
    let partition = density.partition();
    let hits: Vec<Vec<(usize, usize)>> = (0..grid.n_cells())
        .into_par_iter()
        .map(|j| {
            let (lo, hi) = grid.cell_bounds(j);
            let mut rng = substream(seed, j as u64);
            let mut found: Vec<usize> = Vec::with_capacity(budget);
            let mut point = vec![T::zero(); lo.len()];
            for _ in 0..budget {
                for k in 0..lo.len() {
                    point[k] = uniform_in(&mut rng, lo[k], hi[k]);
                }
                if let Some(i) = partition.locate(&model.evaluate(&point)?) {
                    found.push(i);
                }
            }
            found.sort_unstable();
            let mut tally: Vec<(usize, usize)> = Vec::new();
            for i in found {
                match tally.last_mut() {
                    Some((b, c)) if *b == i => *c += 1,
                    _ => tally.push((i, 1)),
                }
            }
            Ok(tally)
        })
        .collect::<Result<_>>()?;

    let b = T::from_count(budget);
    let cell_vol: Vec<T> = (0..grid.n_cells()).map(|j| grid.cell_volume(j)).collect();
    let hit_var = |j: usize, c: usize| {
        let f = T::from_count(c) / b;
        cell_vol[j] * cell_vol[j] * f * (T::one() - f) / b
    };
    let mut column = vec![T::zero(); partition.n_cells()];
    let mut column_var = vec![T::zero(); partition.n_cells()];
    for (j, tally) in hits.iter().enumerate() {
        for &(i, c) in tally {
            column[i] = column[i] + cell_vol[j] * T::from_count(c) / b;
            column_var[i] = column_var[i] + hit_var(j, c);
        }
    }
    // Delta-method variance of p_i V_ij / S_i with S_i = Σ_k V_ik.
    let p = density.probabilities();
    let mut cell_prob = Vec::with_capacity(grid.n_cells());
    let mut std_error = Vec::with_capacity(grid.n_cells());
    for (j, tally) in hits.iter().enumerate() {
        let (mut prob, mut var) = (T::zero(), T::zero());
        for &(i, c) in tally {
            if p[i] > T::zero() {
                let s = column[i];
                let v = cell_vol[j] * T::from_count(c) / b;
                prob = prob + p[i] * v / s;
                let own = hit_var(j, c);
                let d_own = T::one() / s - v / (s * s);
                let d_rest = v / (s * s);
                var = var + p[i] * p[i] * (d_own * d_own * own + d_rest * d_rest * (column_var[i] - own));
            }
        }
        cell_prob.push(prob);
        std_error.push(var.max(T::zero()).sqrt());
    }
    let empty_bins: Vec<usize> = (0..p.len()).filter(|&i| p[i] > T::zero() && !(column[i] > T::zero())).collect();
    let lost_mass = empty_bins.iter().map(|&i| p[i]).fold(T::zero(), |a, b| a + b);
    Ok(GridMeasure { grid, cell_prob, std_error, lost_mass, empty_bins, budget, seed })
}
