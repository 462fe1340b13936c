//! Partitions of data space and simple-function output densities.

use ndarray::Array2;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::Real;

/// Relative padding applied to an empirical bounding box.
pub const BOX_PADDING: f64 = 1e-9;
/// Largest fraction of output samples allowed outside the partition box.
pub const OUTSIDE_MASS_TOLERANCE: f64 = 1e-3;

/// Tensor-product partition of a box in data space.
///
/// Cells are half-open `[e_k, e_{k+1})` per dimension except the last, which
/// is closed. Cells are numbered row-major (last dimension fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DataPartition<T> {
    edges: Vec<Vec<T>>,
}

impl<T: Real> DataPartition<T> {
    pub fn new(edges: Vec<Vec<T>>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::arg("partition needs at least one dimension"));
        }
        for (k, e) in edges.iter().enumerate() {
            if e.len() < 2 {
                return Err(Error::arg(format!("dimension {k} needs at least two edges")));
            }
            if e.iter().any(|x| !x.is_finite()) || e.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::arg(format!("edges of dimension {k} must be finite and strictly increasing")));
            }
        }
        Ok(Self { edges })
    }

    /// Equal-width bins on `[lower, upper]`.
    pub fn uniform(lower: &[T], upper: &[T], bins: &[usize]) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != bins.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: bins.len() });
        }
        let edges = (0..bins.len())
            .map(|k| {
                let b = bins[k];
                if b == 0 {
                    return Err(Error::arg("bin counts must be at least 1"));
                }
                let w = (upper[k] - lower[k]) / T::from_count(b);
                Ok((0..=b)
                    .map(|i| if i == b { upper[k] } else { lower[k] + T::from_count(i) * w })
                    .collect())
            })
            .collect::<Result<Vec<Vec<T>>>>()?;
        Self::new(edges)
    }

    /// Equal-width bins over the padded bounding box of `values` (one row per point).
    pub fn from_samples(values: &Array2<T>, bins: &[usize]) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::arg("cannot bound an empty sample"));
        }
        if values.ncols() != bins.len() {
            return Err(Error::DimensionMismatch { expected: values.ncols(), got: bins.len() });
        }
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        for col in values.columns() {
            let lo = col.iter().fold(T::infinity(), |m, &v| m.min(v));
            let hi = col.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let scale = (hi - lo).max(lo.abs()).max(hi.abs()).max(T::one());
            let pad = T::lit(BOX_PADDING) * scale;
            lower.push(lo - pad);
            upper.push(hi + pad);
        }
        Self::uniform(&lower, &upper, bins)
    }

    pub fn dim(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self, k: usize) -> &[T] {
        &self.edges[k]
    }

    pub fn bins(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.len() - 1).collect()
    }

    pub fn n_cells(&self) -> usize {
        self.edges.iter().map(|e| e.len() - 1).product()
    }

    pub fn lower(&self) -> Vec<T> {
        self.edges.iter().map(|e| e[0]).collect()
    }

    pub fn upper(&self) -> Vec<T> {
        self.edges.iter().map(|e| e[e.len() - 1]).collect()
    }

    fn locate_axis(&self, k: usize, x: T) -> Option<usize> {
        let e = &self.edges[k];
        let last = e.len() - 1;
        if !(x >= e[0] && x <= e[last]) {
            return None;
        }
        if x == e[last] {
            return Some(last - 1);
        }
        Some(e.partition_point(|&edge| edge <= x) - 1)
    }

    /// Flat index of the cell containing `q`, or `None` outside the box.
    pub fn locate(&self, q: &[T]) -> Option<usize> {
        if q.len() != self.dim() {
            return None;
        }
        let mut flat = 0usize;
        for (k, &x) in q.iter().enumerate() {
            flat = flat * (self.edges[k].len() - 1) + self.locate_axis(k, x)?;
        }
        Some(flat)
    }

    pub fn unravel(&self, mut cell: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            let b = self.edges[k].len() - 1;
            idx[k] = cell % b;
            cell /= b;
        }
        idx
    }

    pub fn cell_bounds(&self, cell: usize) -> (Vec<T>, Vec<T>) {
        let idx = self.unravel(cell);
        let lo = idx.iter().enumerate().map(|(k, &i)| self.edges[k][i]).collect();
        let hi = idx.iter().enumerate().map(|(k, &i)| self.edges[k][i + 1]).collect();
        (lo, hi)
    }

    pub fn cell_volume(&self, cell: usize) -> T {
        let (lo, hi) = self.cell_bounds(cell);
        lo.iter().zip(&hi).fold(T::one(), |v, (&a, &b)| v * (b - a))
    }
}

/// `ρ = Σ p_i 1_{I_i} / |I_i|` over a data partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleFunctionDensity<T> {
    partition: DataPartition<T>,
    p: Vec<T>,
}

impl<T: Real> SimpleFunctionDensity<T> {
    /// Cell probabilities are renormalized to sum to one.
    pub fn new(partition: DataPartition<T>, p: Vec<T>) -> Result<Self> {
        if p.len() != partition.n_cells() {
            return Err(Error::DimensionMismatch { expected: partition.n_cells(), got: p.len() });
        }
        if p.iter().any(|x| !(x.is_finite() && *x >= T::zero())) {
            return Err(Error::arg("cell probabilities must be finite and nonnegative"));
        }
        let total: T = p.iter().copied().fold(T::zero(), |a, b| a + b);
        if !(total > T::zero()) {
            return Err(Error::arg("cell probabilities must have positive total"));
        }
        let p = p.into_iter().map(|x| x / total).collect();
        Ok(Self { partition, p })
    }

    /// Uniform density on the box `[lower, upper]`, restricted to the partition.
    pub fn uniform_on_box(partition: DataPartition<T>, lower: &[T], upper: &[T]) -> Result<Self> {
        if lower.len() != partition.dim() || upper.len() != partition.dim() {
            return Err(Error::DimensionMismatch { expected: partition.dim(), got: lower.len() });
        }
        let p = (0..partition.n_cells())
            .map(|i| {
                let (lo, hi) = partition.cell_bounds(i);
                (0..lo.len()).fold(T::one(), |v, k| {
                    v * (hi[k].min(upper[k]) - lo[k].max(lower[k])).max(T::zero())
                })
            })
            .collect();
        Self::new(partition, p)
    }

    pub fn partition(&self) -> &DataPartition<T> {
        &self.partition
    }

    pub fn probabilities(&self) -> &[T] {
        &self.p
    }

    pub fn n_cells(&self) -> usize {
        self.p.len()
    }

    /// Density value at `q` (zero outside the partition box).
    pub fn value_at(&self, q: &[T]) -> T {
        match self.partition.locate(q) {
            Some(i) => self.p[i] / self.partition.cell_volume(i),
            None => T::zero(),
        }
    }

    /// Merges each run of `factor` consecutive cells along dimension `dim`.
    pub fn merge_adjacent(&self, dim: usize, factor: usize) -> Result<Self> {
        let bins = self.partition.bins();
        if dim >= bins.len() || factor == 0 || !bins[dim].is_multiple_of(factor) {
            return Err(Error::arg("merge factor must divide the bin count"));
        }
        let mut edges = self.partition.edges.clone();
        edges[dim] = edges[dim].iter().copied().step_by(factor).collect();
        let coarse = DataPartition::new(edges)?;
        let mut p = vec![T::zero(); coarse.n_cells()];
        for (i, &pi) in self.p.iter().enumerate() {
            let mut idx = self.partition.unravel(i);
            idx[dim] /= factor;
            let flat = idx.iter().enumerate().fold(0, |f, (k, &x)| f * coarse.bins()[k] + x);
            p[flat] = p[flat] + pi;
        }
        Ok(Self { partition: coarse, p })
    }
}

/// Beta(α, β) shifted to `[loc, loc + scale]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledBeta<T> {
    pub alpha: T,
    pub beta: T,
    pub loc: T,
    pub scale: T,
}

impl<T: Real> ScaledBeta<T> {
    pub fn new(alpha: T, beta: T, loc: T, scale: T) -> Result<Self> {
        if !(alpha > T::zero() && beta > T::zero()) {
            return Err(Error::arg("beta shape parameters must be positive"));
        }
        if !(scale > T::zero() && scale.is_finite() && loc.is_finite()) {
            return Err(Error::arg("beta scale must be positive and finite"));
        }
        Ok(Self { alpha, beta, loc, scale })
    }

    pub fn mean(&self) -> T {
        self.loc + self.scale * self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> T {
        let s = self.alpha + self.beta;
        self.scale * self.scale * self.alpha * self.beta / (s * s * (s + T::one()))
    }

    pub fn support(&self) -> (T, T) {
        (self.loc, self.loc + self.scale)
    }

    pub fn pdf(&self, x: T) -> T {
        let u = ((x - self.loc) / self.scale).as_f64();
        if !(0.0..=1.0).contains(&u) {
            return T::zero();
        }
        let (a, b) = (self.alpha.as_f64(), self.beta.as_f64());
        let log = (a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() - statrs::function::beta::ln_beta(a, b);
        T::lit(log.exp() / self.scale.as_f64())
    }
}

/// Longest-support Beta with mean `reference` whose support stays inside
/// `[reference - half_range, reference + half_range]`.
pub fn beta_for_reference<T: Real>(reference: T, half_range: T, alpha: T, beta: T) -> Result<ScaledBeta<T>> {
    if !(half_range > T::zero()) {
        return Err(Error::arg("half range must be positive"));
    }
    if !(alpha > T::zero() && beta > T::zero()) {
        return Err(Error::arg("beta shape parameters must be positive"));
    }
    let sum = alpha + beta;
    let length = half_range / alpha.max(beta) * sum;
    ScaledBeta::new(alpha, beta, reference - length * alpha / sum, length)
}

/// `count` i.i.d. draws from the product of `factors`, one column per factor.
///
/// Each Beta variate is `G_a / (G_a + G_b)` with independent unit-scale Gamma
/// variates drawn in that order from one seeded stream.
pub fn sample_density<T: Real>(factors: &[ScaledBeta<T>], count: usize, seed: u64) -> Result<Array2<T>> {
    if count == 0 || factors.is_empty() {
        return Err(Error::arg("need at least one draw and one factor"));
    }
    let gammas = factors
        .iter()
        .map(|f| {
            let a = Gamma::new(f.alpha.as_f64(), 1.0).map_err(|e| Error::arg(e.to_string()))?;
            let b = Gamma::new(f.beta.as_f64(), 1.0).map_err(|e| Error::arg(e.to_string()))?;
            Ok((a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seeded(seed);
    let mut out = Array2::zeros((count, factors.len()));
    for mut row in out.rows_mut() {
        for (k, (ga, gb)) in gammas.iter().enumerate() {
            let x = ga.sample(&mut rng);
            let y = gb.sample(&mut rng);
            let u = T::lit(x / (x + y));
            row[k] = (factors[k].loc + u * factors[k].scale).min(factors[k].loc + factors[k].scale);
        }
    }
    Ok(out)
}

/// A binned density together with the share of samples that missed the box.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDensity<T> {
    pub density: SimpleFunctionDensity<T>,
    pub outside_count: usize,
    pub outside_fraction: f64,
}

/// Histogram of `samples` over `partition`, normalized over the samples inside the box.
///
/// A nonzero outside fraction up to [`OUTSIDE_MASS_TOLERANCE`] is reported;
/// more than that is an error.
pub fn bin_to_simple_function<T: Real>(samples: &Array2<T>, partition: &DataPartition<T>) -> Result<BinnedDensity<T>> {
    if samples.ncols() != partition.dim() {
        return Err(Error::DimensionMismatch { expected: partition.dim(), got: samples.ncols() });
    }
    let mut counts = vec![0usize; partition.n_cells()];
    let mut outside = 0usize;
    for row in samples.rows() {
        let q: Vec<T> = row.iter().copied().collect();
        match partition.locate(&q) {
            Some(i) => counts[i] += 1,
            None => outside += 1,
        }
    }
    let inside = samples.nrows() - outside;
    if inside == 0 {
        return Err(Error::EmptyDensity);
    }
    let fraction = outside as f64 / samples.nrows() as f64;
    if fraction > OUTSIDE_MASS_TOLERANCE {
        return Err(Error::OutsideMass { fraction });
    }
    let total = T::from_count(inside);
    let p = counts.into_iter().map(|c| T::from_count(c) / total).collect();
    Ok(BinnedDensity {
        density: SimpleFunctionDensity { partition: partition.clone(), p },
        outside_count: outside,
        outside_fraction: fraction,
    })
}
