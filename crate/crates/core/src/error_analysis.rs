//! A posteriori error analysis of counting measures.

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::density::{DataPartition, SimpleFunctionDensity};
use crate::error::{Error, Result};
use crate::geometry::{voronoi_coverage, Adjacency, Emulation, Event, ParameterDomain, SampleSet, VolumeEstimate};
use crate::inverse::{assign_bins, cover_probability, solve_counting, AnsatzWeights, CountingMeasure};
use crate::qoi::PerturbedModel;
use crate::scalar::Real;

/// How `E(A, A_i)` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EMode {
    Counts,
    Volumes,
}

impl EMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EMode::Counts => "counts",
            EMode::Volumes => "volumes",
        }
    }
}

/// Cells of one contour region with its inner and outer sandwich.
#[derive(Debug, Clone, PartialEq)]
pub struct Region<T> {
    pub bin: usize,
    pub members: Vec<usize>,
    /// Members with no neighbor outside the region.
    pub inner: Vec<usize>,
    /// Members together with all their neighbors.
    pub outer: Vec<usize>,
    pub volume_members: T,
    pub volume_inner: T,
    pub volume_outer: T,
}

/// Inner and outer cell unions around every nonempty contour region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSandwich<T> {
    regions: Vec<Region<T>>,
    volumes: Vec<T>,
}

impl<T: Real> RegionSandwich<T> {
    pub fn regions(&self) -> &[Region<T>] {
        &self.regions
    }

    pub fn region(&self, bin: usize) -> Option<&Region<T>> {
        self.regions.iter().find(|r| r.bin == bin)
    }

    pub fn cell_volumes(&self) -> &[T] {
        &self.volumes
    }
}

fn sum_over<T: Real>(cells: &[usize], volumes: &[T]) -> T {
    cells.iter().map(|&j| volumes[j]).fold(T::zero(), |a, b| a + b)
}

/// Builds the sandwich of every bin that holds samples.
///
/// Samples outside the partition form a region of their own. Every bin with
/// positive probability must own a cell whose neighbors all share its bin.
pub fn build_sandwich<T: Real>(
    pointer: &[Option<usize>],
    bin_prob: &[T],
    adjacency: &Adjacency,
    volumes: &[VolumeEstimate<T>],
) -> Result<RegionSandwich<T>> {
    let n = pointer.len();
    if adjacency.len() != n || volumes.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: adjacency.len().min(volumes.len()) });
    }
    let vol: Vec<T> = volumes.iter().map(|v| v.value).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bin_prob.len()];
    for (j, bin) in pointer.iter().enumerate() {
        if let Some(i) = bin {
            members
                .get_mut(*i)
                .ok_or(Error::IndexOutOfRange { index: *i, len: bin_prob.len() })?
                .push(j);
        }
    }
    let mut regions = Vec::new();
    let mut violated = Vec::new();
    for (i, cells) in members.into_iter().enumerate() {
        if cells.is_empty() {
            if bin_prob[i] > T::zero() {
                violated.push(i);
            }
            continue;
        }
        let inner: Vec<usize> = cells
            .iter()
            .copied()
            .filter(|&j| adjacency.neighbors(j).iter().all(|&k| pointer[k] == Some(i)))
            .collect();
        let outer: BTreeSet<usize> =
            cells.iter().flat_map(|&j| std::iter::once(j).chain(adjacency.neighbors(j).iter().copied())).collect();
        let outer: Vec<usize> = outer.into_iter().collect();
        if bin_prob[i] > T::zero() && !(sum_over(&inner, &vol) > T::zero()) {
            violated.push(i);
        }
        regions.push(Region {
            bin: i,
            volume_members: sum_over(&cells, &vol),
            volume_inner: sum_over(&inner, &vol),
            volume_outer: sum_over(&outer, &vol),
            members: cells,
            inner,
            outer,
        });
    }
    if !violated.is_empty() {
        return Err(Error::Assumption { bins: violated.into_iter().map(|i| i + 1).collect() });
    }
    Ok(RegionSandwich { regions, volumes: vol })
}

/// Per-bin ingredients of the term-I bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinTerm1<T> {
    pub bin: usize,
    pub p: T,
    pub e: T,
    /// `μ(A ∩ B_i) / μ(C_i)`.
    pub inner_ratio: T,
    /// `μ(A ∩ C_i) / μ(B_i)`.
    pub outer_ratio: T,
}

impl<T: Real> BinTerm1<T> {
    pub fn lower(&self) -> T {
        self.p * (self.inner_ratio - self.e).min(self.outer_ratio - self.e)
    }

    pub fn upper(&self) -> T {
        self.p * (self.inner_ratio - self.e).max(self.outer_ratio - self.e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term1<T> {
    pub lower: T,
    pub upper: T,
    pub bins: Vec<BinTerm1<T>>,
}

/// Signed bounds on the set-approximation error of `P(A)` for the cell union `cover`.
pub fn term1_bounds<T: Real>(
    measure: &CountingMeasure<'_, T>,
    sandwich: &RegionSandwich<T>,
    cover: &BTreeSet<usize>,
    mode: EMode,
) -> Result<Term1<T>> {
    let vol = sandwich.cell_volumes();
    let n = measure.cell_prob().len();
    if vol.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: vol.len() });
    }
    if let Some(&bad) = cover.iter().find(|&&j| j >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let in_a: Vec<bool> = (0..n).map(|j| cover.contains(&j)).collect();
    let a_vol = |cells: &[usize]| -> T { cells.iter().filter(|&&j| in_a[j]).map(|&j| vol[j]).fold(T::zero(), |a, b| a + b) };
    let p = measure.bin_prob();
    let mut bins = Vec::new();
    let mut missing = Vec::new();
    for (i, &pi) in p.iter().enumerate() {
        if !(pi > T::zero()) {
            continue;
        }
        let Some(r) = sandwich.region(i) else {
            missing.push(i + 1);
            continue;
        };
        if !(r.volume_inner > T::zero()) {
            missing.push(i + 1);
            continue;
        }
        let e = match mode {
            EMode::Counts => {
                let hits = r.members.iter().filter(|&&j| in_a[j]).count();
                T::from_count(hits) / T::from_count(r.members.len())
            }
            EMode::Volumes => {
                if !(r.volume_members > T::zero()) {
                    missing.push(i + 1);
                    continue;
                }
                a_vol(&r.members) / r.volume_members
            }
        };
        bins.push(BinTerm1 {
            bin: i,
            p: pi,
            e,
            inner_ratio: a_vol(&r.inner) / r.volume_outer,
            outer_ratio: a_vol(&r.outer) / r.volume_inner,
        });
    }
    if !missing.is_empty() {
        return Err(Error::Assumption { bins: missing });
    }
    let lower = bins.iter().map(|b| b.lower()).fold(T::zero(), |a, b| a + b);
    let upper = bins.iter().map(|b| b.upper()).fold(T::zero(), |a, b| a + b);
    Ok(Term1 { lower, upper, bins })
}

/// Per-bin tallies of the term-II estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinTerm2<T> {
    pub bin: usize,
    pub p: T,
    pub j_a: T,
    pub j: T,
    pub j_ae: T,
    pub j_e: T,
    /// Set when `J_i` or `J_{i,e}` vanishes and the bin was skipped.
    pub flagged: bool,
}

impl<T: Real> BinTerm2<T> {
    pub fn contribution(&self) -> T {
        if self.flagged {
            return T::zero();
        }
        self.p * (self.j_a * self.j_e - self.j_ae * self.j) / (self.j * self.j_e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term2<T> {
    pub estimate: T,
    pub bins: Vec<BinTerm2<T>>,
}

impl<T: Real> Term2<T> {
    pub fn flagged_bins(&self) -> Vec<usize> {
        self.bins.iter().filter(|b| b.flagged && b.p > T::zero()).map(|b| b.bin).collect()
    }
}

/// Misidentification estimate from `Q_h` values and corrected `Q_h + e_h` values.
///
/// With `weights` the tallies are weight sums (cell volumes) instead of counts.
pub fn term2_from_values<T: Real>(
    numerical: &Array2<T>,
    corrected: &Array2<T>,
    density: &SimpleFunctionDensity<T>,
    cover: &BTreeSet<usize>,
    weights: Option<&[T]>,
) -> Result<Term2<T>> {
    let n = numerical.nrows();
    if corrected.dim() != numerical.dim() {
        return Err(Error::arg("error estimates must match the numerical values in shape"));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.len() });
        }
    }
    let part = density.partition();
    let bin_h = assign_bins(numerical, part)?;
    let bin_e = assign_bins(corrected, part)?;
    let m = part.n_cells();
    let zero = T::zero();
    let mut tallies = vec![(zero, zero, zero, zero); m];
    for j in 0..n {
        let w = weights.map_or(T::one(), |w| w[j]);
        let in_a = cover.contains(&j);
        if let Some(i) = bin_h[j] {
            tallies[i].1 = tallies[i].1 + w;
            if in_a {
                tallies[i].0 = tallies[i].0 + w;
            }
        }
        if let Some(i) = bin_e[j] {
            tallies[i].3 = tallies[i].3 + w;
            if in_a {
                tallies[i].2 = tallies[i].2 + w;
            }
        }
    }
    let p = density.probabilities();
    let bins: Vec<BinTerm2<T>> = tallies
        .into_iter()
        .enumerate()
        .map(|(i, (j_a, j, j_ae, j_e))| BinTerm2 {
            bin: i,
            p: p[i],
            j_a,
            j,
            j_ae,
            j_e,
            flagged: !(j > zero && j_e > zero),
        })
        .collect();
    let estimate = bins.iter().map(|b| b.contribution()).fold(T::zero(), |a, b| a + b);
    Ok(Term2 { estimate, bins })
}

/// Term-II estimate for `event` from a perturbed model evaluated at `samples`.
pub fn term2_estimate<T: Real>(
    model: &PerturbedModel<T>,
    domain: &ParameterDomain<T>,
    samples: &SampleSet<T>,
    density: &SimpleFunctionDensity<T>,
    event: &Event<T>,
    weights: Option<&[T]>,
) -> Result<Term2<T>> {
    let values = model.evaluate_samples(samples)?;
    let cover = voronoi_coverage(domain, samples, event)?;
    term2_from_values(&values.numerical, &values.corrected, density, &cover, weights)
}

/// The cell union representing `event` in the numerical σ-algebra.
pub fn optimal_coverage<T: Real>(
    domain: &ParameterDomain<T>,
    samples: &SampleSet<T>,
    event: &Event<T>,
) -> Result<Event<T>> {
    let cover = voronoi_coverage(domain, samples, event)?;
    if cover.is_empty() {
        return Err(Error::NoSample);
    }
    Ok(Event::CellUnion(cover))
}

/// Counting measure from `Q_h`, or from `Q_h + e_h` when `correct` is set.
pub fn improved_invert<'s, T: Real>(
    model: &PerturbedModel<T>,
    samples: &'s SampleSet<T>,
    density: &SimpleFunctionDensity<T>,
    correct: bool,
) -> Result<CountingMeasure<'s, T>> {
    let values = model.evaluate_samples(samples)?;
    let q = if correct { values.corrected } else { values.numerical };
    solve_counting(samples, &q, density, None, None)
}

/// Density and ansatz under which two different cell unions get different
/// probabilities.
///
/// Mass is spread evenly over the bins hit by cells in `a \ b` (or `b \ a`
/// when that is empty), and cells of the opposite difference are weighted down
/// so that no cancellation can occur.
pub fn separating_density<T: Real>(
    qoi_values: &Array2<T>,
    partition: &DataPartition<T>,
    a: &BTreeSet<usize>,
    b: &BTreeSet<usize>,
) -> Result<(SimpleFunctionDensity<T>, AnsatzWeights<T>)> {
    let (mut keep, mut damp): (Vec<usize>, Vec<usize>) =
        (a.difference(b).copied().collect(), b.difference(a).copied().collect());
    if keep.is_empty() {
        std::mem::swap(&mut keep, &mut damp);
    }
    if keep.is_empty() {
        return Err(Error::arg("cell unions coincide"));
    }
    let pointer = assign_bins(qoi_values, partition)?;
    let mut p = vec![T::zero(); partition.n_cells()];
    for &k in &keep {
        let i = pointer
            .get(k)
            .ok_or(Error::IndexOutOfRange { index: k, len: pointer.len() })?
            .ok_or_else(|| Error::arg(format!("sample {} maps outside the partition", k + 1)))?;
        p[i] = T::one();
    }
    let mut w = vec![T::one(); qoi_values.nrows()];
    for &k in &damp {
        w[k] = T::lit(1e-9);
    }
    Ok((SimpleFunctionDensity::new(partition.clone(), p)?, AnsatzWeights::new(w)?))
}

/// Error analysis of one event.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport<T> {
    pub event: Event<T>,
    pub cover: BTreeSet<usize>,
    pub probability: T,
    /// Estimated volume of the event minus its coverage and vice versa.
    pub set_error: VolumeEstimate<T>,
    pub mode: EMode,
    pub term1: Term1<T>,
    pub term2: Option<Term2<T>>,
    pub n_emulated: usize,
    pub seed: u64,
}

impl<T: Real> ErrorReport<T> {
    pub fn term1_lower(&self) -> T {
        self.term1.lower
    }

    pub fn term1_upper(&self) -> T {
        self.term1.upper
    }

    pub fn term2_estimate(&self) -> Option<T> {
        self.term2.as_ref().map(|t| t.estimate)
    }
}

/// Inputs of [`error_report`].
#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub mode: EMode,
    pub n_emulated: usize,
    pub seed: u64,
}

/// Term-I bounds and, when `estimate` holds `e_h`, the term-II estimate for `event`.
///
/// All volumes come from one emulation set so that the sandwich inclusions
/// hold exactly for the estimates. In volume mode the measure uses the
/// estimated cell volumes as weights.
pub fn error_report<T: Real>(
    domain: &ParameterDomain<T>,
    samples: &SampleSet<T>,
    numerical: &Array2<T>,
    estimate: Option<&Array2<T>>,
    density: &SimpleFunctionDensity<T>,
    event: &Event<T>,
    options: ReportOptions,
) -> Result<ErrorReport<T>> {
    if options.n_emulated < 10 * samples.len() {
        return Err(Error::arg(format!(
            "n_emulated = {} is below 10 x {} samples",
            options.n_emulated,
            samples.len()
        )));
    }
    let emulation = Emulation::new(domain, samples, options.n_emulated, options.seed, true)?;
    let volumes = emulation.cell_volumes();
    let weights: Option<Vec<T>> = match options.mode {
        EMode::Counts => None,
        EMode::Volumes => Some(volumes.iter().map(|v| v.value).collect()),
    };
    let measure = solve_counting(samples, numerical, density, weights.as_deref(), None)?;
    let sandwich = build_sandwich(measure.pointer(), measure.bin_prob(), &emulation.adjacency()?, &volumes)?;
    let cover = voronoi_coverage(domain, samples, event)?;
    let term1 = term1_bounds(&measure, &sandwich, &cover, options.mode)?;
    let term2 = match estimate {
        Some(e) => {
            if e.dim() != numerical.dim() {
                return Err(Error::arg("error estimates must match the numerical values in shape"));
            }
            Some(term2_from_values(numerical, &(numerical + e), density, &cover, weights.as_deref())?)
        }
        None => None,
    };
    Ok(ErrorReport {
        event: event.clone(),
        probability: cover_probability(&measure, &cover),
        set_error: emulation.symmetric_difference(samples, event)?,
        cover,
        mode: options.mode,
        term1,
        term2,
        n_emulated: options.n_emulated,
        seed: options.seed,
    })
}
