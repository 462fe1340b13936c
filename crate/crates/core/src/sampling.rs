//! Sampling rules for the parameter domain and the per-cell weights they imply.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{ParameterDomain, RuleTag, SampleSet, VolumeEstimate};
use crate::rng::{seeded, uniform_in};
use crate::scalar::Real;

/// Proposals drawn before the acceptance rate of rejection sampling is judged.
const PROBE_BUDGET: u64 = 10_000_000;
const MIN_ACCEPTANCE: f64 = 1e-6;
const POSITIVITY_PROBES: usize = 1024;

type DensityFn<T> = dyn Fn(&[T]) -> T + Send + Sync;

/// Strictly positive, bounded sampling intensity on the domain.
#[derive(Clone)]
pub struct SamplingDensity<T> {
    evaluator: Arc<DensityFn<T>>,
    upper_bound: T,
}

impl<T> fmt::Debug for SamplingDensity<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SamplingDensity").field("upper_bound", &self.upper_bound).finish_non_exhaustive()
    }
}

impl<T: Real> SamplingDensity<T> {
    /// Wraps `evaluator`, spot-checking `0 < f <= upper_bound` at the domain
    /// center and at seeded probe points.
    pub fn new(
        domain: &ParameterDomain<T>,
        evaluator: impl Fn(&[T]) -> T + Send + Sync + 'static,
        upper_bound: T,
    ) -> Result<Self> {
        if !(upper_bound.is_finite() && upper_bound > T::zero()) {
            return Err(Error::Density("upper bound must be positive and finite".into()));
        }
        let density = Self { evaluator: Arc::new(evaluator), upper_bound };
        let center: Vec<T> = (0..domain.dim())
            .map(|k| (domain.lower()[k] + domain.upper()[k]) / T::lit(2.0))
            .collect();
        density.check_at(&center)?;
        let mut rng = seeded(0x005e_ed0f_de25);
        let mut probe = vec![T::zero(); domain.dim()];
        for _ in 0..POSITIVITY_PROBES {
            for (k, x) in probe.iter_mut().enumerate() {
                *x = uniform_in(&mut rng, domain.lower()[k], domain.upper()[k]);
            }
            density.check_at(&probe)?;
        }
        Ok(density)
    }

    fn check_at(&self, point: &[T]) -> Result<T> {
        let f = (self.evaluator)(point);
        if !(f > T::zero()) {
            return Err(Error::Density(format!("density is not positive at {point:?}")));
        }
        if f > self.upper_bound {
            return Err(Error::Density(format!("density {f} exceeds its bound {} at {point:?}", self.upper_bound)));
        }
        Ok(f)
    }

    pub fn evaluate(&self, point: &[T]) -> T {
        (self.evaluator)(point)
    }

    pub fn upper_bound(&self) -> T {
        self.upper_bound
    }
}

#[derive(Debug, Clone)]
pub enum SamplingKind<T> {
    UniformIid,
    /// Cell-centered tensor grid with the given number of points per dimension.
    SerpentineGrid(Vec<usize>),
    LatinHypercube,
    DensityWeighted(SamplingDensity<T>),
}

#[derive(Debug, Clone)]
pub struct SamplingRule<T> {
    pub kind: SamplingKind<T>,
    pub seed: u64,
}

impl<T: Real> SamplingRule<T> {
    pub fn uniform(seed: u64) -> Self {
        Self { kind: SamplingKind::UniformIid, seed }
    }

    pub fn serpentine(resolution: Vec<usize>) -> Self {
        Self { kind: SamplingKind::SerpentineGrid(resolution), seed: 0 }
    }

    pub fn latin_hypercube(seed: u64) -> Self {
        Self { kind: SamplingKind::LatinHypercube, seed }
    }

    pub fn density_weighted(density: SamplingDensity<T>, seed: u64) -> Self {
        Self { kind: SamplingKind::DensityWeighted(density), seed }
    }

    pub fn tag(&self) -> RuleTag {
        match self.kind {
            SamplingKind::UniformIid => RuleTag::UniformIid,
            SamplingKind::SerpentineGrid(_) => RuleTag::SerpentineGrid,
            SamplingKind::LatinHypercube => RuleTag::LatinHypercube,
            SamplingKind::DensityWeighted(_) => RuleTag::DensityWeighted,
        }
    }
}

/// Draws `count` samples of `domain` under `rule`.
pub fn generate<T: Real>(rule: &SamplingRule<T>, domain: &ParameterDomain<T>, count: usize) -> Result<SampleSet<T>> {
    if count == 0 {
        return Err(Error::arg("sample count must be at least 1"));
    }
    let n = domain.dim();
    let flat = match &rule.kind {
        SamplingKind::UniformIid => {
            let mut rng = seeded(rule.seed);
            let mut flat = Vec::with_capacity(count * n);
            for _ in 0..count {
                for k in 0..n {
                    flat.push(uniform_in(&mut rng, domain.lower()[k], domain.upper()[k]));
                }
            }
            flat
        }
        SamplingKind::SerpentineGrid(res) => serpentine_grid(domain, res, count)?,
        SamplingKind::LatinHypercube => latin_hypercube(domain, count, rule.seed),
        SamplingKind::DensityWeighted(density) => rejection_sample(domain, density, count, rule.seed)?,
    };
    let points = Array2::from_shape_vec((count, n), flat).expect("generated row-major");
    SampleSet::new(domain, points, rule.tag(), rule.seed)
}

/// Cell centers visited boustrophedon-style: the last dimension varies
/// fastest, and each dimension reverses direction whenever the index over
/// the slower dimensions advances.
fn serpentine_grid<T: Real>(domain: &ParameterDomain<T>, res: &[usize], count: usize) -> Result<Vec<T>> {
    let n = domain.dim();
    if res.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: res.len() });
    }
    if res.contains(&0) {
        return Err(Error::arg("serpentine resolutions must be at least 1"));
    }
    let total = res.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
    if total != Some(count) {
        return Err(Error::arg(format!("serpentine grid {res:?} does not have {count} points")));
    }
    let mut flat = Vec::with_capacity(count * n);
    let mut digits = vec![0usize; n];
    for linear in 0..count {
        let mut rest = linear;
        for k in (0..n).rev() {
            digits[k] = rest % res[k];
            rest /= res[k];
        }
        // Parity of the linear index over dimensions 0..k decides direction of k.
        let mut prefix = 0usize;
        for k in 0..n {
            let idx = if prefix.is_multiple_of(2) { digits[k] } else { res[k] - 1 - digits[k] };
            let cell = domain.width(k) / T::from_count(res[k]);
            flat.push(domain.lower()[k] + (T::from_count(idx) + T::lit(0.5)) * cell);
            prefix = prefix * res[k] + digits[k];
        }
    }
    Ok(flat)
}

fn latin_hypercube<T: Real>(domain: &ParameterDomain<T>, count: usize, seed: u64) -> Vec<T> {
    let n = domain.dim();
    let mut rng = seeded(seed);
    let perms: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut p: Vec<usize> = (0..count).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    let count_t = T::from_count(count);
    let mut flat = Vec::with_capacity(count * n);
    for j in 0..count {
        for k in 0..n {
            let u: f64 = rng.random();
            let slot = (T::from_count(perms[k][j]) + T::lit(u)) / count_t;
            // Rounding must not push a point into the next stratum's closed end.
            let x = domain.lower()[k] + slot * domain.width(k);
            flat.push(x.min(domain.upper()[k]));
        }
    }
    flat
}

fn rejection_sample<T: Real>(
    domain: &ParameterDomain<T>,
    density: &SamplingDensity<T>,
    count: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let n = domain.dim();
    let mut rng = seeded(seed);
    let mut flat = Vec::with_capacity(count * n);
    let mut proposal = vec![T::zero(); n];
    let (mut accepted, mut attempts) = (0usize, 0u64);
    while accepted < count {
        for (k, x) in proposal.iter_mut().enumerate() {
            *x = uniform_in(&mut rng, domain.lower()[k], domain.upper()[k]);
        }
        let f = density.check_at(&proposal)?;
        let u: f64 = rng.random();
        attempts += 1;
        if T::lit(u) * density.upper_bound() < f {
            flat.extend_from_slice(&proposal);
            accepted += 1;
        }
        if attempts % PROBE_BUDGET == 0 && (accepted as f64) / (attempts as f64) < MIN_ACCEPTANCE {
            return Err(Error::Density(format!("acceptance rate {accepted}/{attempts} is too low")));
        }
    }
    Ok(flat)
}

/// Relative cell weights used in place of equal Voronoi volumes.
///
/// With no volume estimates, rules whose cells have equal expected volume get
/// `1/N`; density-weighted samples get weights proportional to `1/f`, the
/// expected relative cell volume. Supplied estimates are normalized to sum to 1.
pub fn effective_weights<T: Real>(
    rule: &SamplingRule<T>,
    samples: &SampleSet<T>,
    volumes: Option<&[VolumeEstimate<T>]>,
) -> Result<Vec<T>> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::arg("sample set is empty"));
    }
    let raw: Vec<T> = match (volumes, &rule.kind) {
        (Some(v), _) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
            v.iter().map(|e| e.value).collect()
        }
        (None, SamplingKind::DensityWeighted(density)) => {
            samples.iter().map(|p| T::one() / density.evaluate(p)).collect()
        }
        (None, _) => return Ok(vec![T::one() / T::from_count(n); n]),
    };
    let total: T = raw.iter().copied().fold(T::zero(), |a, b| a + b);
    if !(total > T::zero()) || raw.iter().any(|w| *w < T::zero()) {
        return Err(Error::arg("cell weights must be nonnegative with a positive total"));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}
