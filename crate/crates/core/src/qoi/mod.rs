//! Quantity-of-interest maps from the parameter domain to data space.

pub mod mseirs;
pub mod ode;

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::SampleSet;
use crate::scalar::Real;

/// A deterministic map `Q: Λ ⊂ R^n → R^m` with `m <= n`.
pub trait QoiModel<T: Real>: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn evaluate(&self, lambda: &[T]) -> Result<Vec<T>>;

    /// Closed-form Jacobian (`m × n`), when the map has one.
    fn jacobian(&self, _lambda: &[T]) -> Option<Array2<T>> {
        None
    }
}

/// Evaluates `model` at every sample, in sample order.
pub fn evaluate_samples<T, M>(model: &M, samples: &SampleSet<T>) -> Result<Array2<T>>
where
    T: Real,
    M: QoiModel<T> + ?Sized,
{
    if samples.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), got: samples.dim() });
    }
    let m = model.output_dim();
    let rows: Vec<Vec<T>> = (0..samples.len())
        .into_par_iter()
        .map(|j| model.evaluate(samples.point(j)))
        .collect::<Result<_>>()?;
    let flat: Vec<T> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((samples.len(), m), flat).map_err(|_| Error::arg("model returned wrong output length"))
}

/// Rank by Gaussian elimination with partial pivoting.
pub fn matrix_rank<T: Real>(a: &Array2<T>) -> usize {
    let mut a = a.to_owned();
    let (rows, cols) = a.dim();
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return 0;
    }
    let tol = scale * T::from_count(rows.max(cols)) * T::epsilon();
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let pivot = (rank..rows)
            .max_by(|&x, &y| a[[x, c]].abs().partial_cmp(&a[[y, c]].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty range");
        if a[[pivot, c]].abs() <= tol {
            continue;
        }
        for k in 0..cols {
            a.swap([rank, k], [pivot, k]);
        }
        for r in rank + 1..rows {
            let factor = a[[r, c]] / a[[rank, c]];
            for k in c..cols {
                let v = a[[rank, k]];
                a[[r, k]] = a[[r, k]] - factor * v;
            }
        }
        rank += 1;
    }
    rank
}

/// `Q(λ) = W λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap<T> {
    weights: Array2<T>,
}

/// Linear map with full-row-rank weights.
pub fn linear_map<T: Real>(weights: Array2<T>) -> Result<LinearMap<T>> {
    let (m, n) = weights.dim();
    if m == 0 || m > n {
        return Err(Error::arg(format!("linear map needs 1 <= m <= n, got {m} x {n}")));
    }
    let rank = matrix_rank(&weights);
    if rank < m {
        return Err(Error::RankDeficient { rank, required: m });
    }
    Ok(LinearMap { weights })
}

impl<T: Real> LinearMap<T> {
    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }
}

impl<T: Real> QoiModel<T> for LinearMap<T> {
    fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn evaluate(&self, lambda: &[T]) -> Result<Vec<T>> {
        if lambda.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: lambda.len() });
        }
        Ok(self
            .weights
            .outer_iter()
            .map(|row| row.iter().zip(lambda).fold(T::zero(), |s, (&w, &x)| s + w * x))
            .collect())
    }

    fn jacobian(&self, _lambda: &[T]) -> Option<Array2<T>> {
        Some(self.weights.clone())
    }
}

/// `q(λ) = λ₁ λ₂`, a saddle on `[-1, 1]²`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaddleMap;

pub fn saddle_map() -> SaddleMap {
    SaddleMap
}

impl<T: Real> QoiModel<T> for SaddleMap {
    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, lambda: &[T]) -> Result<Vec<T>> {
        if lambda.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: lambda.len() });
        }
        Ok(vec![lambda[0] * lambda[1]])
    }

    fn jacobian(&self, lambda: &[T]) -> Option<Array2<T>> {
        Array2::from_shape_vec((1, 2), vec![lambda[1], lambda[0]]).ok()
    }
}

type VectorFn<T> = dyn Fn(&[T]) -> Vec<T> + Send + Sync;

/// Adapts a closure into a model.
#[derive(Clone)]
pub struct FnModel<T> {
    n: usize,
    m: usize,
    f: Arc<VectorFn<T>>,
}

impl<T: Real> FnModel<T> {
    pub fn new(n: usize, m: usize, f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self { n, m, f: Arc::new(f) }
    }
}

impl<T> fmt::Debug for FnModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel").field("n", &self.n).field("m", &self.m).finish_non_exhaustive()
    }
}

impl<T: Real> QoiModel<T> for FnModel<T> {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn output_dim(&self) -> usize {
        self.m
    }

    fn evaluate(&self, lambda: &[T]) -> Result<Vec<T>> {
        let q = (self.f)(lambda);
        if q.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: q.len() });
        }
        Ok(q)
    }
}

/// An exact map `Q` together with a numerical surrogate `Q_h = Q - bias` and
/// an error estimate `e_h = quality * bias` of the true error `e = Q - Q_h`.
#[derive(Clone)]
pub struct PerturbedModel<T> {
    exact: Arc<dyn QoiModel<T>>,
    bias: Arc<VectorFn<T>>,
    quality: T,
}

impl<T> fmt::Debug for PerturbedModel<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbedModel").field("quality", &self.quality).finish_non_exhaustive()
    }
}

pub fn perturb<T: Real>(
    exact: Arc<dyn QoiModel<T>>,
    bias: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    estimate_quality: T,
) -> Result<PerturbedModel<T>> {
    if !(estimate_quality >= T::zero() && estimate_quality <= T::one()) {
        return Err(Error::arg("estimate quality must lie in [0, 1]"));
    }
    Ok(PerturbedModel { exact, bias: Arc::new(bias), quality: estimate_quality })
}

/// Exact, numerical and estimated-error values at a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedValues<T> {
    pub exact: Array2<T>,
    pub numerical: Array2<T>,
    pub estimate: Array2<T>,
    /// `Q_h + e_h`, evaluated as `Q - (1 - quality) * bias`.
    pub corrected: Array2<T>,
}

impl<T: Real> PerturbedModel<T> {
    /// `Q_h` and `e_h` evaluated at the same points with constant bias.
    pub fn constant_bias(exact: Arc<dyn QoiModel<T>>, bias: Vec<T>, estimate_quality: T) -> Result<Self> {
        if bias.len() != exact.output_dim() {
            return Err(Error::DimensionMismatch { expected: exact.output_dim(), got: bias.len() });
        }
        perturb(exact, move |_| bias.clone(), estimate_quality)
    }

    pub fn estimate_quality(&self) -> T {
        self.quality
    }

    pub fn exact_model(&self) -> &Arc<dyn QoiModel<T>> {
        &self.exact
    }

    fn bias_at(&self, lambda: &[T]) -> Result<Vec<T>> {
        let b = (self.bias)(lambda);
        if b.len() != self.exact.output_dim() {
            return Err(Error::DimensionMismatch { expected: self.exact.output_dim(), got: b.len() });
        }
        Ok(b)
    }

    pub fn exact(&self, lambda: &[T]) -> Result<Vec<T>> {
        self.exact.evaluate(lambda)
    }

    pub fn numerical(&self, lambda: &[T]) -> Result<Vec<T>> {
        let q = self.exact.evaluate(lambda)?;
        let b = self.bias_at(lambda)?;
        Ok(q.iter().zip(&b).map(|(&q, &b)| q - b).collect())
    }

    /// `Q_h + e_h`, exactly `Q` when the estimate quality is one.
    pub fn corrected(&self, lambda: &[T]) -> Result<Vec<T>> {
        let q = self.exact.evaluate(lambda)?;
        let b = self.bias_at(lambda)?;
        let miss = T::one() - self.quality;
        Ok(q.iter().zip(&b).map(|(&q, &b)| q - miss * b).collect())
    }

    pub fn error_estimate(&self, lambda: &[T]) -> Result<Vec<T>> {
        Ok(self.bias_at(lambda)?.into_iter().map(|b| self.quality * b).collect())
    }

    /// `e = Q - Q_h`.
    pub fn true_error(&self, lambda: &[T]) -> Result<Vec<T>> {
        let q = self.exact.evaluate(lambda)?;
        let h = self.numerical(lambda)?;
        Ok(q.iter().zip(&h).map(|(&q, &h)| q - h).collect())
    }

    pub fn evaluate_samples(&self, samples: &SampleSet<T>) -> Result<PerturbedValues<T>> {
        let exact = evaluate_samples(self.exact.as_ref(), samples)?;
        let m = exact.ncols();
        let biases: Vec<Vec<T>> = (0..samples.len())
            .into_par_iter()
            .map(|j| self.bias_at(samples.point(j)))
            .collect::<Result<_>>()?;
        let mut numerical = exact.clone();
        let mut estimate = Array2::zeros((samples.len(), m));
        let mut corrected = exact.clone();
        let miss = T::one() - self.quality;
        for (j, b) in biases.iter().enumerate() {
            for k in 0..m {
                numerical[[j, k]] = exact[[j, k]] - b[k];
                estimate[[j, k]] = self.quality * b[k];
                corrected[[j, k]] = exact[[j, k]] - miss * b[k];
            }
        }
        Ok(PerturbedValues { exact, numerical, estimate, corrected })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rank_deficient_weights_are_rejected() {
        assert!(matches!(
            linear_map(array![[1.0, 2.0], [2.0, 4.0]]),
            Err(Error::RankDeficient { rank: 1, required: 2 })
        ));
        assert!(linear_map(array![[0.0, 0.0]]).is_err());
        assert!(linear_map(array![[1.0], [1.0]]).is_err());
        assert_eq!(matrix_rank(&array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), 2);
    }

    #[test]
    fn linear_and_saddle_values() {
        let w = linear_map(array![[1.0, 1.0]]).unwrap();
        assert_eq!(w.evaluate(&[0.25, 0.5]).unwrap(), vec![0.75]);
        assert_eq!(QoiModel::<f64>::evaluate(&saddle_map(), &[0.0, 0.7]).unwrap(), vec![0.0]);
        assert_eq!(QoiModel::<f64>::evaluate(&saddle_map(), &[-0.5, 0.5]).unwrap(), vec![-0.25]);
    }

    #[test]
    fn perturbation_arithmetic() {
        let exact: Arc<dyn QoiModel<f64>> = Arc::new(linear_map(array![[1.0, 0.0]]).unwrap());
        let full = PerturbedModel::constant_bias(exact.clone(), vec![0.05], 1.0).unwrap();
        let none = PerturbedModel::constant_bias(exact.clone(), vec![0.0], 0.7).unwrap();
        let part = PerturbedModel::constant_bias(exact, vec![0.05], 0.8).unwrap();
        for x in [0.3, 0.55, 0.9] {
            let l = [x, 0.2];
            let q = full.exact(&l).unwrap()[0];
            let summed = full.numerical(&l).unwrap()[0] + full.error_estimate(&l).unwrap()[0];
            assert!((summed - q).abs() <= 2.0 * f64::EPSILON * q.abs());
            assert_eq!(full.corrected(&l).unwrap()[0], q);
            assert_eq!(none.numerical(&l).unwrap()[0], q);
            let resid = q - (part.numerical(&l).unwrap()[0] + part.error_estimate(&l).unwrap()[0]);
            assert!((resid.abs() - 0.01).abs() < 1e-15);
            assert!((q - part.corrected(&l).unwrap()[0] - 0.01).abs() < 1e-15);
        }
        assert!(perturb(Arc::new(saddle_map()) as Arc<dyn QoiModel<f64>>, |_| vec![0.0], 1.5).is_err());
    }
}
