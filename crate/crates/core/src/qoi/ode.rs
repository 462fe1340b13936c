//! Explicit Dormand–Prince 5(4) integration.

use crate::error::{Error, Result};
use crate::scalar::Real;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MIN_STEP_FRACTION: f64 = 1e-12;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution<T> {
    pub final_state: Vec<T>,
    pub steps_taken: usize,
    pub rejected_steps: usize,
    /// Largest normalized error norm among accepted steps (≤ 1).
    pub max_local_error: T,
    /// Componentwise minimum over the accepted step endpoints.
    pub min_state: Vec<T>,
}

struct Stages<T> {
    k: [Vec<T>; 7],
    tmp: Vec<T>,
}

impl<T: Real> Stages<T> {
    fn new(n: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![T::zero(); n]), tmp: vec![T::zero(); n] }
    }

    /// Stages 2..7 from `k[0] = f(t, y)`; writes the fifth-order solution to `y_new`.
    /// On return `k[6] = f(t + h, y_new)`.
    fn step<F>(&mut self, rhs: &mut F, t: T, y: &[T], h: T, y_new: &mut [T])
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        for s in 1..7 {
            for (i, out) in self.tmp.iter_mut().enumerate() {
                let incr = (0..s).fold(T::zero(), |acc, r| acc + T::lit(A[s][r]) * self.k[r][i]);
                *out = y[i] + h * incr;
            }
            rhs(t + T::lit(C[s]) * h, &self.tmp, &mut self.k[s]);
        }
        // Row 7 of A holds the fifth-order weights, so the last stage input is y_new.
        y_new.copy_from_slice(&self.tmp);
    }

    fn error_norm(&self, y: &[T], y_new: &[T], h: T, rel_tol: T, abs_tol: T) -> T {
        (0..y.len()).fold(T::zero(), |m, i| {
            let err = h * (0..7).fold(T::zero(), |acc, s| acc + T::lit(E[s]) * self.k[s][i]);
            let scale = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
            let r = (err / scale).abs();
            if r.is_nan() || m.is_nan() {
                T::nan()
            } else {
                m.max(r)
            }
        })
    }
}

/// Adaptive Dormand–Prince integration of `y' = rhs(t, y)` from `t0` to `tf`.
///
/// A step is accepted when every component's local error estimate is at most
/// `abs_tol + rel_tol * |y|`. The step-size factor is `0.9 * err^(-1/5)`
/// clamped to `[0.2, 5]`; the first attempt spans the whole interval.
pub fn integrate_dopri45<T, F>(mut rhs: F, y0: &[T], t0: T, tf: T, rel_tol: T, abs_tol: T) -> Result<OdeSolution<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    if !(rel_tol > T::zero() && abs_tol > T::zero()) {
        return Err(Error::arg("tolerances must be positive"));
    }
    if !(tf > t0) {
        return Err(Error::arg("final time must exceed initial time"));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t: t0.as_f64() });
    }
    let n = y0.len();
    let span = tf - t0;
    let h_min = T::lit(MIN_STEP_FRACTION) * span;
    let mut st = Stages::new(n);
    let mut y = y0.to_vec();
    let mut y_new = vec![T::zero(); n];
    let mut t = t0;
    let mut h = span;
    let mut min_state = y.clone();
    let (mut steps, mut rejected) = (0usize, 0usize);
    let mut max_err = T::zero();
    rhs(t, &y, &mut st.k[0]);

    while t < tf {
        if tf - t < h {
            h = tf - t;
        }
        st.step(&mut rhs, t, &y, h, &mut y_new);
        let err = st.error_norm(&y, &y_new, h, rel_tol, abs_tol);
        if err.is_finite() && err <= T::one() {
            if y_new.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { t: (t + h).as_f64() });
            }
            t = if tf - t == h { tf } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            let (first, last) = st.k.split_at_mut(6);
            first[0].copy_from_slice(&last[0]);
            for (m, v) in min_state.iter_mut().zip(&y) {
                *m = m.min(*v);
            }
            steps += 1;
            max_err = max_err.max(err);
            h = h * growth_factor(err, T::lit(MAX_FACTOR));
        } else {
            rejected += 1;
            let factor = if err.is_finite() { growth_factor(err, T::one()) } else { T::lit(MIN_FACTOR) };
            h = h * factor;
            if h < h_min {
                return Err(Error::StepUnderflow { t: t.as_f64(), h: h.as_f64() });
            }
        }
    }
    Ok(OdeSolution { final_state: y, steps_taken: steps, rejected_steps: rejected, max_local_error: max_err, min_state })
}

fn growth_factor<T: Real>(err: T, cap: T) -> T {
    if err == T::zero() {
        return cap;
    }
    (T::lit(SAFETY) * err.powf(T::lit(-0.2))).max(T::lit(MIN_FACTOR)).min(cap)
}

/// Fifth-order Dormand–Prince solution with `steps` equal steps.
pub fn integrate_fixed_dopri5<T, F>(mut rhs: F, y0: &[T], t0: T, tf: T, steps: usize) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    if steps == 0 || !(tf > t0) {
        return Err(Error::arg("need a positive step count and tf > t0"));
    }
    let h = (tf - t0) / T::from_count(steps);
    let mut st = Stages::new(y0.len());
    let mut y = y0.to_vec();
    let mut y_new = y.clone();
    for s in 0..steps {
        let t = t0 + T::from_count(s) * h;
        rhs(t, &y, &mut st.k[0]);
        st.step(&mut rhs, t, &y, h, &mut y_new);
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t: (t + h).as_f64() });
        }
        std::mem::swap(&mut y, &mut y_new);
    }
    Ok(y)
}
