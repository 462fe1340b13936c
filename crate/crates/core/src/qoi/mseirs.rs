//! Maternal-immunity epidemic model (M, S, E, I, R) with 15 uncertain inputs.
//!
//! Time is in weeks and populations in millions. The parameter vector is
//! ordered as [`PARAMETER_NAMES`].

use crate::error::{Error, Result};
use crate::geometry::{Metric, ParameterDomain};
use crate::qoi::ode::{integrate_dopri45, OdeSolution};
use crate::qoi::QoiModel;
use crate::scalar::Real;

pub const PARAMETER_NAMES: [&str; 15] = [
    "B", "delta", "mu_M", "beta", "mu_G", "epsilon", "mu_I", "gamma", "f", "iota", "M0", "S0", "E0", "I0",
    "R0",
];

pub const LOWER: [f64; 15] = [
    2.72e-4, 1.0 / 12.0, 4e-3, 1.92e-3, 2.4e-4, 0.571, 4.81e-6, 0.7, 0.125, 0.015, 2.5, 260.0, 0.01, 0.1, 10.0,
];

pub const UPPER: [f64; 15] = [
    3.04e-4, 0.25, 6e-3, 3.85e-3, 2.72e-4, 1.0, 2.11e-5, 2.33, 0.25, 0.0375, 3.5, 275.0, 0.5, 4.0, 20.0,
];

pub const REFERENCE: [f64; 15] = [
    3.02e-4, 0.16, 4.5e-3, 3.4e-3, 2.52e-4, 0.7, 1.75e-5, 0.8, 0.18, 0.026, 3.25, 270.0, 0.425, 3.8, 13.0,
];

pub const FINAL_TIME: f64 = 6.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Position of a named parameter in the 15-vector.
pub fn parameter_index(name: &str) -> Option<usize> {
    PARAMETER_NAMES.iter().position(|&n| n == name)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseirsParameters<T> {
    pub birth: T,
    pub delta: T,
    pub mu_m: T,
    pub beta: T,
    pub mu_g: T,
    /// Rate of the E → I flow.
    pub epsilon: T,
    pub mu_i: T,
    /// Rate of the I → R flow.
    pub gamma: T,
    pub f: T,
    pub iota: T,
    pub m0: T,
    pub s0: T,
    pub e0: T,
    pub i0: T,
    pub r0: T,
}

impl<T: Real> MseirsParameters<T> {
    pub fn from_slice(v: &[T]) -> Result<Self> {
        if v.len() != 15 {
            return Err(Error::DimensionMismatch { expected: 15, got: v.len() });
        }
        Ok(Self {
            birth: v[0],
            delta: v[1],
            mu_m: v[2],
            beta: v[3],
            mu_g: v[4],
            epsilon: v[5],
            mu_i: v[6],
            gamma: v[7],
            f: v[8],
            iota: v[9],
            m0: v[10],
            s0: v[11],
            e0: v[12],
            i0: v[13],
            r0: v[14],
        })
    }

    pub fn reference() -> Self {
        let v: Vec<T> = REFERENCE.iter().map(|&x| T::lit(x)).collect();
        Self::from_slice(&v).expect("15 entries")
    }

    pub fn initial_state(&self) -> [T; 5] {
        [self.m0, self.s0, self.e0, self.i0, self.r0]
    }
}

/// The tabulated box of uncertain parameters and initial conditions.
pub fn mseirs_domain<T: Real>() -> ParameterDomain<T> {
    ParameterDomain::new(
        LOWER.iter().map(|&x| T::lit(x)).collect(),
        UPPER.iter().map(|&x| T::lit(x)).collect(),
        Metric::Euclidean,
    )
    .expect("table bounds are valid")
}

/// Time derivative of `(M, S, E, I, R)`.
pub fn mseirs_rhs<T: Real>(state: &[T], p: &MseirsParameters<T>) -> [T; 5] {
    let [m, s, e, i, r] = [state[0], state[1], state[2], state[3], state[4]];
    let infection = p.beta * s * i;
    [
        p.birth * (s + e + i + r) - (p.delta + p.mu_m) * m,
        p.delta * m - infection - (p.mu_g + p.iota) * s + p.f * r,
        infection - (p.epsilon + p.mu_g) * e,
        p.epsilon * e - (p.gamma + p.mu_i + p.mu_g) * i,
        p.gamma * i - (p.mu_g + p.f) * r + p.iota * s,
    ]
}

pub fn solve_mseirs<T: Real>(p: &MseirsParameters<T>, final_time: T, rel_tol: T, abs_tol: T) -> Result<OdeSolution<T>> {
    integrate_dopri45(
        |_t, y: &[T], dy: &mut [T]| dy.copy_from_slice(&mseirs_rhs(y, p)),
        &p.initial_state(),
        T::zero(),
        final_time,
        rel_tol,
        abs_tol,
    )
}

/// `(M(6), I(6))` for a parameter vector.
pub fn mseirs_qoi<T: Real>(params: &[T], rel_tol: T, abs_tol: T) -> Result<[T; 2]> {
    let p = MseirsParameters::from_slice(params)?;
    let sol = solve_mseirs(&p, T::lit(FINAL_TIME), rel_tol, abs_tol)?;
    Ok([sol.final_state[0], sol.final_state[3]])
}

/// The epidemic model as a 15 → 2 map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseirsModel<T> {
    pub rel_tol: T,
    pub abs_tol: T,
}

impl<T: Real> Default for MseirsModel<T> {
    fn default() -> Self {
        Self { rel_tol: T::lit(DEFAULT_TOLERANCE), abs_tol: T::lit(DEFAULT_TOLERANCE) }
    }
}

impl<T: Real> QoiModel<T> for MseirsModel<T> {
    fn input_dim(&self) -> usize {
        15
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn evaluate(&self, lambda: &[T]) -> Result<Vec<T>> {
        mseirs_qoi(lambda, self.rel_tol, self.abs_tol).map(|q| q.to_vec())
    }
}
