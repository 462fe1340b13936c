//! Counting-measure solutions of stochastic inverse problems.
//!
//! Parameters are sampled on a box, a QoI map is evaluated at the samples and
//! an output density given as a simple function is pulled back onto the
//! implicit Voronoi cells of the samples. Error analysis bounds the
//! finite-sampling error and estimates the error caused by an inexact map.

// `!(x > 0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod error_analysis;
pub mod geometry;
pub mod inverse;
pub mod io;
pub mod qoi;
pub mod rng;
pub mod sampling;
pub mod scalar;

pub use density::{
    beta_for_reference, bin_to_simple_function, sample_density, BinnedDensity, DataPartition, ScaledBeta,
    SimpleFunctionDensity,
};
pub use error::{Error, ErrorClass, Result};
pub use error_analysis::{
    build_sandwich, error_report, improved_invert, optimal_coverage, separating_density, term1_bounds,
    term2_estimate, term2_from_values, EMode, ErrorReport, RegionSandwich, ReportOptions, Term1, Term2,
};
pub use geometry::{
    coverage_symmetric_difference, estimate_adjacency, estimate_cell_volumes, max_cell_radius, nearest_sample,
    voronoi_coverage, Adjacency, BoxRegion, Emulation, Event, Metric, ParameterDomain, RuleTag, SampleSet,
    VolumeEstimate,
};
pub use inverse::{
    assign_bins, event_probability, marginalize, solve_counting, solve_grid, AnsatzWeights, CountingMeasure,
    GridMeasure, MarginalTable,
};
pub use qoi::mseirs::{mseirs_domain, MseirsModel};
pub use qoi::{evaluate_samples, linear_map, perturb, saddle_map, FnModel, PerturbedModel, QoiModel};
pub use sampling::{effective_weights, generate, SamplingDensity, SamplingRule};
pub use scalar::Real;

pub type ParameterDomainF64 = ParameterDomain<f64>;
pub type SampleSetF64 = SampleSet<f64>;
pub type EventF64 = Event<f64>;
pub type SimpleFunctionDensityF64 = SimpleFunctionDensity<f64>;
pub type DataPartitionF64 = DataPartition<f64>;
pub type CountingMeasureF64<'s> = CountingMeasure<'s, f64>;
pub type PerturbedModelF64 = PerturbedModel<f64>;
pub type ErrorReportF64 = ErrorReport<f64>;

pub type ParameterDomainF32 = ParameterDomain<f32>;
pub type SampleSetF32 = SampleSet<f32>;
pub type SimpleFunctionDensityF32 = SimpleFunctionDensity<f32>;
pub type CountingMeasureF32<'s> = CountingMeasure<'s, f32>;
