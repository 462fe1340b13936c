//! Experiment configuration.
//!
//! A config is a TOML document. Indices written by users (QoI components,
//! marginal axes) are 1-based. Every random stage carries its own seed and
//! there are no defaults drawn from the clock.
//!
//! ```toml
//! [domain]
//! lower = [0.0, 0.0]
//! upper = [1.0, 1.0]
//! metric = "euclidean"        # or "one-norm"
//!
//! [sampling]
//! rule = "uniform"            # "latin-hypercube", "serpentine", "explicit"
//! seed = 7
//! count = 10000
//!
//! [model]
//! id = "linear"               # "saddle", "mseirs"
//! weights = [[1.0, 1.0]]
//! outputs = [1]               # optional subset of QoI components
//!
//! [model.perturbation]        # optional: Q_h = Q - bias, e_h = quality * bias
//! bias = [0.01]
//! quality = 0.9
//!
//! [density]
//! kind = "uniform-box"        # "explicit", "beta", "reference-beta"
//! support_lower = [0.25]
//! support_upper = [0.75]
//!
//! [density.partition]
//! kind = "uniform"            # or "from-samples"
//! lower = [0.0]
//! upper = [2.0]
//! bins = [20]
//!
//! [[events]]
//! name = "probe"
//! lower = [0.0, 0.0]
//! upper = [0.5, 0.5]
//!
//! [marginal]
//! pairs = [[1, 2]]            # axis indices, or parameter names for mseirs
//! resolution = [10, 10]
//!
//! [grid]
//! resolution = [10, 10]
//! budget = 1000
//! seed = 3
//!
//! [error]
//! mode = "counts"             # or "volumes"
//! n_emulated = 1000000
//! seed = 5
//! ```

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sip_core::qoi::mseirs;
use sip_core::{
    linear_map, mseirs_domain, saddle_map, DataPartition, EMode, Event, Metric, MseirsModel, ParameterDomain, QoiModel,
    SampleSet, SamplingRule, ScaledBeta,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required unless the model is `mseirs`, whose box is built in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    pub sampling: SamplingSpec,
    pub model: ModelSpec,
    pub density: DensitySpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<MarginalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub metric: MetricSpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricSpec {
    #[default]
    Euclidean,
    OneNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplingSpec {
    Uniform { seed: u64, count: usize },
    LatinHypercube { seed: u64, count: usize },
    Serpentine { resolution: Vec<usize> },
    Explicit { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    Linear,
    Saddle,
    Mseirs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: ModelId,
    /// Rows of the linear map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
    /// ODE tolerances for `mseirs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub bias: Vec<f64>,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Explicit {
        edges: Vec<Vec<f64>>,
        probabilities: Vec<f64>,
    },
    UniformBox {
        support_lower: Vec<f64>,
        support_upper: Vec<f64>,
        partition: PartitionSpec,
    },
    Beta {
        components: Vec<BetaSpec>,
        draws: usize,
        seed: u64,
        partition: PartitionSpec,
    },
    /// Beta bumps centred on a reference QoI, given directly or as the model
    /// output at reference parameters.
    ReferenceBeta {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_parameters: Option<Vec<f64>>,
        half_range: Vec<f64>,
        alpha: f64,
        beta: f64,
        draws: usize,
        seed: u64,
        partition: PartitionSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PartitionSpec {
    Uniform { lower: Vec<f64>, upper: Vec<f64>, bins: Vec<usize> },
    FromSamples { bins: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSpec {
    pub alpha: f64,
    pub beta: f64,
    pub loc: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub name: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalSpec {
    pub pairs: Vec<[Axis; 2]>,
    pub resolution: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub resolution: Vec<usize>,
    pub budget: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    #[default]
    Counts,
    Volumes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSpec {
    #[serde(default)]
    pub mode: ModeSpec,
    pub n_emulated: usize,
    pub seed: u64,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Keeps a subset of a model's outputs.
struct Selected {
    inner: Arc<dyn QoiModel<f64>>,
    outputs: Vec<usize>,
}

impl QoiModel<f64> for Selected {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    fn evaluate(&self, lambda: &[f64]) -> sip_core::Result<Vec<f64>> {
        let q = self.inner.evaluate(lambda)?;
        Ok(self.outputs.iter().map(|&k| q[k]).collect())
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| invalid(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let domain = self.domain()?;
        let n = domain.dim();
        let m = self.raw_output_dim()?;
        let out = self.output_indices(m)?;
        if let Some(p) = &self.model.perturbation {
            if p.bias.len() != out.len() {
                return Err(invalid(format!("perturbation bias has {} entries for {} outputs", p.bias.len(), out.len())));
            }
        }
        if let ModelSpec { id: ModelId::Linear, weights: Some(w), .. } = &self.model {
            if w.iter().any(|r| r.len() != n) {
                return Err(invalid(format!("linear weights must have {n} columns")));
            }
        }
        if matches!(self.model.id, ModelId::Saddle | ModelId::Mseirs) {
            let expected = if self.model.id == ModelId::Saddle { 2 } else { 15 };
            if n != expected {
                return Err(invalid(format!("model {:?} needs a {expected}-dimensional domain", self.model.id)));
            }
        }
        match &self.sampling {
            SamplingSpec::Serpentine { resolution } if resolution.len() != n => {
                return Err(invalid("serpentine resolution must match the domain dimension"));
            }
            SamplingSpec::Explicit { points } if points.iter().any(|p| p.len() != n) => {
                return Err(invalid("explicit points must match the domain dimension"));
            }
            _ => {}
        }
        let d_dim = self.density_dim();
        if d_dim != out.len() {
            return Err(invalid(format!("density has dimension {d_dim} but the model has {} outputs", out.len())));
        }
        if let Some(part) = self.partition() {
            let k = match part {
                PartitionSpec::Uniform { lower, upper, bins } if lower.len() == upper.len() => {
                    lower.len().max(bins.len())
                }
                PartitionSpec::Uniform { .. } => usize::MAX,
                PartitionSpec::FromSamples { bins } => bins.len(),
            };
            if k != d_dim {
                return Err(invalid(format!("density partition must have dimension {d_dim}")));
            }
        }
        if let DensitySpec::ReferenceBeta { reference, reference_parameters, .. } = &self.density {
            match (reference, reference_parameters) {
                (Some(r), None) if r.len() == d_dim => {}
                (None, Some(p)) if p.len() == n => {}
                _ => return Err(invalid("reference-beta needs either `reference` or `reference_parameters` of matching size")),
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for e in &self.events {
            if e.lower.len() != n || e.upper.len() != n {
                return Err(invalid(format!("event {} must have {n} bounds", e.name)));
            }
            if !names.insert(e.name.as_str()) {
                return Err(invalid(format!("event name {} is repeated", e.name)));
            }
        }
        if let Some(mg) = &self.marginal {
            for pair in &mg.pairs {
                self.axis_pair(pair, n)?;
            }
        }
        if let Some(g) = &self.grid {
            if g.resolution.len() != n {
                return Err(invalid("grid resolution must match the domain dimension"));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<ParameterDomain<f64>, CliError> {
        match (&self.domain, self.model.id) {
            (Some(d), _) => {
                let metric = match d.metric {
                    MetricSpec::Euclidean => Metric::Euclidean,
                    MetricSpec::OneNorm => Metric::OneNorm,
                };
                ParameterDomain::new(d.lower.clone(), d.upper.clone(), metric).map_err(|e| invalid(e.to_string()))
            }
            (None, ModelId::Mseirs) => Ok(mseirs_domain()),
            (None, _) => Err(invalid("missing [domain]")),
        }
    }

    pub fn sampling_seed(&self) -> Option<u64> {
        match self.sampling {
            SamplingSpec::Uniform { seed, .. } | SamplingSpec::LatinHypercube { seed, .. } => Some(seed),
            _ => None,
        }
    }

    pub fn density_seed(&self) -> Option<u64> {
        match self.density {
            DensitySpec::Beta { seed, .. } | DensitySpec::ReferenceBeta { seed, .. } => Some(seed),
            _ => None,
        }
    }

    pub fn samples(&self, domain: &ParameterDomain<f64>) -> Result<SampleSet<f64>, CliError> {
        let (rule, count) = match &self.sampling {
            SamplingSpec::Uniform { seed, count } => (SamplingRule::uniform(*seed), *count),
            SamplingSpec::LatinHypercube { seed, count } => (SamplingRule::latin_hypercube(*seed), *count),
            SamplingSpec::Serpentine { resolution } => {
                (SamplingRule::serpentine(resolution.clone()), resolution.iter().product())
            }
            SamplingSpec::Explicit { points } => return Ok(SampleSet::from_rows(domain, points)?),
        };
        Ok(sip_core::generate(&rule, domain, count)?)
    }

    fn raw_output_dim(&self) -> Result<usize, CliError> {
        match self.model.id {
            ModelId::Linear => match &self.model.weights {
                Some(w) if !w.is_empty() => Ok(w.len()),
                _ => Err(invalid("linear model needs `weights`")),
            },
            ModelId::Saddle => Ok(1),
            ModelId::Mseirs => Ok(2),
        }
    }

    fn output_indices(&self, m: usize) -> Result<Vec<usize>, CliError> {
        match &self.model.outputs {
            None => Ok((0..m).collect()),
            Some(o) if !o.is_empty() && o.iter().all(|&k| (1..=m).contains(&k)) => Ok(o.iter().map(|k| k - 1).collect()),
            Some(_) => Err(invalid(format!("model outputs must be 1-based indices up to {m}"))),
        }
    }

    /// The exact map restricted to the configured outputs.
    pub fn exact_model(&self) -> Result<Arc<dyn QoiModel<f64>>, CliError> {
        let base: Arc<dyn QoiModel<f64>> = match self.model.id {
            ModelId::Linear => {
                let rows = self.model.weights.clone().unwrap_or_default();
                let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                let w = ndarray::Array2::from_shape_vec((r, c), flat).map_err(|e| invalid(e.to_string()))?;
                Arc::new(linear_map(w)?)
            }
            ModelId::Saddle => Arc::new(saddle_map()),
            ModelId::Mseirs => {
                let mut m = MseirsModel::default();
                m.rel_tol = self.model.rel_tol.unwrap_or(m.rel_tol);
                m.abs_tol = self.model.abs_tol.unwrap_or(m.abs_tol);
                Arc::new(m)
            }
        };
        let m = base.output_dim();
        let outputs = self.output_indices(m)?;
        if outputs == (0..m).collect::<Vec<_>>() {
            return Ok(base);
        }
        Ok(Arc::new(Selected { inner: base, outputs }))
    }

    pub fn density_dim(&self) -> usize {
        match &self.density {
            DensitySpec::Explicit { edges, .. } => edges.len(),
            DensitySpec::UniformBox { support_lower, .. } => support_lower.len(),
            DensitySpec::Beta { components, .. } => components.len(),
            DensitySpec::ReferenceBeta { half_range, .. } => half_range.len(),
        }
    }

    pub fn partition(&self) -> Option<&PartitionSpec> {
        match &self.density {
            DensitySpec::Explicit { .. } => None,
            DensitySpec::UniformBox { partition, .. }
            | DensitySpec::Beta { partition, .. }
            | DensitySpec::ReferenceBeta { partition, .. } => Some(partition),
        }
    }

    pub fn events(&self) -> Result<Vec<(String, Event<f64>)>, CliError> {
        self.events
            .iter()
            .map(|e| Ok((e.name.clone(), Event::boxed(e.lower.clone(), e.upper.clone())?)))
            .collect()
    }

    /// Zero-based axes of a marginal pair.
    pub fn axis_pair(&self, pair: &[Axis; 2], n: usize) -> Result<(usize, usize), CliError> {
        let one = |a: &Axis| -> Result<usize, CliError> {
            match a {
                Axis::Index(k) if (1..=n).contains(k) => Ok(k - 1),
                Axis::Index(k) => Err(invalid(format!("marginal axis {k} is outside 1..={n}"))),
                Axis::Name(s) if self.model.id == ModelId::Mseirs => {
                    mseirs::parameter_index(s).ok_or_else(|| invalid(format!("unknown parameter {s}")))
                }
                Axis::Name(s) => Err(invalid(format!("named axis {s} needs the mseirs model"))),
            }
        };
        let (a, b) = (one(&pair[0])?, one(&pair[1])?);
        if a == b {
            return Err(invalid("marginal axes must differ"));
        }
        Ok((a, b))
    }

    pub fn error_mode(&self) -> Option<EMode> {
        self.error.as_ref().map(|e| match e.mode {
            ModeSpec::Counts => EMode::Counts,
            ModeSpec::Volumes => EMode::Volumes,
        })
    }
}

impl PartitionSpec {
    pub fn build(&self, values: &ndarray::Array2<f64>) -> Result<DataPartition<f64>, CliError> {
        Ok(match self {
            PartitionSpec::Uniform { lower, upper, bins } => DataPartition::uniform(lower, upper, bins)?,
            PartitionSpec::FromSamples { bins } => DataPartition::from_samples(values, bins)?,
        })
    }
}

impl BetaSpec {
    pub fn build(&self) -> Result<ScaledBeta<f64>, CliError> {
        Ok(ScaledBeta::new(self.alpha, self.beta, self.loc, self.scale)?)
    }
}
