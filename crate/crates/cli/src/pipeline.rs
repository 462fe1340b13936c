//! Subcommands. Each run rebuilds its inputs from the config, so an artifact
//! depends only on the config text and never on earlier runs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};
use sip_core::io::{self, fmt_real, Metadata};
use sip_core::qoi::mseirs;
use sip_core::{
    beta_for_reference, bin_to_simple_function, error_report, estimate_cell_volumes, evaluate_samples, event_probability,
    marginalize, sample_density, solve_counting, solve_grid, voronoi_coverage, CountingMeasure, DataPartition, EMode,
    ParameterDomain, PerturbedModel, QoiModel, ReportOptions, SampleSet, SimpleFunctionDensity,
};

use crate::config::{DensitySpec, ExperimentConfig, ModelId, PartitionSpec};
use crate::error::CliError;

pub const WARNINGS_FILE: &str = "warnings.txt";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvertFlags {
    pub grid: bool,
    pub volumes: bool,
    pub correct: bool,
    pub renormalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sample,
    Evaluate,
    Density,
    Invert(InvertFlags),
    Query(InvertFlags),
    Marginal(InvertFlags),
    ErrorReport,
    MseirsRepro,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Evaluate => "evaluate",
            Command::Density => "density",
            Command::Invert(_) => "invert",
            Command::Query(_) => "query",
            Command::Marginal(_) => "marginal",
            Command::ErrorReport => "error-report",
            Command::MseirsRepro => "mseirs-repro",
        }
    }
}

/// Hex SHA-256 of the canonical serialization of `config`.
pub fn config_hash(config: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml().as_bytes()))
}

/// Runs `command` and writes its artifacts plus `warnings.txt` into `out`.
pub fn run(command: Command, config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    fs::create_dir_all(out)?;
    let mut run = Run::new(&config, command, out);
    let result = run.dispatch();
    let mut w = BufWriter::new(File::create(out.join(WARNINGS_FILE))?);
    for line in &run.warnings {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    result
}

type Marginal = ((usize, usize), sip_core::MarginalTable<f64>);

struct Values {
    numerical: Array2<f64>,
    estimate: Option<Array2<f64>>,
    corrected: Option<Array2<f64>>,
}

/// The numerical map `Q_h`, or `Q_h + e_h` when correcting.
struct Surrogate {
    model: PerturbedModel<f64>,
    correct: bool,
}

impl QoiModel<f64> for Surrogate {
    fn input_dim(&self) -> usize {
        self.model.exact_model().input_dim()
    }

    fn output_dim(&self) -> usize {
        self.model.exact_model().output_dim()
    }

    fn evaluate(&self, lambda: &[f64]) -> sip_core::Result<Vec<f64>> {
        if self.correct {
            self.model.corrected(lambda)
        } else {
            self.model.numerical(lambda)
        }
    }
}

struct Run<'c> {
    config: &'c ExperimentConfig,
    command: Command,
    out: PathBuf,
    meta: Metadata,
    warnings: Vec<String>,
}

impl<'c> Run<'c> {
    fn new(config: &'c ExperimentConfig, command: Command, out: &Path) -> Self {
        let mut meta = Metadata::new()
            .with("tool", "sip")
            .with("version", env!("CARGO_PKG_VERSION"))
            .with("command", command.name())
            .with("config_sha256", config_hash(config));
        if let Some(s) = config.sampling_seed() {
            meta = meta.with("sampling_seed", s);
        }
        if let Some(s) = config.density_seed() {
            meta = meta.with("density_seed", s);
        }
        if let Some(g) = &config.grid {
            meta = meta.with("grid_seed", g.seed);
        }
        if let Some(e) = &config.error {
            meta = meta.with("emulation_seed", e.seed);
        }
        Self { config, command, out: out.to_path_buf(), meta, warnings: Vec::new() }
    }

    fn dispatch(&mut self) -> Result<(), CliError> {
        match self.command {
            Command::Sample => self.sample(),
            Command::Evaluate => self.evaluate(),
            Command::Density => self.density_only(),
            Command::Invert(flags) => self.invert(flags),
            Command::Query(flags) => self.query(flags),
            Command::Marginal(flags) => self.marginal(flags),
            Command::ErrorReport => self.error_reports(),
            Command::MseirsRepro => self.mseirs_repro(),
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn samples(&self, domain: &ParameterDomain<f64>) -> Result<SampleSet<f64>, CliError> {
        self.config.samples(domain)
    }

    fn values(&self, samples: &SampleSet<f64>) -> Result<Values, CliError> {
        let exact = self.config.exact_model()?;
        match &self.config.model.perturbation {
            Some(p) => {
                let model = PerturbedModel::constant_bias(exact, p.bias.clone(), p.quality)?;
                let v = model.evaluate_samples(samples)?;
                Ok(Values { numerical: v.numerical, estimate: Some(v.estimate), corrected: Some(v.corrected) })
            }
            None => Ok(Values { numerical: evaluate_samples(exact.as_ref(), samples)?, estimate: None, corrected: None }),
        }
    }

    fn density(&mut self, numerical: &Array2<f64>) -> Result<SimpleFunctionDensity<f64>, CliError> {
        match &self.config.density {
            DensitySpec::Explicit { edges, probabilities } => {
                Ok(SimpleFunctionDensity::new(DataPartition::new(edges.clone())?, probabilities.clone())?)
            }
            DensitySpec::UniformBox { support_lower, support_upper, partition } => {
                Ok(SimpleFunctionDensity::uniform_on_box(partition.build(numerical)?, support_lower, support_upper)?)
            }
            DensitySpec::Beta { components, draws, seed, partition } => {
                let factors = components.iter().map(|c| c.build()).collect::<Result<Vec<_>, _>>()?;
                self.binned(&factors, *draws, *seed, partition, numerical)
            }
            DensitySpec::ReferenceBeta { reference, reference_parameters, half_range, alpha, beta, draws, seed, partition } => {
                let centre = match (reference, reference_parameters) {
                    (Some(r), _) => r.clone(),
                    (None, Some(p)) => self.config.exact_model()?.evaluate(p)?,
                    (None, None) => return Err(CliError::Config("reference-beta needs a reference".into())),
                };
                let factors = centre
                    .iter()
                    .zip(half_range)
                    .map(|(&c, &h)| beta_for_reference(c, h, *alpha, *beta))
                    .collect::<sip_core::Result<Vec<_>>>()?;
                self.binned(&factors, *draws, *seed, partition, numerical)
            }
        }
    }

    fn binned(
        &mut self,
        factors: &[sip_core::ScaledBeta<f64>],
        draws: usize,
        seed: u64,
        partition: &PartitionSpec,
        numerical: &Array2<f64>,
    ) -> Result<SimpleFunctionDensity<f64>, CliError> {
        let x = sample_density(factors, draws, seed)?;
        let b = bin_to_simple_function(&x, &partition.build(numerical)?)?;
        if b.outside_count > 0 {
            self.warnings.push(format!(
                "outside_mass: {} of {draws} density draws ({}) fall outside the partition",
                b.outside_count,
                fmt_real(b.outside_fraction)
            ));
        }
        Ok(b.density)
    }

    fn needs_values_for_density(&self) -> bool {
        matches!(self.config.partition(), Some(PartitionSpec::FromSamples { .. }))
    }

    fn counting<'s>(
        &mut self,
        domain: &ParameterDomain<f64>,
        samples: &'s SampleSet<f64>,
        values: &Values,
        density: &SimpleFunctionDensity<f64>,
        flags: InvertFlags,
    ) -> Result<CountingMeasure<'s, f64>, CliError> {
        let q = if flags.correct {
            values.corrected.as_ref().ok_or_else(|| CliError::Config("--correct needs [model.perturbation]".into()))?
        } else {
            &values.numerical
        };
        let weights = if flags.volumes {
            let e = self.config.error.as_ref().ok_or_else(|| CliError::Config("--volumes needs [error]".into()))?;
            let v = estimate_cell_volumes(domain, samples, e.n_emulated, e.seed)?;
            Some(v.iter().map(|v| v.value).collect::<Vec<_>>())
        } else {
            None
        };
        let m = solve_counting(samples, q, density, weights.as_deref(), None)?;
        if m.lost_mass() > 0.0 {
            let bins: Vec<String> = m.empty_bins().iter().map(|i| (i + 1).to_string()).collect();
            self.warnings.push(format!(
                "lost_mass: {} on supported bins without samples [{}]",
                fmt_real(m.lost_mass()),
                bins.join(" ")
            ));
        }
        Ok(if flags.renormalize { m.renormalized() } else { m })
    }

    fn flag_meta(&self, flags: InvertFlags) -> Metadata {
        let mut meta = self.meta.clone();
        for (name, on) in [("volumes", flags.volumes), ("correct", flags.correct), ("renormalize", flags.renormalize)] {
            if on {
                meta = meta.with(name, true);
            }
        }
        meta
    }

    fn sample(&mut self) -> Result<(), CliError> {
        let d = self.config.domain()?;
        let s = self.samples(&d)?;
        let meta = self.meta.clone().with("rule", s.rule().as_str()).with("seed", s.seed());
        io::write_samples(self.create("samples.csv")?, &s, &meta)?;
        Ok(())
    }

    fn evaluate(&mut self) -> Result<(), CliError> {
        let d = self.config.domain()?;
        let s = self.samples(&d)?;
        let v = self.values(&s)?;
        io::write_qoi(self.create("qoi.csv")?, &v.numerical, v.estimate.as_ref(), &self.meta)?;
        Ok(())
    }

    fn density_only(&mut self) -> Result<(), CliError> {
        let numerical = if self.needs_values_for_density() {
            let d = self.config.domain()?;
            let s = self.samples(&d)?;
            self.values(&s)?.numerical
        } else {
            Array2::zeros((0, self.config.density_dim()))
        };
        let rho = self.density(&numerical)?;
        io::write_density(self.create("density.csv")?, &rho, &self.meta)?;
        Ok(())
    }

    fn invert(&mut self, flags: InvertFlags) -> Result<(), CliError> {
        let d = self.config.domain()?;
        if flags.grid {
            if flags.volumes || flags.renormalize {
                return Err(CliError::Config("--grid cannot be combined with --volumes or --renormalize".into()));
            }
            return self.invert_grid(&d, flags.correct);
        }
        let s = self.samples(&d)?;
        let v = self.values(&s)?;
        let rho = self.density(&v.numerical)?;
        let m = self.counting(&d, &s, &v, &rho, flags)?;
        let meta = self.flag_meta(flags).with("lost_mass", fmt_real(m.lost_mass()));
        io::write_measure(self.create("measure.csv")?, &m, &meta)?;
        Ok(())
    }

    fn invert_grid(&mut self, d: &ParameterDomain<f64>, correct: bool) -> Result<(), CliError> {
        let g = self.config.grid.clone().ok_or_else(|| CliError::Config("--grid needs [grid]".into()))?;
        let exact = self.config.exact_model()?;
        let surrogate;
        let model: &dyn QoiModel<f64> = match &self.config.model.perturbation {
            Some(p) => {
                let model = PerturbedModel::constant_bias(exact.clone(), p.bias.clone(), p.quality)?;
                surrogate = Surrogate { model, correct };
                &surrogate
            }
            None if correct => return Err(CliError::Config("--correct needs [model.perturbation]".into())),
            None => exact.as_ref(),
        };
        let numerical = if self.needs_values_for_density() {
            let s = self.samples(d)?;
            self.values(&s)?.numerical
        } else {
            Array2::zeros((0, self.config.density_dim()))
        };
        let rho = self.density(&numerical)?;
        let gm = solve_grid(d, &g.resolution, model, &rho, g.budget, g.seed)?;
        if gm.lost_mass > 0.0 {
            self.warnings.push(format!("lost_mass: {} on supported bins no grid point reached", fmt_real(gm.lost_mass)));
        }
        let mut meta = self.meta.clone().with("budget", g.budget).with("lost_mass", fmt_real(gm.lost_mass));
        if correct {
            meta = meta.with("correct", true);
        }
        io::write_grid_measure(self.create("grid_measure.csv")?, &gm, &meta)?;
        Ok(())
    }

    fn query(&mut self, flags: InvertFlags) -> Result<(), CliError> {
        if flags.grid {
            return Err(CliError::Config("query works on counting measures; drop --grid".into()));
        }
        let events = self.config.events()?;
        if events.is_empty() {
            return Err(CliError::Config("query needs at least one [[events]] entry".into()));
        }
        let d = self.config.domain()?;
        let s = self.samples(&d)?;
        let v = self.values(&s)?;
        let rho = self.density(&v.numerical)?;
        let m = self.counting(&d, &s, &v, &rho, flags)?;
        self.write_events(&d, &s, &m, &events, "events.csv", self.flag_meta(flags))
    }

    fn write_events(
        &self,
        d: &ParameterDomain<f64>,
        s: &SampleSet<f64>,
        m: &CountingMeasure<'_, f64>,
        events: &[(String, sip_core::Event<f64>)],
        file: &str,
        meta: Metadata,
    ) -> Result<(), CliError> {
        let rows = events
            .iter()
            .map(|(name, e)| Ok((name.clone(), event_probability(m, d, e)?, voronoi_coverage(d, s, e)?.len())))
            .collect::<Result<Vec<_>, CliError>>()?;
        io::write_event_probabilities(self.create(file)?, &rows, &meta)?;
        Ok(())
    }

    fn marginal(&mut self, flags: InvertFlags) -> Result<(), CliError> {
        if flags.grid {
            return Err(CliError::Config("marginal works on counting measures; drop --grid".into()));
        }
        let d = self.config.domain()?;
        let s = self.samples(&d)?;
        let v = self.values(&s)?;
        let rho = self.density(&v.numerical)?;
        let m = self.counting(&d, &s, &v, &rho, flags)?;
        self.write_marginals(&d, &m, self.flag_meta(flags)).map(|_| ())
    }

    fn write_marginals(
        &self,
        d: &ParameterDomain<f64>,
        m: &CountingMeasure<'_, f64>,
        meta: Metadata,
    ) -> Result<Vec<Marginal>, CliError> {
        let spec = self.config.marginal.as_ref().ok_or_else(|| CliError::Config("missing [marginal]".into()))?;
        let mut tables = Vec::new();
        for pair in &spec.pairs {
            let axes = self.config.axis_pair(pair, d.dim())?;
            let t = marginalize(m, d, axes, (spec.resolution[0], spec.resolution[1]))?;
            let name = format!("marginal_{}_{}.csv", axes.0 + 1, axes.1 + 1);
            let meta = meta.clone().with("row_axis", axes.0 + 1).with("col_axis", axes.1 + 1);
            io::write_marginal(self.create(&name)?, &t, &meta)?;
            tables.push((axes, t));
        }
        Ok(tables)
    }

    fn error_reports(&mut self) -> Result<(), CliError> {
        let e = self.config.error.clone().ok_or_else(|| CliError::Config("error-report needs [error]".into()))?;
        let events = self.config.events()?;
        if events.is_empty() {
            return Err(CliError::Config("error-report needs at least one [[events]] entry".into()));
        }
        let d = self.config.domain()?;
        let s = self.samples(&d)?;
        let v = self.values(&s)?;
        let rho = self.density(&v.numerical)?;
        let options = ReportOptions { mode: self.config.error_mode().unwrap_or(EMode::Counts), n_emulated: e.n_emulated, seed: e.seed };
        for (name, event) in &events {
            let r = error_report(&d, &s, &v.numerical, v.estimate.as_ref(), &rho, event, options)?;
            let flagged = r.term2.as_ref().map_or(0, |t| t.flagged_bins().len());
            if flagged > 0 {
                self.warnings.push(format!("term2: {flagged} bins of event {name} have no samples and were skipped"));
            }
            let meta = self.meta.clone().with("event", name);
            io::write_error_report(self.create(&format!("error_{name}.csv"))?, &r, &meta)?;
        }
        Ok(())
    }

    fn mseirs_repro(&mut self) -> Result<(), CliError> {
        if self.config.model.id != ModelId::Mseirs {
            return Err(CliError::Config("mseirs-repro needs model id = \"mseirs\"".into()));
        }
        let d = self.config.domain()?;
        let s = self.samples(&d)?;
        let v = self.values(&s)?;
        let rho = self.density(&v.numerical)?;
        let m = self.counting(&d, &s, &v, &rho, InvertFlags::default())?;
        let meta = self.meta.clone().with("seed", s.seed());
        io::write_samples(self.create("samples.csv")?, &s, &meta)?;
        io::write_qoi(self.create("qoi.csv")?, &v.numerical, v.estimate.as_ref(), &self.meta)?;
        io::write_density(self.create("density.csv")?, &rho, &self.meta)?;
        io::write_measure(self.create("measure.csv")?, &m, &self.meta.clone().with("lost_mass", fmt_real(m.lost_mass())))?;
        let tables = self.write_marginals(&d, &m, self.meta.clone())?;
        let events = self.config.events()?;
        if !events.is_empty() {
            self.write_events(&d, &s, &m, &events, "events.csv", self.meta.clone())?;
        }

        let mut w = self.create("summary.csv")?;
        for (k, v) in &self.meta.entries {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "row_axis,col_axis,variance,reference_prob,uniform_baseline")?;
        for ((a, b), t) in &tables {
            let reference = t.cell_of(mseirs::REFERENCE[*a], mseirs::REFERENCE[*b]).map_or(0.0, |c| t.prob[c]);
            writeln!(
                w,
                "{},{},{},{},{}",
                a + 1,
                b + 1,
                fmt_real(t.variance()),
                fmt_real(reference),
                fmt_real(1.0 / t.prob.len() as f64)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}
