//! CSV tables.
//!
//! Every table may start with `# key=value` metadata lines. Reals are written
//! with 17 significant digits so they read back to the same bits. Sample and
//! bin indices are 1-based; a bin index of 0 means outside the partition.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::density::{DataPartition, SimpleFunctionDensity};
use crate::error::{Error, Result};
use crate::error_analysis::ErrorReport;
use crate::geometry::{ParameterDomain, RuleTag, SampleSet};
use crate::inverse::{CountingMeasure, GridMeasure, MarginalTable};
use crate::scalar::Real;

/// Ordered `key=value` pairs written ahead of a table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn write(&self, out: &mut impl Write) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }
}

pub fn fmt_real<T: Real>(x: T) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

/// `j,lambda1,...,lambdan`
pub fn write_samples<T: Real, W: Write>(mut out: W, samples: &SampleSet<T>, meta: &Metadata) -> Result<()> {
    meta.write(&mut out)?;
    let mut w = writer(out);
    let mut header = vec!["j".to_string()];
    header.extend((1..=samples.dim()).map(|k| format!("lambda{k}")));
    w.write_record(&header)?;
    for (j, p) in samples.iter().enumerate() {
        let mut row = vec![(j + 1).to_string()];
        row.extend(p.iter().map(|&x| fmt_real(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata and numeric columns (all but the first) of a table.
fn read_table<T: Real, R: Read>(mut input: R) -> Result<(Metadata, Vec<String>, Vec<Vec<T>>)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut meta = Metadata::new();
    for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
        if let Some((k, v)) = line.trim().split_once('=') {
            meta.entries.push((k.to_string(), v.to_string()));
        }
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>().map(T::lit).map_err(|e| Error::arg(format!("bad number {s:?}: {e}"))))
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    Ok((meta, header, rows))
}

fn to_matrix<T: Real>(rows: &[Vec<T>], cols: usize) -> Result<Array2<T>> {
    if rows.iter().any(|r| r.len() < cols) {
        return Err(Error::arg("short row in table"));
    }
    Ok(Array2::from_shape_fn((rows.len(), cols), |(i, k)| rows[i][k]))
}

/// Reads a table written by [`write_samples`] and validates it against `domain`.
pub fn read_samples<T: Real, R: Read>(input: R, domain: &ParameterDomain<T>) -> Result<SampleSet<T>> {
    let (meta, _, rows) = read_table::<T, R>(input)?;
    let points = to_matrix(&rows, domain.dim())?;
    let seed = meta.get("seed").and_then(|s| s.parse().ok()).unwrap_or(0);
    SampleSet::new(domain, points, RuleTag::Explicit, seed)
}

/// `j,q1,...,qm[,e1,...,em]`
pub fn write_qoi<T: Real, W: Write>(
    mut out: W,
    values: &Array2<T>,
    estimates: Option<&Array2<T>>,
    meta: &Metadata,
) -> Result<()> {
    meta.write(&mut out)?;
    let m = values.ncols();
    let mut w = writer(out);
    let mut header = vec!["j".to_string()];
    header.extend((1..=m).map(|k| format!("q{k}")));
    if estimates.is_some() {
        header.extend((1..=m).map(|k| format!("e{k}")));
    }
    w.write_record(&header)?;
    for j in 0..values.nrows() {
        let mut row = vec![(j + 1).to_string()];
        row.extend(values.row(j).iter().map(|&x| fmt_real(x)));
        if let Some(e) = estimates {
            row.extend(e.row(j).iter().map(|&x| fmt_real(x)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// QoI values and, when present, error-estimate columns.
pub fn read_qoi<T: Real, R: Read>(input: R) -> Result<(Array2<T>, Option<Array2<T>>)> {
    let (_, header, rows) = read_table::<T, R>(input)?;
    let m = header.iter().filter(|h| h.starts_with('q')).count();
    let has_e = header.iter().any(|h| h.starts_with('e'));
    let all = to_matrix(&rows, if has_e { 2 * m } else { m })?;
    let q = all.slice(ndarray::s![.., 0..m]).to_owned();
    let e = has_e.then(|| all.slice(ndarray::s![.., m..2 * m]).to_owned());
    Ok((q, e))
}

/// `i,lower1,upper1,...,p`
pub fn write_density<T: Real, W: Write>(mut out: W, density: &SimpleFunctionDensity<T>, meta: &Metadata) -> Result<()> {
    meta.write(&mut out)?;
    let part = density.partition();
    let mut w = writer(out);
    let mut header = vec!["i".to_string()];
    for k in 1..=part.dim() {
        header.push(format!("lower{k}"));
        header.push(format!("upper{k}"));
    }
    header.push("p".into());
    w.write_record(&header)?;
    for (i, &p) in density.probabilities().iter().enumerate() {
        let (lo, hi) = part.cell_bounds(i);
        let mut row = vec![(i + 1).to_string()];
        for k in 0..lo.len() {
            row.push(fmt_real(lo[k]));
            row.push(fmt_real(hi[k]));
        }
        row.push(fmt_real(p));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds a tensor partition and its probabilities from [`write_density`] output.
pub fn read_density<T: Real, R: Read>(input: R) -> Result<SimpleFunctionDensity<T>> {
    let (_, header, rows) = read_table::<T, R>(input)?;
    let dim = header.iter().filter(|h| h.starts_with("lower")).count();
    if dim == 0 || rows.is_empty() {
        return Err(Error::arg("density table is empty"));
    }
    let mut edges: Vec<Vec<T>> = vec![Vec::new(); dim];
    for row in &rows {
        if row.len() != 2 * dim + 1 {
            return Err(Error::arg("density row has the wrong width"));
        }
        for (k, e) in edges.iter_mut().enumerate() {
            e.push(row[2 * k]);
            e.push(row[2 * k + 1]);
        }
    }
    for e in &mut edges {
        e.sort_by(|a, b| a.partial_cmp(b).expect("finite edges"));
        e.dedup();
    }
    let part = DataPartition::new(edges)?;
    if part.n_cells() != rows.len() {
        return Err(Error::arg("density rows do not form a tensor grid"));
    }
    SimpleFunctionDensity::new(part, rows.iter().map(|r| r[2 * dim]).collect())
}

/// `j,i_o,cell_prob`
pub fn write_measure<T: Real, W: Write>(mut out: W, measure: &CountingMeasure<'_, T>, meta: &Metadata) -> Result<()> {
    meta.write(&mut out)?;
    let mut w = writer(out);
    w.write_record(["j", "i_o", "cell_prob"])?;
    for (j, (p, bin)) in measure.cell_prob().iter().zip(measure.pointer()).enumerate() {
        let i = bin.map_or(0, |i| i + 1);
        w.write_record([(j + 1).to_string(), i.to_string(), fmt_real(*p)])?;
    }
    w.flush()?;
    Ok(())
}

/// `j,lower1,upper1,...,cell_prob,std_error`
pub fn write_grid_measure<T: Real, W: Write>(mut out: W, measure: &GridMeasure<T>, meta: &Metadata) -> Result<()> {
    meta.write(&mut out)?;
    let mut w = writer(out);
    let mut header = vec!["j".to_string()];
    for k in 1..=measure.grid.dim() {
        header.push(format!("lower{k}"));
        header.push(format!("upper{k}"));
    }
    header.push("cell_prob".into());
    header.push("std_error".into());
    w.write_record(&header)?;
    for j in 0..measure.cell_prob.len() {
        let (lo, hi) = measure.grid.cell_bounds(j);
        let mut row = vec![(j + 1).to_string()];
        for k in 0..lo.len() {
            row.push(fmt_real(lo[k]));
            row.push(fmt_real(hi[k]));
        }
        row.push(fmt_real(measure.cell_prob[j]));
        row.push(fmt_real(measure.std_error[j]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `row,col,row_lower,row_upper,col_lower,col_upper,prob`
pub fn write_marginal<T: Real, W: Write>(mut out: W, table: &MarginalTable<T>, meta: &Metadata) -> Result<()> {
    meta.write(&mut out)?;
    let mut w = writer(out);
    w.write_record(["row", "col", "row_lower", "row_upper", "col_lower", "col_upper", "prob"])?;
    for ((r, c), &p) in table.prob.indexed_iter() {
        w.write_record([
            (r + 1).to_string(),
            (c + 1).to_string(),
            fmt_real(table.row_edges[r]),
            fmt_real(table.row_edges[r + 1]),
            fmt_real(table.col_edges[c]),
            fmt_real(table.col_edges[c + 1]),
            fmt_real(p),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `name,probability,cover_size`
pub fn write_event_probabilities<T: Real, W: Write>(
    mut out: W,
    rows: &[(String, T, usize)],
    meta: &Metadata,
) -> Result<()> {
    meta.write(&mut out)?;
    let mut w = writer(out);
    w.write_record(["event", "probability", "cover_size"])?;
    for (name, p, size) in rows {
        w.write_record([name.clone(), fmt_real(*p), size.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-bin rows followed by a `total` row holding the bounds and the estimate.
pub fn write_error_report<T: Real, W: Write>(mut out: W, report: &ErrorReport<T>, meta: &Metadata) -> Result<()> {
    let meta = meta
        .clone()
        .with("mode", report.mode.as_str())
        .with("probability", fmt_real(report.probability))
        .with("set_error", fmt_real(report.set_error.value))
        .with("set_error_std", fmt_real(report.set_error.std_error))
        .with("n_emulated", report.n_emulated)
        .with("emulation_seed", report.seed);
    meta.write(&mut out)?;
    let mut w = writer(out);
    w.write_record([
        "i", "p", "E", "inner_ratio", "outer_ratio", "lower", "upper", "J_A", "J", "J_Ae", "J_e", "term2",
    ])?;
    let t2 = report.term2.as_ref();
    for b in &report.term1.bins {
        let mut row = vec![
            (b.bin + 1).to_string(),
            fmt_real(b.p),
            fmt_real(b.e),
            fmt_real(b.inner_ratio),
            fmt_real(b.outer_ratio),
            fmt_real(b.lower()),
            fmt_real(b.upper()),
        ];
        match t2.and_then(|t| t.bins.get(b.bin)) {
            Some(j) => row.extend([j.j_a, j.j, j.j_ae, j.j_e, j.contribution()].map(fmt_real)),
            None => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        w.write_record(&row)?;
    }
    let p_total: T = report.term1.bins.iter().map(|b| b.p).fold(T::zero(), |a, b| a + b);
    let mut total = vec!["total".to_string(), fmt_real(p_total)];
    total.extend(std::iter::repeat_n(String::new(), 3));
    total.push(fmt_real(report.term1.lower));
    total.push(fmt_real(report.term1.upper));
    total.extend(std::iter::repeat_n(String::new(), 4));
    total.push(t2.map_or(String::new(), |t| fmt_real(t.estimate)));
    w.write_record(&total)?;
    w.flush()?;
    Ok(())
}
