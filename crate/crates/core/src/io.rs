//! File formats used by the command-line tool.
//!
//! Datasets are CSV: a header row `t,<t1>,...,<tp>` followed by one row
//! `id,<y1>,...,<yp>` per sample. Ground truth for generated data lives in a
//! JSON sidecar next to the CSV. Fitted models are versioned JSON.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::Metrics;
use crate::init::BicPoint;
use crate::model::{ClusterParams, Dataset, MixtureParams, PhaseTimings};
use crate::synth::{GeneratorSpec, SyntheticData};

pub const MODEL_SCHEMA: u32 = 1;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

/// Prefixes input errors with the offending file; other errors pass through.
fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::InvalidInput(msg) => io_err(path, msg),
        other => other,
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// Shortest text that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn dataset_to_csv(d: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(std::iter::once("t".to_string()).chain(d.t().iter().map(|&v| num(v)))).map_err(to_err)?;
    for (id, row) in d.ids().iter().zip(d.y().rows()) {
        w.write_record(std::iter::once(id.clone()).chain(row.iter().map(|&v| num(v)))).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

fn parse_field(field: &str, line: usize, col: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("row {line}, column {col}: '{field}' is not a number")))
}

pub fn parse_dataset(text: &[u8]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::InvalidInput(format!("row 1: {e}")))?,
        None => return Err(Error::InvalidInput("empty dataset file".into())),
    };
    if header.get(0).map(str::trim) != Some("t") {
        return Err(Error::InvalidInput("row 1: header must start with 't'".into()));
    }
    let t = header.iter().enumerate().skip(1).map(|(c, f)| parse_field(f, 1, c + 1)).collect::<Result<Vec<_>>>()?;
    let p = t.len();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (r, record) in records.enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::InvalidInput(format!("row {line}: {e}")))?;
        if record.len() != p + 1 {
            return Err(Error::InvalidInput(format!("row {line}: expected {} fields, found {}", p + 1, record.len())));
        }
        ids.push(record[0].trim().to_string());
        for (c, f) in record.iter().enumerate().skip(1) {
            values.push(parse_field(f, line, c + 1)?);
        }
    }
    let y = Array2::from_shape_vec((ids.len(), p), values).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Dataset::with_ids(y, t, ids)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    parse_dataset(&bytes).map_err(|e| in_file(path, e))
}

/// Ground truth of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub labels: Vec<usize>,
    pub means: Vec<Vec<f64>>,
    pub spec: GeneratorSpec,
}

impl Truth {
    pub fn from_synthetic(data: &SyntheticData) -> Self {
        Truth {
            labels: data.labels.clone(),
            means: data.true_means.rows().into_iter().map(|r| r.to_vec()).collect(),
            spec: data.spec.clone(),
        }
    }

    pub fn means_array(&self) -> Result<Array2<f64>> {
        let p = self.means.first().map_or(0, Vec::len);
        if let Some(bad) = self.means.iter().find(|m| m.len() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: bad.len() });
        }
        Array2::from_shape_vec((self.means.len(), p), self.means.concat())
            .map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// `data.csv` -> `data.truth.json`.
pub fn truth_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("truth.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionReport {
    pub chosen_c: usize,
    pub exhausted: bool,
    pub curve: Vec<BicPoint>,
}

/// Wall-clock seconds per EM phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingReport {
    pub e_step: f64,
    pub alpha: f64,
    pub m_step: f64,
    pub objective: f64,
    pub total: f64,
}

impl From<&PhaseTimings> for TimingReport {
    fn from(t: &PhaseTimings) -> Self {
        TimingReport {
            e_step: t.e_step.as_secs_f64(),
            alpha: t.alpha.as_secs_f64(),
            m_step: t.m_step.as_secs_f64(),
            objective: t.objective.as_secs_f64(),
            total: t.total().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: u32,
    pub t: Vec<f64>,
    pub clusters: Vec<ClusterParams>,
    pub loglik: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub failed_restarts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<TimingReport>,
}

impl ModelFile {
    pub fn params(&self) -> MixtureParams {
        MixtureParams { clusters: self.clusters.clone() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: ModelFile = read_json(path)?;
        if m.schema != MODEL_SCHEMA {
            return Err(io_err(path, format!("unsupported model schema {}", m.schema)));
        }
        m.params().validate(m.t.len()).map_err(|e| in_file(path, e))?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub dataset: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// Long-format metric rows `dataset,metric,value`.
pub fn metrics_csv(rows: &[MetricsFile]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(["dataset", "metric", "value"]).map_err(to_err)?;
    for r in rows {
        w.write_record([r.dataset.as_str(), "f_score", &num(r.metrics.f_score)]).map_err(to_err)?;
        w.write_record([r.dataset.as_str(), "rmse", &num(r.metrics.rmse)]).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// `(dataset, value)` pairs of one metric from a long-format metrics CSV.
pub fn read_metric_column(path: &Path, metric: &str) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| io_err(path, format!("row {line}: {e}")))?;
        if record.len() != 3 {
            return Err(io_err(path, format!("row {line}: expected 3 fields, found {}", record.len())));
        }
        if &record[1] == metric {
            out.push((record[0].to_string(), parse_field(&record[2], line, 3).map_err(|e| in_file(path, e))?));
        }
    }
    Ok(out)
}
