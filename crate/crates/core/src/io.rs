//! Configuration, dataset and report formats.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::antisym::{AntisymKernel, Strategy};
use crate::error::{Error, Result};
use crate::graphs::{pad_graph, LabeledGraph, GRAPH_CAP, PAD_LABEL};
use crate::kernels::{Kernel, KernelSpec};
use crate::sym::{SymKernel, SymStrategy};

/// Version of the report layout written by [`write_report`].
pub const SCHEMA_VERSION: u32 = 1;

/// Heavy-atom labels accepted by [`load_molecule_corpus`].
pub const MOLECULE_LABELS: [&str; 3] = ["C", "O", "S"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    #[default]
    None,
    Antisymmetric,
    Symmetric,
}

/// Kernel as written in config files, e.g.
/// `{"family": "gaussian", "sigma": 0.5, "symmetry": "antisymmetric"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelConfig {
    #[serde(flatten)]
    pub base: KernelSpec,
    #[serde(default)]
    pub symmetry: Symmetry,
    /// `naive_double_sum`, `naive_single_sum`, `slater_determinant` or
    /// `permanent`; defaults to the fastest valid strategy.
    #[serde(default)]
    pub strategy: Option<String>,
}

impl KernelConfig {
    pub fn build(&self) -> Result<Arc<dyn Kernel>> {
        let base = self.base.clone();
        Ok(match self.symmetry {
            Symmetry::None => {
                if self.strategy.is_some() {
                    return Err(Error::InvalidParameter(
                        "a strategy needs symmetry `antisymmetric` or `symmetric`".into(),
                    ));
                }
                Arc::new(base)
            }
            Symmetry::Antisymmetric => match &self.strategy {
                None => Arc::new(AntisymKernel::fastest(base)),
                Some(name) => {
                    let s: Strategy = serde_json::from_value(serde_json::Value::String(
                        name.clone(),
                    ))
                    .map_err(|_| {
                        Error::InvalidParameter(format!("unknown antisymmetric strategy `{name}`"))
                    })?;
                    Arc::new(AntisymKernel::new(base, s)?)
                }
            },
            Symmetry::Symmetric => {
                let s = match &self.strategy {
                    None if base.is_entrywise_radial() => SymStrategy::Permanent,
                    None => SymStrategy::NaiveSingleSum,
                    Some(name) => serde_json::from_value(serde_json::Value::String(name.clone()))
                        .map_err(|_| {
                        Error::InvalidParameter(format!("unknown symmetric strategy `{name}`"))
                    })?,
                };
                Arc::new(SymKernel::new(base, s)?)
            }
        })
    }
}

/// Samples with their labels; CSV rows are feature columns then the label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a numeric CSV. A first row that does not parse as numbers is taken
/// as a header.
pub fn load_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data = Dataset::default();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        let values: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(parse_error(path, line, e.to_string())),
        };
        if values.len() < 2 {
            return Err(parse_error(
                path,
                line,
                "need at least one feature and a label",
            ));
        }
        if *width.get_or_insert(values.len()) != values.len() {
            return Err(parse_error(path, line, "inconsistent number of columns"));
        }
        let (features, label) = values.split_at(values.len() - 1);
        data.points.push(features.to_vec());
        data.labels.push(label[0]);
    }
    Ok(data)
}

pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for (p, y) in data.points.iter().zip(&data.labels) {
        let mut row: Vec<String> = p.iter().map(f64::to_string).collect();
        row.push(y.to_string());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// On-disk graph: `{"nodes": [{"label": "C"}, ...], "edges": [[0, 1], ...]}`.
/// Edges may carry a weight as a third element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub label: String,
}

impl GraphFile {
    pub fn to_graph(&self) -> Result<LabeledGraph> {
        let n = self.nodes.len();
        let mut adjacency = nalgebra::DMatrix::zeros(n, n);
        for e in &self.edges {
            let (i, j, w) = match e.as_slice() {
                [i, j] => (*i, *j, 1.0),
                [i, j, w] => (*i, *j, *w),
                _ => return Err(Error::InvalidParameter(format!("malformed edge {e:?}"))),
            };
            if i.fract() != 0.0
                || j.fract() != 0.0
                || i < 0.0
                || j < 0.0
                || i as usize >= n
                || j as usize >= n
            {
                return Err(Error::InvalidParameter(format!(
                    "edge {e:?} references a missing node"
                )));
            }
            adjacency[(i as usize, j as usize)] = w;
            adjacency[(j as usize, i as usize)] = w;
        }
        LabeledGraph::new(
            adjacency,
            self.nodes.iter().map(|n| n.label.clone()).collect(),
        )
    }

    pub fn from_graph(g: &LabeledGraph) -> Self {
        let n = g.original_size();
        let a = g.adjacency();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                match a[(i, j)] {
                    0.0 => {}
                    1.0 => edges.push(vec![i as f64, j as f64]),
                    w => edges.push(vec![i as f64, j as f64, w]),
                }
            }
        }
        Self {
            nodes: g.labels()[..n]
                .iter()
                .map(|l| NodeEntry { label: l.clone() })
                .collect(),
            edges,
        }
    }
}

pub fn load_graph_json(path: &Path) -> Result<LabeledGraph> {
    let text = fs::read_to_string(path)?;
    let file: GraphFile =
        serde_json::from_str(&text).map_err(|e| parse_error(path, e.line(), e.to_string()))?;
    file.to_graph()
        .map_err(|e| parse_error(path, 1, e.to_string()))
}

pub fn save_graph_json(path: &Path, g: &LabeledGraph) -> Result<()> {
    fs::write(
        path,
        serde_json::to_string_pretty(&GraphFile::from_graph(g))?,
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub name: String,
    pub graph: LabeledGraph,
    pub boiling_point: f64,
}

/// Loads `labels.csv` (columns `file,boiling_point`) and the graph files it
/// names from `dir`. Hydrogens are expected to be absent already; every
/// graph is padded to [`GRAPH_CAP`] nodes.
pub fn load_molecule_corpus(dir: &Path) -> Result<Vec<Molecule>> {
    let labels_path = dir.join("labels.csv");
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&labels_path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(parse_error(
                &labels_path,
                line,
                "expected `file,boiling_point`",
            ));
        }
        let name = record[0].to_string();
        let boiling_point: f64 = record[1].parse().map_err(|e: std::num::ParseFloatError| {
            parse_error(&labels_path, line, e.to_string())
        })?;
        let graph = load_graph_json(&dir.join(&name))?;
        for label in graph.labels() {
            if !MOLECULE_LABELS.contains(&label.as_str()) && label != PAD_LABEL {
                return Err(Error::InvalidLabel(label.clone()));
            }
        }
        if graph.size() > GRAPH_CAP {
            return Err(parse_error(
                &dir.join(&name),
                1,
                format!("{} heavy atoms exceed the cap of {GRAPH_CAP}", graph.size()),
            ));
        }
        out.push(Molecule {
            name,
            graph: pad_graph(&graph, GRAPH_CAP)?,
            boiling_point,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Fields shared by every experiment config. Experiment-specific fields
/// live alongside them in the same JSON object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Result of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub config: serde_json::Value,
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str, config: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            config,
            tables: Vec::new(),
            summary: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Writes `<experiment>.json` and, for CSV output, one
/// `<experiment>_<table>.csv` per table. Returns the written paths.
pub fn write_report(dir: &Path, report: &Report, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json_path = dir.join(format!("{}.json", report.experiment));
    fs::write(&json_path, serde_json::to_string_pretty(report)?)?;
    written.push(json_path);
    if format == OutputFormat::Csv {
        for table in &report.tables {
            let path = dir.join(format!("{}_{}.csv", report.experiment, table.name));
            let mut writer = csv::Writer::from_path(&path)?;
            let mut header = vec!["schema_version".to_string()];
            header.extend(table.columns.iter().cloned());
            writer.write_record(&header)?;
            for row in &table.rows {
                let mut out = vec![SCHEMA_VERSION.to_string()];
                out.extend(row.iter().map(f64::to_string));
                writer.write_record(&out)?;
            }
            writer.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}
