//! On-disk documents.
//!
//! Structured documents are TOML; tables are comma-separated with a header
//! row, preceded by `#` comment lines carrying the same metadata that TOML
//! documents keep in their `[meta]` table.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use zzarray_core::compiler::{gate_key, BlockShape, PulseLibrary, Schedule, ScheduleReport};
use zzarray_core::hamiltonian::ControlVector;
use zzarray_core::lattice::{Block, BlockCoupling, DrivingPattern, Edge, Geometry, QubitGraph};
use zzarray_core::propagation::TargetGate;
use zzarray_core::robust::OptimizationResult;

use crate::VERSION;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Model(#[from] zzarray_core::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FormatError>;

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// The fully resolved settings of the run.
    pub config: toml::Table,
}

impl Meta {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        let config = toml::Table::try_from(config).map_err(|e| FormatError::Invalid(format!("config: {e}")))?;
        Ok(Self { tool: "zzarray".into(), version: VERSION.into(), command: command.into(), seed, config })
    }

    /// Comment lines for the top of a table file.
    pub fn comment_lines(&self) -> String {
        let mut s = format!("# {} {} {} seed={}\n", self.tool, self.version, self.command, self.seed);
        let cfg: Vec<String> = self.config.iter().map(|(k, v)| format!("{k}={v}")).collect();
        s.push_str(&format!("# config: {}\n", cfg.join(" ")));
        s
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FormatError::Read { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let err = |source| FormatError::Write { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(err)?;
    }
    // write-then-rename so an interrupted run never leaves a torn file
    let tmp = path.with_extension("partial");
    fs::write(&tmp, text).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| FormatError::Parse { path: path.display().to_string(), message: e.to_string() })
}

pub fn to_toml<T: Serialize>(doc: &T) -> Result<String> {
    toml::to_string(doc).map_err(|e| FormatError::Invalid(format!("serialization failed: {e}")))
}

pub fn write_toml<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    write_text(path, &to_toml(doc)?)
}

/// Renders a table with metadata comments and a header row.
pub fn csv_string(meta: &Meta, header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut out = meta.comment_lines().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let io = |e: csv::Error| FormatError::Invalid(format!("csv: {e}"));
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| FormatError::Invalid(format!("csv: {e}")))?;
    }
    String::from_utf8(out).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn write_csv(path: &Path, meta: &Meta, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    write_text(path, &csv_string(meta, header, rows)?)
}

/// Prints to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| FormatError::Write { path: "stdout".into(), source })
        }
    }
}

/// A qubit graph with an optional driving pattern and, for calibration,
/// frequencies and a target qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub num_qubits: usize,
    #[serde(default = "custom_geometry")]
    pub geometry: String,
    /// `[a, b, J]` triples.
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<(i64, i64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driven: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_pairs: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

fn custom_geometry() -> String {
    "custom".into()
}

impl GraphDoc {
    pub fn from_graph(graph: &QubitGraph, pattern: Option<&DrivingPattern>) -> Self {
        Self {
            num_qubits: graph.num_qubits(),
            geometry: graph.geometry().as_str().into(),
            edges: graph.edges().iter().map(|e| (e.a, e.b, e.coupling)).collect(),
            coords: graph.coords().map(<[_]>::to_vec),
            driven: pattern.map(|p| p.driven.clone()),
            gate_pairs: pattern.map(|p| p.gate_pairs.clone()),
            frequencies: None,
            target: None,
            meta: None,
        }
    }

    pub fn graph(&self) -> Result<QubitGraph> {
        let geometry = Geometry::parse(&self.geometry)
            .ok_or_else(|| FormatError::Invalid(format!("unknown geometry '{}'", self.geometry)))?;
        let edges = self.edges.iter().map(|&(a, b, j)| Edge::new(a, b, j)).collect();
        Ok(QubitGraph::new(self.num_qubits, edges, geometry, self.coords.clone())?)
    }

    pub fn pattern(&self) -> Option<DrivingPattern> {
        self.driven.as_ref().map(|d| DrivingPattern::new(d.clone(), self.gate_pairs.clone().unwrap_or_default()))
    }
}

/// A control vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsDoc {
    pub duration: f64,
    pub num_bins: usize,
    pub num_center: usize,
    /// Index `((j·M) + n)·2 + μ` for qubit `j`, bin `n`, quadrature `μ`.
    pub values: Vec<f64>,
}

impl ControlsDoc {
    pub fn from_controls(c: &ControlVector) -> Self {
        Self { duration: c.duration(), num_bins: c.num_bins(), num_center: c.num_center(), values: c.values().to_vec() }
    }

    pub fn controls(&self) -> Result<ControlVector> {
        Ok(ControlVector::from_values(self.duration, self.num_bins, self.num_center, self.values.clone())?)
    }
}

/// Final output of `optimize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDoc {
    pub block: String,
    pub target: String,
    pub worst_case_fidelity: f64,
    pub worst_case_infidelity: f64,
    pub mean_fidelity: f64,
    pub worst_corner: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: String,
    pub restart: usize,
    pub corner_masks: Vec<u64>,
    pub per_corner_fidelities: Vec<f64>,
    pub controls: ControlsDoc,
    pub meta: Meta,
}

impl ResultDoc {
    pub fn new(block: &str, target: &str, r: &OptimizationResult, meta: Meta) -> Self {
        Self {
            block: block.into(),
            target: target.into(),
            worst_case_fidelity: r.worst_case,
            worst_case_infidelity: r.worst_case_infidelity(),
            mean_fidelity: r.mean_fidelity,
            worst_corner: r.worst_corner,
            iterations: r.iterations,
            evaluations: r.evaluations,
            termination: r.termination.as_str().into(),
            restart: r.restart,
            corner_masks: r.corner_masks.clone(),
            per_corner_fidelities: r.per_corner_fidelities.clone(),
            controls: ControlsDoc::from_controls(&r.controls),
            meta,
        }
    }
}

/// Periodic snapshot of a running optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDoc {
    pub restart: usize,
    pub iteration: usize,
    pub evaluations: usize,
    pub worst_case_fidelity: f64,
    pub mean_fidelity: f64,
    pub trust_region: f64,
    pub controls: ControlsDoc,
    pub meta: Meta,
}

/// Anything carrying a `controls` table: results and checkpoints.
#[derive(Debug, Clone, Deserialize)]
pub struct StartDoc {
    pub controls: ControlsDoc,
    #[serde(default)]
    pub trust_region: Option<f64>,
}

/// `bin, t_mid, omega_x_0, omega_y_0, …` rows.
pub fn pulse_table(c: &ControlVector) -> (Vec<String>, Vec<Vec<String>>) {
    use zzarray_core::hamiltonian::Axis;
    let mut header = vec!["bin".to_string(), "t_mid".to_string()];
    for j in 0..c.num_center() {
        header.push(format!("omega_x_{j}"));
        header.push(format!("omega_y_{j}"));
    }
    let rows = (0..c.num_bins())
        .map(|n| {
            let mut r = vec![n.to_string(), c.midpoint(n).to_string()];
            for j in 0..c.num_center() {
                r.push(c.get(j, n, Axis::X).to_string());
                r.push(c.get(j, n, Axis::Y).to_string());
            }
            r
        })
        .collect();
    (header, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDoc {
    pub center: Vec<usize>,
    pub boundary: Vec<usize>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDoc {
    pub driven: Vec<usize>,
    pub gate_pairs: Vec<(usize, usize)>,
    pub blocks: Vec<BlockDoc>,
    /// `[circuit gate index, block index]` pairs.
    pub gates: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub step_count: usize,
    pub circuit_depth: usize,
    pub overhead: f64,
    pub overhead_exceeded: bool,
    pub valid: bool,
    pub issues: Vec<String>,
    pub steps: Vec<StepDoc>,
    pub meta: Meta,
}

impl ScheduleDoc {
    pub fn new(schedule: &Schedule, report: &ScheduleReport, meta: Meta) -> Self {
        let mut issues: Vec<String> =
            report.pattern_violations.iter().map(|(s, r)| format!("step {s}: {}", r.summary())).collect();
        issues.extend(report.issues.iter().map(|i| format!("{i:?}")));
        Self {
            step_count: report.step_count,
            circuit_depth: report.circuit_depth,
            overhead: report.overhead,
            overhead_exceeded: report.overhead_exceeded,
            valid: report.is_valid(),
            issues,
            steps: schedule
                .steps
                .iter()
                .map(|s| StepDoc {
                    driven: s.pattern.driven.clone(),
                    gate_pairs: s.pattern.gate_pairs.clone(),
                    blocks: s
                        .blocks
                        .iter()
                        .zip(&s.targets)
                        .map(|(b, t)| BlockDoc {
                            center: b.center().to_vec(),
                            boundary: b.boundary().to_vec(),
                            target: gate_key(t),
                        })
                        .collect(),
                    gates: s.gates.clone(),
                })
                .collect(),
            meta,
        }
    }
}

/// Inverse of [`gate_key`] for the gates the library can hold.
pub fn gate_from_key(key: &str) -> Result<TargetGate> {
    if let Some(g) = TargetGate::parse(key) {
        return Ok(g);
    }
    key.strip_prefix('I')
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| (1..=zzarray_core::lattice::MAX_BLOCK_QUBITS).contains(&k))
        .map(TargetGate::identity_for)
        .ok_or_else(|| FormatError::Invalid(format!("unknown gate '{key}' in pulse library")))
}

/// One library pulse with the block it was optimized on (local indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseDoc {
    pub gate: String,
    pub num_center: usize,
    pub num_boundary: usize,
    /// `[a, b, J]` in block-local indices.
    pub couplings: Vec<(usize, usize, f64)>,
    pub fidelity: f64,
    pub controls: ControlsDoc,
}

impl PulseDoc {
    pub fn new(gate: &TargetGate, block: &Block, fidelity: f64, controls: &ControlVector) -> Self {
        Self {
            gate: gate_key(gate),
            num_center: block.center().len(),
            num_boundary: block.boundary().len(),
            couplings: block.couplings().iter().map(|c| (c.a, c.b, c.coupling)).collect(),
            fidelity,
            controls: ControlsDoc::from_controls(controls),
        }
    }

    pub fn block(&self) -> Result<Block> {
        let c = self.couplings.iter().map(|&(a, b, coupling)| BlockCoupling { a, b, coupling }).collect();
        Ok(Block::new(self.num_center, self.num_boundary, c)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryDoc {
    pub pulses: Vec<PulseDoc>,
    pub meta: Meta,
}

impl LibraryDoc {
    pub fn library(&self) -> Result<PulseLibrary> {
        let mut lib = PulseLibrary::new();
        for p in &self.pulses {
            let gate = gate_from_key(&p.gate)?;
            lib.insert(&gate, BlockShape::of(&p.block()?), p.controls.controls()?)?;
        }
        Ok(lib)
    }
}
