//! Strong and weak scaling sweeps on deterministic counters.
//!
//! Strong mode keeps `dims` and sweeps the computation shape; weak mode
//! keeps the shape and sweeps `dims`. The tracked work is per-core
//! `einsum_flops` for KDFT and per-core `local_fft_flops` for FFT. In strong
//! mode `ideal_work = baseline_work / (num_cores / baseline_cores)` with the
//! first successful row as baseline.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    expected_einsum_flops, expected_local_fft_flops, run_transform, Algorithm, Formulas, Generator, InputSpec,
    RunConfig, REPORT_SCHEMA_VERSION,
};
use crate::decomposition::ComputationShape;
use crate::error::{Error, Result};
use crate::oracle::{direct_dft_nd, max_relative_error};
use crate::tensor::PrecisionMode;
use crate::vandermonde::SamplePoints;

/// Largest problem (in elements) for which rows carry an oracle error.
pub const ORACLE_MAX_ELEMENTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    Strong,
    Weak,
}

impl fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingMode::Strong => "strong",
            ScalingMode::Weak => "weak",
        })
    }
}

impl FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(ScalingMode::Strong),
            "weak" => Ok(ScalingMode::Weak),
            _ => Err(Error::Argument(format!("unknown scaling mode {s:?} (expected strong or weak)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub algorithm: Algorithm,
    pub precision: PrecisionMode,
    pub generator: Generator,
    pub seed: u64,
    pub workers: Option<usize>,
    pub mode: ScalingMode,
    /// Fixed extents (strong mode).
    pub dims: Vec<usize>,
    /// Fixed shape (weak mode).
    pub shape: ComputationShape,
    /// Swept shapes (strong mode).
    pub shapes: Vec<ComputationShape>,
    /// Swept extents (weak mode).
    pub dims_sweep: Vec<Vec<usize>>,
}

impl ScalingConfig {
    pub fn strong(algorithm: Algorithm, dims: &[usize], shapes: Vec<ComputationShape>) -> Self {
        ScalingConfig {
            algorithm,
            precision: PrecisionMode::F64Reference,
            generator: Generator::Random,
            seed: 0,
            workers: None,
            mode: ScalingMode::Strong,
            dims: dims.to_vec(),
            shape: ComputationShape::single(),
            shapes,
            dims_sweep: Vec::new(),
        }
    }

    pub fn weak(algorithm: Algorithm, shape: ComputationShape, dims_sweep: Vec<Vec<usize>>) -> Self {
        ScalingConfig {
            mode: ScalingMode::Weak,
            dims: Vec::new(),
            shape,
            shapes: Vec::new(),
            dims_sweep,
            ..Self::strong(algorithm, &[], Vec::new())
        }
    }

    fn points(&self) -> Vec<(Vec<usize>, ComputationShape)> {
        match self.mode {
            ScalingMode::Strong => self.shapes.iter().map(|s| (self.dims.clone(), *s)).collect(),
            ScalingMode::Weak => self.dims_sweep.iter().map(|d| (d.clone(), self.shape)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    /// `ok` or `skipped`.
    pub status: String,
    pub message: String,
    pub dims: String,
    pub shape: String,
    pub num_cores: usize,
    pub einsum_flops_per_core: Option<u64>,
    pub local_fft_flops_per_core: Option<u64>,
    pub permute_count: Option<u64>,
    pub all_to_all_count: Option<u64>,
    pub bytes_moved: Option<u64>,
    /// The tracked per-core work of this row.
    pub work: Option<u64>,
    pub ideal_work: Option<f64>,
    pub closed_form_work: Option<u64>,
    pub max_rel_error_vs_oracle: Option<f64>,
}

impl ScalingRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub mode: ScalingMode,
    pub precision: String,
    pub work_metric: String,
    pub formulas: Formulas,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

fn join_x(v: &[usize]) -> String {
    v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
}

fn skipped(dims: &[usize], shape: ComputationShape, message: String) -> ScalingRow {
    ScalingRow {
        status: "skipped".into(),
        message,
        dims: join_x(dims),
        shape: join_x(&shape.as_array()),
        num_cores: shape.num_cores(),
        einsum_flops_per_core: None,
        local_fft_flops_per_core: None,
        permute_count: None,
        all_to_all_count: None,
        bytes_moved: None,
        work: None,
        ideal_work: None,
        closed_form_work: None,
        max_rel_error_vs_oracle: None,
    }
}

fn run_point(config: &ScalingConfig, dims: &[usize], shape: ComputationShape) -> Result<ScalingRow> {
    let run = RunConfig {
        precision: config.precision,
        input: InputSpec::Gen(config.generator),
        seed: config.seed,
        workers: config.workers,
        ..RunConfig::new(config.algorithm, dims, shape)
    };
    let outcome = run_transform(&run)?;
    let r = &outcome.report;
    let einsum = r.per_core_einsum_flops.iter().copied().max().unwrap_or(0);
    let local = r.per_core_local_fft_flops.iter().copied().max().unwrap_or(0);
    let (work, closed) = match config.algorithm {
        Algorithm::Kdft => (einsum, expected_einsum_flops(config.algorithm, dims, shape)),
        Algorithm::Fft => (local, expected_local_fft_flops(config.algorithm, dims, shape)),
    };
    let len: usize = dims.iter().product();
    let oracle_error = if len <= ORACLE_MAX_ELEMENTS {
        let x = config.generator.generate(dims, config.seed)?;
        let samples = dims.iter().map(|&n| SamplePoints::uniform(n)).collect::<Result<Vec<_>>>()?;
        Some(max_relative_error(&outcome.output, &direct_dft_nd(&x, &samples)?.values)?)
    } else {
        None
    };
    Ok(ScalingRow {
        status: "ok".into(),
        message: String::new(),
        einsum_flops_per_core: Some(einsum),
        local_fft_flops_per_core: Some(local),
        permute_count: Some(r.ledger.permute_count),
        all_to_all_count: Some(r.ledger.all_to_all_count),
        bytes_moved: Some(r.ledger.bytes_moved),
        work: Some(work),
        closed_form_work: Some(closed),
        max_rel_error_vs_oracle: oracle_error,
        ..skipped(dims, shape, String::new())
    })
}

/// Runs every sweep point. Infeasible points become `skipped` rows; a
/// protocol error aborts the sweep, as does every point failing.
pub fn run_scaling(config: &ScalingConfig) -> Result<ScalingReport> {
    let mut rows = Vec::new();
    for (dims, shape) in config.points() {
        match run_point(config, &dims, shape) {
            Ok(row) => rows.push(row),
            Err(e @ Error::Protocol(_)) => return Err(e),
            Err(e) => rows.push(skipped(&dims, shape, e.to_string())),
        }
    }
    if !rows.iter().any(ScalingRow::is_ok) {
        return Err(Error::Argument("every sweep point is infeasible".into()));
    }
    if config.mode == ScalingMode::Strong {
        let base = rows.iter().find(|r| r.is_ok()).cloned().expect("one row is ok");
        let (base_work, base_cores) = (base.work.unwrap() as f64, base.num_cores as f64);
        for row in rows.iter_mut().filter(|r| r.is_ok()) {
            row.ideal_work = Some(base_work * base_cores / row.num_cores as f64);
        }
    }
    Ok(ScalingReport {
        schema_version: REPORT_SCHEMA_VERSION,
        algorithm: config.algorithm,
        mode: config.mode,
        precision: config.precision.name().into(),
        work_metric: match config.algorithm {
            Algorithm::Kdft => "einsum_flops_per_core",
            Algorithm::Fft => "local_fft_flops_per_core",
        }
        .into(),
        formulas: Formulas::default(),
        rows,
    })
}

/// [`run_scaling`], then writes the CSV and JSON reports.
pub fn cmd_scaling(config: &ScalingConfig, csv_path: &Path, json_path: &Path) -> Result<ScalingReport> {
    let report = run_scaling(config)?;
    let write = |p: &Path, s: String| {
        std::fs::write(p, s).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))
    };
    write(csv_path, report.to_csv()?)?;
    write(json_path, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
