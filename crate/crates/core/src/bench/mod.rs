//! Benchmark harness: file and synthetic inputs, single transform runs with
//! a ledger report, and strong/weak scaling sweeps.

pub mod generate;
pub mod io;
pub mod scaling;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose, gather_to_host, ComputationShape};
use crate::error::{Error, Result};
use crate::fft::{fft_forward, FftPlan};
use crate::kdft::{kdft_forward, KdftPlan};
use crate::mesh::{CollectiveRecord, CommLedger, MeshSim};
use crate::tensor::{ComplexTensor, PrecisionMode};
use crate::vandermonde::SamplePoints;

pub use generate::{random_tensor, random_unit_circle, Generator};
pub use io::{read_points, read_tensor, write_tensor, Dtype};
pub use scaling::{cmd_scaling, run_scaling, ScalingConfig, ScalingMode, ScalingReport, ScalingRow};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const CORE_ORDERING: &str = "flat id = p1*P2*P3 + p2*P3 + p3";
pub const EINSUM_FORMULA: &str =
    "kdft: sum_i 4*(N_i/P_i)*N_i*(B/(N_i/P_i)) = sum_i 4*N_i*B; fft phase adjust: sum_i 4*P_i*B; B = block elements";
pub const LOCAL_FFT_FORMULA: &str =
    "fft: sum_i 5*(N_i/P_i)*log2(N_i/P_i) per fiber, B/(N_i/P_i) fibers per core = sum_i 5*B*log2(N_i/P_i)";
pub const BYTES_FORMULA: &str =
    "per collective: group size * payload elements * bytes per complex element (16 for f64, 8 for f32 and bf16x3)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Kdft,
    Fft,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Kdft => "kdft",
            Algorithm::Fft => "fft",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kdft" => Ok(Algorithm::Kdft),
            "fft" => Ok(Algorithm::Fft),
            _ => Err(Error::Argument(format!("unknown algorithm {s:?} (expected kdft or fft)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    Uniform,
    /// One point set per dimension, from a points file.
    Nonuniform(PathBuf),
    /// Caller-supplied point sets.
    Points(Vec<SamplePoints>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    File(PathBuf),
    Gen(Generator),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub dims: Vec<usize>,
    pub shape: ComputationShape,
    pub precision: PrecisionMode,
    pub sampling: Sampling,
    pub input: InputSpec,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Host threads for the simulator; never affects results.
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, dims: &[usize], shape: ComputationShape) -> Self {
        RunConfig {
            algorithm,
            dims: dims.to_vec(),
            shape,
            precision: PrecisionMode::F64Reference,
            sampling: Sampling::Uniform,
            input: InputSpec::Gen(Generator::Random),
            seed: 0,
            output: None,
            report: None,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCounts {
    pub cores: Vec<usize>,
    pub permute_count: usize,
    pub all_to_all_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionCounts {
    pub dim: usize,
    pub extent: usize,
    pub cores: usize,
    pub lines: Vec<LineCounts>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formulas {
    pub einsum_flops: String,
    pub local_fft_flops: String,
    pub bytes_moved: String,
    pub core_ordering: String,
}

impl Default for Formulas {
    fn default() -> Self {
        Formulas {
            einsum_flops: EINSUM_FORMULA.into(),
            local_fft_flops: LOCAL_FFT_FORMULA.into(),
            bytes_moved: BYTES_FORMULA.into(),
            core_ordering: CORE_ORDERING.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub dims: Vec<usize>,
    pub shape: [usize; 3],
    pub num_cores: usize,
    pub precision: String,
    pub sampling: String,
    pub bytes_per_element: u64,
    pub ledger: CommLedger,
    pub per_dimension: Vec<DimensionCounts>,
    pub per_core_einsum_flops: Vec<u64>,
    pub per_core_local_fft_flops: Vec<u64>,
    pub expected_einsum_flops_per_core: u64,
    pub expected_local_fft_flops_per_core: u64,
    pub formulas: Formulas,
}

#[derive(Debug, Clone)]
pub struct TransformOutcome {
    pub output: ComplexTensor,
    pub report: TransformReport,
}

fn block_len(dims: &[usize], shape: ComputationShape) -> u64 {
    dims.iter().enumerate().map(|(d, n)| (n / shape.cores_along(d)) as u64).product()
}

/// Per-core einsum work predicted for `algorithm` on `dims` over `shape`.
pub fn expected_einsum_flops(algorithm: Algorithm, dims: &[usize], shape: ComputationShape) -> u64 {
    let b = block_len(dims, shape);
    dims.iter()
        .enumerate()
        .map(|(d, &n)| match algorithm {
            Algorithm::Kdft => 4 * n as u64 * b,
            Algorithm::Fft => 4 * shape.cores_along(d) as u64 * b,
        })
        .sum()
}

/// Per-core local FFT work predicted for `algorithm` on `dims` over `shape`.
pub fn expected_local_fft_flops(algorithm: Algorithm, dims: &[usize], shape: ComputationShape) -> u64 {
    if algorithm == Algorithm::Kdft {
        return 0;
    }
    let b = block_len(dims, shape);
    dims.iter()
        .enumerate()
        .map(|(d, &n)| 5 * b * u64::from((n / shape.cores_along(d)).trailing_zeros()))
        .sum()
}

/// Permute and all-to-all counts per line per dimension.
pub fn line_counts(mesh: &MeshSim, dims: &[usize]) -> Vec<DimensionCounts> {
    let shape = mesh.computation_shape();
    dims.iter()
        .enumerate()
        .map(|(dim, &extent)| DimensionCounts {
            dim,
            extent,
            cores: shape.cores_along(dim),
            lines: shape
                .lines(dim)
                .into_iter()
                .map(|line| {
                    let all_to_all_count = mesh
                        .collectives()
                        .iter()
                        .filter(|r| matches!(r, CollectiveRecord::AllToAll { group, split_axis } if *group == line && *split_axis == dim))
                        .count();
                    LineCounts { permute_count: mesh.permutes_on(&line), all_to_all_count, cores: line }
                })
                .collect(),
        })
        .collect()
}

fn resolve_samples(config: &RunConfig) -> Result<Option<Vec<SamplePoints>>> {
    let samples = match &config.sampling {
        Sampling::Uniform => return Ok(None),
        Sampling::Nonuniform(path) => read_points(path)?,
        Sampling::Points(s) => s.clone(),
    };
    if samples.len() != config.dims.len() {
        return Err(Error::Argument(format!(
            "{} point sets given for a rank-{} transform",
            samples.len(),
            config.dims.len()
        )));
    }
    for (d, (s, n)) in samples.iter().zip(&config.dims).enumerate() {
        if s.len() != *n {
            return Err(Error::Argument(format!("dimension {d}: {} points for extent {n}", s.len())));
        }
    }
    Ok(Some(samples))
}

enum Plan {
    Kdft(KdftPlan),
    Fft(FftPlan),
}

fn build_plan(config: &RunConfig) -> Result<Plan> {
    if config.dims.is_empty() || config.dims.len() > 3 {
        return Err(Error::Dimension(format!("rank {} not in 1..=3", config.dims.len())));
    }
    let samples = resolve_samples(config)?;
    match config.algorithm {
        Algorithm::Kdft => {
            let plan = match samples {
                Some(s) => KdftPlan::new(s, config.shape, config.precision)?,
                None => KdftPlan::uniform(&config.dims, config.shape, config.precision)?,
            };
            Ok(Plan::Kdft(plan))
        }
        Algorithm::Fft => {
            if samples.is_some() {
                return Err(Error::Unsupported("fft supports only uniform sampling".into()));
            }
            Ok(Plan::Fft(FftPlan::new(&config.dims, config.shape, config.precision)?))
        }
    }
}

fn load_input(config: &RunConfig) -> Result<ComplexTensor> {
    let x = match &config.input {
        InputSpec::File(path) => read_tensor(path)?,
        InputSpec::Gen(g) => g.generate(&config.dims, config.seed)?,
    };
    if x.shape() != config.dims.as_slice() {
        return Err(Error::Dimension(format!("input has dims {:?}, expected {:?}", x.shape(), config.dims)));
    }
    Ok(x)
}

/// Validates the plan, builds the input, runs the engine on a fresh mesh and
/// gathers the result. Writes nothing.
pub fn run_transform(config: &RunConfig) -> Result<TransformOutcome> {
    let plan = build_plan(config)?;
    let x = load_input(config)?;
    let (blocks, assignment) = decompose(&x, config.shape)?;
    let mut mesh = MeshSim::new(config.shape, config.precision);
    if let Some(w) = config.workers {
        mesh = mesh.with_workers(w);
    }
    let out_blocks = match &plan {
        Plan::Kdft(p) => kdft_forward(p, &mut mesh, blocks)?,
        Plan::Fft(p) => fft_forward(p, &mut mesh, blocks)?,
    };
    let output = gather_to_host(&out_blocks, &assignment)?;
    let report = TransformReport {
        schema_version: REPORT_SCHEMA_VERSION,
        algorithm: config.algorithm,
        dims: config.dims.clone(),
        shape: config.shape.as_array(),
        num_cores: config.shape.num_cores(),
        precision: config.precision.name().into(),
        sampling: if config.sampling == Sampling::Uniform { "uniform" } else { "nonuniform" }.into(),
        bytes_per_element: config.precision.complex_bytes(),
        ledger: *mesh.ledger(),
        per_dimension: line_counts(&mesh, &config.dims),
        per_core_einsum_flops: mesh.core_einsum_flops().to_vec(),
        per_core_local_fft_flops: mesh.core_local_fft_flops().to_vec(),
        expected_einsum_flops_per_core: expected_einsum_flops(config.algorithm, &config.dims, config.shape),
        expected_local_fft_flops_per_core: expected_local_fft_flops(config.algorithm, &config.dims, config.shape),
        formulas: Formulas::default(),
    };
    Ok(TransformOutcome { output, report })
}

/// [`run_transform`], then writes the output tensor and the JSON report if
/// paths are configured.
pub fn cmd_transform(config: &RunConfig) -> Result<TransformOutcome> {
    let outcome = run_transform(config)?;
    if let Some(path) = &config.output {
        write_tensor(path, &outcome.output, Dtype::for_precision(config.precision))?;
    }
    if let Some(path) = &config.report {
        std::fs::write(path, serde_json::to_string_pretty(&outcome.report)?)
            .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(outcome)
}

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Protocol(_) => 3,
        _ => 2,
    }
}
