//! Parallel discrete Fourier transforms over a simulated multi-core mesh.
//!
//! Two distributed algorithms are provided:
//!
//! * [`kdft`]: the DFT as per-dimension matrix multiplication with
//!   (possibly nonuniform) Vandermonde matrices, distributed with the
//!   one-shuffle ring scheme.
//! * [`fft`]: a strided gather via `all_to_all`, an in-order radix-2
//!   Cooley-Tukey transform on each core, and a one-shuffle phase
//!   adjustment.
//!
//! Both run as SPMD programs on [`mesh::MeshSim`], which models cores and
//! collectives logically and keeps a deterministic work/communication
//! ledger. [`oracle`] holds brute-force reference transforms that share no
//! code with the engines.

pub mod bench;
pub mod decomposition;
pub mod error;
pub mod fft;
pub mod kdft;
pub mod mesh;
pub mod oracle;
pub mod tensor;
pub mod vandermonde;

pub use decomposition::{decompose, gather_to_host, BlockAssignment, ComputationShape};
pub use error::{Error, Result};
pub use fft::FftPlan;
pub use kdft::KdftPlan;
pub use mesh::{CommLedger, MeshSim, SourceTargetPairs};
pub use tensor::{Bf16Value, ComplexTensor, PrecisionMode};
pub use vandermonde::{SamplePoints, SamplingKind, VandermondeSlice};
