//! Distributed DFT as matrix multiplication.
//!
//! Along each dimension a core holds an `(N/P) × N` row slice of the
//! Vandermonde matrix and an `N/P`-long block of the data. The one-shuffle
//! loop contracts the matching column block with the local data, passes the
//! data one step around the ring, and repeats `P` times, so every core ends
//! up with its rows of `V · x` after `P − 1` nearest-neighbour permutes.

use crate::decomposition::{slices_for_shape, ComputationShape};
use crate::error::{Error, Result};
use crate::mesh::{ring_pairs, CoreCtx, CoreEvent, MeshSim, Tagged};
use crate::tensor::{contract, contract_flops, ComplexTensor, PrecisionMode};
use crate::vandermonde::{build_for, SamplePoints, VandermondeSlice};

/// Everything a KDFT run needs: grid, sampling per dimension, precision,
/// and each core's Vandermonde slices (`slices[core][dim]`).
#[derive(Debug, Clone)]
pub struct KdftPlan {
    shape: ComputationShape,
    samples: Vec<SamplePoints>,
    precision: PrecisionMode,
    slices: Vec<Vec<VandermondeSlice>>,
}

impl KdftPlan {
    pub fn new(samples: Vec<SamplePoints>, shape: ComputationShape, precision: PrecisionMode) -> Result<Self> {
        let dims: Vec<usize> = samples.iter().map(SamplePoints::len).collect();
        shape.validate_extents(&dims)?;
        let matrices = samples.iter().map(build_for).collect::<Result<Vec<_>>>()?;
        let slices = slices_for_shape(&matrices, shape)?;
        Ok(KdftPlan { shape, samples, precision, slices })
    }

    /// Uniform unit-circle sampling in every dimension.
    pub fn uniform(dims: &[usize], shape: ComputationShape, precision: PrecisionMode) -> Result<Self> {
        let samples = dims.iter().map(|&n| SamplePoints::uniform(n)).collect::<Result<Vec<_>>>()?;
        Self::new(samples, shape, precision)
    }

    pub fn computation_shape(&self) -> ComputationShape {
        self.shape
    }

    pub fn dims(&self) -> Vec<usize> {
        self.samples.iter().map(SamplePoints::len).collect()
    }

    pub fn samples(&self) -> &[SamplePoints] {
        &self.samples
    }

    pub fn precision(&self) -> PrecisionMode {
        self.precision
    }

    pub fn slices(&self, core: usize) -> &[VandermondeSlice] {
        &self.slices[core]
    }

    pub fn is_uniform(&self) -> bool {
        self.samples.iter().all(SamplePoints::is_uniform)
    }

    fn block_shape(&self) -> Vec<usize> {
        let cores = self.shape.as_array();
        self.dims().iter().zip(cores).map(|(n, p)| n / p).collect()
    }

    fn check_run(&self, mesh: &MeshSim, blocks: &[ComplexTensor]) -> Result<()> {
        if mesh.computation_shape() != self.shape {
            return Err(Error::Dimension(format!(
                "plan is for shape ({}) but the mesh is ({})",
                self.shape,
                mesh.computation_shape()
            )));
        }
        if blocks.len() != self.shape.num_cores() {
            return Err(Error::Dimension(format!(
                "{} blocks for {} cores",
                blocks.len(),
                self.shape.num_cores()
            )));
        }
        let want = self.block_shape();
        if let Some((core, b)) = blocks.iter().enumerate().find(|(_, b)| b.shape() != want.as_slice()) {
            return Err(Error::Dimension(format!(
                "block on core {core} has shape {:?}, plan expects {want:?}",
                b.shape()
            )));
        }
        Ok(())
    }
}

/// One core's side of the one-shuffle loop along `axis` of `group`.
///
/// Starting from `slice_idx = position in group`, contracts column block
/// `slice_idx` with the data currently held, then `P − 1` times shifts the
/// data one step around the ring and accumulates the next column block.
pub async fn one_shuffle_on_core(
    ctx: &CoreCtx,
    slice: &VandermondeSlice,
    x: ComplexTensor,
    group: &[usize],
    axis: usize,
    mode: PrecisionMode,
) -> Result<ComplexTensor> {
    let num_cores = group.len();
    if slice.num_cores() != num_cores {
        return Err(Error::Dimension(format!(
            "slice is partitioned for {} cores but the group has {num_cores}",
            slice.num_cores()
        )));
    }
    let position = group
        .iter()
        .position(|&c| c == ctx.core_id())
        .ok_or_else(|| Error::Protocol(format!("core {} is not in group {group:?}", ctx.core_id())))?;
    let pairs = ring_pairs(group)?;

    let step = |held: &Tagged<ComplexTensor>, slice_idx: usize| -> Result<ComplexTensor> {
        let block = slice.column_block(slice_idx)?;
        let y = contract(&block, &held.value, axis, mode)?;
        ctx.record_einsum(contract_flops(block.shape()[0], held.value.len()));
        ctx.record_event(CoreEvent::Contract { slice_idx, operand_origin: held.origin });
        Ok(y)
    };

    let mut held = Tagged { origin: position, value: x };
    let mut slice_idx = position;
    let mut out = step(&held, slice_idx)?;
    slice_idx = (slice_idx + 1) % num_cores;
    for _ in 0..num_cores - 1 {
        held = ctx.collective_permute(group, &pairs, held).await?;
        out = out.add(&step(&held, slice_idx)?, mode)?;
        slice_idx = (slice_idx + 1) % num_cores;
    }
    Ok(out)
}

/// Host-side entry to a single one-shuffle along `axis` over `group`.
///
/// `slices[i]` and `blocks[i]` belong to `group[i]`; cores outside the
/// group sit idle. Returns the partial transforms in group order.
pub fn one_shuffle(
    mesh: &mut MeshSim,
    slices: &[VandermondeSlice],
    blocks: Vec<ComplexTensor>,
    group: &[usize],
    axis: usize,
) -> Result<Vec<ComplexTensor>> {
    if slices.len() != group.len() || blocks.len() != group.len() {
        return Err(Error::Dimension(format!(
            "{} slices and {} blocks for a group of {}",
            slices.len(),
            blocks.len(),
            group.len()
        )));
    }
    let mode = mesh.precision();
    let mut inputs: Vec<Option<(usize, ComplexTensor)>> = (0..mesh.num_cores()).map(|_| None).collect();
    for (i, (&core, block)) in group.iter().zip(blocks).enumerate() {
        let slot = inputs
            .get_mut(core)
            .ok_or_else(|| Error::Argument(format!("core {core} is outside the mesh")))?;
        *slot = Some((i, block));
    }
    let out = mesh.run_spmd(inputs, |ctx, input| async move {
        match input {
            Some((i, x)) => Ok(Some(one_shuffle_on_core(&ctx, &slices[i], x, group, axis, mode).await?)),
            None => Ok(None),
        }
    })?;
    Ok(group.iter().map(|&c| out[c].clone().expect("group member produced a block")).collect())
}

fn run_dimensions(
    plan: &KdftPlan,
    mesh: &mut MeshSim,
    blocks: Vec<ComplexTensor>,
    conjugate: bool,
) -> Result<Vec<ComplexTensor>> {
    plan.check_run(mesh, &blocks)?;
    let mode = plan.precision;
    let rank = plan.samples.len();
    mesh.run_spmd(blocks, |ctx, x| async move {
        let mut x = x.to_precision(mode);
        for dim in 0..rank {
            let group = ctx.line(dim);
            let slice = &plan.slices[ctx.core_id()][dim];
            let conj;
            let slice = if conjugate {
                conj = slice.conj();
                &conj
            } else {
                slice
            };
            x = one_shuffle_on_core(&ctx, slice, x, &group, dim, mode).await?;
        }
        Ok(x)
    })
}

/// Forward transform of a block-decomposed tensor, dimension 1 first.
/// Core `(p1, p2, p3)` ends up with the matching block of the spectrum.
pub fn kdft_forward(plan: &KdftPlan, mesh: &mut MeshSim, blocks: Vec<ComplexTensor>) -> Result<Vec<ComplexTensor>> {
    run_dimensions(plan, mesh, blocks, false)
}

/// Inverse transform for uniform sampling: conjugated slices, then `1/(N1·N2·N3)`.
pub fn kdft_inverse_uniform(
    plan: &KdftPlan,
    mesh: &mut MeshSim,
    blocks: Vec<ComplexTensor>,
) -> Result<Vec<ComplexTensor>> {
    if !plan.is_uniform() {
        return Err(Error::Unsupported(
            "inverse transform requires uniform unit-circle sampling in every dimension".into(),
        ));
    }
    let total: usize = plan.dims().iter().product();
    let mode = plan.precision;
    let out = run_dimensions(plan, mesh, blocks, true)?;
    Ok(out.iter().map(|b| b.scale(1.0 / total as f64, mode)).collect())
}
