//! Distributed FFT: strided gather, local in-order radix-2 transform, and a
//! one-shuffle phase adjustment.
//!
//! With `n = P·l + β`, core `β` of a group first collects the subsequence
//! `x_{P·l+β}`, transforms it locally to `X̃^{(β)}`, and the group then sums
//! `exp(-j·2π·β·k/N) · X̃^{(β)}_k` over `β` with the same ring loop KDFT
//! uses. Output lands in natural `k` order, one contiguous block per core.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

use num_complex::{Complex, Complex64};

use crate::decomposition::ComputationShape;
use crate::error::{Error, Result};
use crate::mesh::{ring_pairs, CoreCtx, CoreEvent, MeshSim, Tagged};
use crate::tensor::{reorder, scale_along_axis, select, ComplexTensor, PrecisionMode};
use crate::vandermonde::build_phase_slice;

/// Radix-2 bit-reversal permutation of `0..n` (`n` a power of two).
pub fn bit_reversal_permutation(n: usize) -> Result<Vec<usize>> {
    if !n.is_power_of_two() {
        return Err(Error::Plan(format!("{n} is not a power of two")));
    }
    let bits = n.trailing_zeros();
    Ok((0..n)
        .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
        .collect())
}

/// `exp(-j·2π·i/m)` for `i < m/2`.
fn twiddle_table(m: usize) -> Vec<Complex64> {
    (0..m / 2).map(|i| Complex64::from_polar(1.0, -TAU * i as f64 / m as f64)).collect()
}

/// Butterfly estimate `5·M·log2(M)` for one length-`M` transform.
pub fn fft_flops(m: usize) -> u64 {
    5 * m as u64 * u64::from(m.trailing_zeros())
}

fn butterflies<C>(data: &mut [C], twiddles: &[C])
where
    C: Copy + Add<Output = C> + Sub<Output = C> + Mul<Output = C>,
{
    let n = data.len();
    let mut half = 1;
    while half < n {
        let stride = n / (2 * half);
        for start in (0..n).step_by(2 * half) {
            for j in 0..half {
                let w = twiddles[j * stride];
                let a = data[start + j];
                let b = data[start + j + half] * w;
                data[start + j] = a + b;
                data[start + j + half] = a - b;
            }
        }
        half *= 2;
    }
}

fn fft_with_table(
    x: &ComplexTensor,
    axis: usize,
    twiddles: &[Complex64],
    mode: PrecisionMode,
) -> Result<ComplexTensor> {
    let (outer, m, inner) = x.axis_layout(axis)?;
    if !m.is_power_of_two() {
        return Err(Error::Plan(format!("local transform length {m} is not a power of two")));
    }
    let x = reorder(x, axis, &bit_reversal_permutation(m)?)?;
    let mut re = x.re().to_vec();
    let mut im = x.im().to_vec();
    let at = |o: usize, k: usize, i: usize| (o * m + k) * inner + i;
    match mode {
        PrecisionMode::F64Reference => {
            let mut fiber = vec![Complex64::new(0.0, 0.0); m];
            for o in 0..outer {
                for i in 0..inner {
                    for (k, f) in fiber.iter_mut().enumerate() {
                        *f = Complex64::new(re[at(o, k, i)], im[at(o, k, i)]);
                    }
                    butterflies(&mut fiber, twiddles);
                    for (k, f) in fiber.iter().enumerate() {
                        re[at(o, k, i)] = f.re;
                        im[at(o, k, i)] = f.im;
                    }
                }
            }
        }
        // The local transform is not a matrix-unit operation; both reduced
        // modes run it in f32.
        PrecisionMode::F32 | PrecisionMode::Bf16Split3 => {
            let tw: Vec<Complex<f32>> = twiddles.iter().map(|w| Complex::new(w.re as f32, w.im as f32)).collect();
            let mut fiber = vec![Complex::<f32>::new(0.0, 0.0); m];
            for o in 0..outer {
                for i in 0..inner {
                    for (k, f) in fiber.iter_mut().enumerate() {
                        *f = Complex::new(re[at(o, k, i)] as f32, im[at(o, k, i)] as f32);
                    }
                    butterflies(&mut fiber, &tw);
                    for (k, f) in fiber.iter().enumerate() {
                        re[at(o, k, i)] = f.re as f64;
                        im[at(o, k, i)] = f.im as f64;
                    }
                }
            }
        }
    }
    ComplexTensor::new(x.shape().to_vec(), re, im)
}

/// In-order radix-2 decimation-in-time FFT along `axis`: bit-reversal
/// reorder, then `log2(M)` butterfly stages.
pub fn local_fft(x: &ComplexTensor, axis: usize, mode: PrecisionMode) -> Result<ComplexTensor> {
    let (_, m, _) = x.axis_layout(axis)?;
    if !m.is_power_of_two() {
        return Err(Error::Plan(format!("local transform length {m} is not a power of two")));
    }
    fft_with_table(x, axis, &twiddle_table(m), mode)
}

/// Grid, extents, precision, per-core phase slices (`phase[core][dim]`,
/// each `(N/P) × P`), and twiddle tables keyed by local length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    shape: ComputationShape,
    dims: Vec<usize>,
    precision: PrecisionMode,
    phase: Vec<Vec<ComplexTensor>>,
    twiddles: BTreeMap<usize, Vec<Complex64>>,
}

impl FftPlan {
    pub fn new(dims: &[usize], shape: ComputationShape, precision: PrecisionMode) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::Dimension(format!("rank {} not in 1..=3", dims.len())));
        }
        if let Some(n) = dims.iter().find(|n| !n.is_power_of_two()) {
            return Err(Error::Plan(format!("FFT extent {n} is not a power of two")));
        }
        if let Some(p) = shape.as_array().iter().find(|p| !p.is_power_of_two()) {
            return Err(Error::Plan(format!("FFT core count {p} is not a power of two")));
        }
        shape.validate_extents(dims)?;
        let mut twiddles = BTreeMap::new();
        let phase = (0..shape.num_cores())
            .map(|core| {
                let coord = shape.coord_of(core);
                dims.iter()
                    .enumerate()
                    .map(|(d, &n)| build_phase_slice(n, shape.cores_along(d), coord[d]))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for (d, &n) in dims.iter().enumerate() {
            let m = n / shape.cores_along(d);
            twiddles.entry(m).or_insert_with(|| twiddle_table(m));
        }
        Ok(FftPlan { shape, dims: dims.to_vec(), precision, phase, twiddles })
    }

    pub fn computation_shape(&self) -> ComputationShape {
        self.shape
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn precision(&self) -> PrecisionMode {
        self.precision
    }

    pub fn phase_slice(&self, core: usize, dim: usize) -> &ComplexTensor {
        &self.phase[core][dim]
    }

    fn block_shape(&self) -> Vec<usize> {
        let cores = self.shape.as_array();
        self.dims.iter().zip(cores).map(|(n, p)| n / p).collect()
    }
}

/// One core's side of the strided gather along `axis`: afterwards group
/// position `β` holds `x_{P·l+β}` for `l = 0..N/P` in increasing `l`.
///
/// When `P` divides the block length `M` each core reorders its block by
/// residue mod `P` and a plain `all_to_all` delivers the result in order.
/// When `P > M` each core scatters its `M` elements into a zero-filled
/// length-`P` payload (slot = destination), and after the exchange keeps the
/// `M` slots that came from its sources.
pub async fn strided_gather_on_core(
    ctx: &CoreCtx,
    x: ComplexTensor,
    group: &[usize],
    axis: usize,
) -> Result<ComplexTensor> {
    let p = group.len();
    let (_, m, _) = x.axis_layout(axis)?;
    if !p.is_power_of_two() || !m.is_power_of_two() {
        return Err(Error::Plan(format!("strided gather needs powers of two, got P={p}, M={m}")));
    }
    let pos = group
        .iter()
        .position(|&c| c == ctx.core_id())
        .ok_or_else(|| Error::Protocol(format!("core {} is not in group {group:?}", ctx.core_id())))?;
    if m % p == 0 {
        let order: Vec<usize> = (0..p).flat_map(|beta| (beta..m).step_by(p)).collect();
        let staged = reorder(&x, axis, &order)?;
        return ctx.all_to_all(group, staged, axis).await;
    }
    // P > M: element t of this block has global index pos·M + t and goes to
    // β = (pos mod R)·M + t with R = P/M.
    let r = p / m;
    let zero = ComplexTensor::zeros(x.narrow(axis, 0, 1)?.shape().to_vec())?;
    let first = (pos % r) * m;
    let slots: Vec<ComplexTensor> = (0..p)
        .map(|beta| {
            if (first..first + m).contains(&beta) {
                x.narrow(axis, beta - first, 1)
            } else {
                Ok(zero.clone())
            }
        })
        .collect::<Result<_>>()?;
    let staged = ComplexTensor::concat(&slots, axis)?;
    let received = ctx.all_to_all(group, staged, axis).await?;
    // Sources are q = pos div M + R·l, delivering l in order.
    let keep: Vec<usize> = (0..m).map(|l| pos / m + r * l).collect();
    select(&received, axis, &keep)
}

/// One core's side of the phase adjustment along `axis`: a ring loop that
/// accumulates `phase[r][β] · X̃^{(β)}[r]` over the group.
pub async fn phase_adjust_on_core(
    ctx: &CoreCtx,
    local: ComplexTensor,
    phase: &ComplexTensor,
    group: &[usize],
    axis: usize,
    mode: PrecisionMode,
) -> Result<ComplexTensor> {
    let p = group.len();
    let (_, m, _) = local.axis_layout(axis)?;
    if phase.shape() != [m, p] {
        return Err(Error::Dimension(format!(
            "phase slice {:?} does not match block length {m} and group size {p}",
            phase.shape()
        )));
    }
    let pos = group
        .iter()
        .position(|&c| c == ctx.core_id())
        .ok_or_else(|| Error::Protocol(format!("core {} is not in group {group:?}", ctx.core_id())))?;
    let pairs = ring_pairs(group)?;
    let columns: Vec<Vec<Complex64>> =
        (0..p).map(|beta| (0..m).map(|r| phase.get(&[r, beta])).collect()).collect();

    let step = |held: &Tagged<ComplexTensor>, slice_idx: usize| -> Result<ComplexTensor> {
        let y = scale_along_axis(&held.value, axis, &columns[slice_idx], mode)?;
        ctx.record_einsum(4 * held.value.len() as u64);
        ctx.record_event(CoreEvent::Contract { slice_idx, operand_origin: held.origin });
        Ok(y)
    };

    let mut held = Tagged { origin: pos, value: local };
    let mut slice_idx = pos;
    let mut out = step(&held, slice_idx)?;
    slice_idx = (slice_idx + 1) % p;
    for _ in 0..p - 1 {
        held = ctx.collective_permute(group, &pairs, held).await?;
        out = out.add(&step(&held, slice_idx)?, mode)?;
        slice_idx = (slice_idx + 1) % p;
    }
    Ok(out)
}

/// Forward FFT of a block-decomposed tensor: per dimension (1, 2, 3) a
/// strided gather, a local transform, and the phase adjustment.
pub fn fft_forward(plan: &FftPlan, mesh: &mut MeshSim, blocks: Vec<ComplexTensor>) -> Result<Vec<ComplexTensor>> {
    if mesh.computation_shape() != plan.shape {
        return Err(Error::Dimension(format!(
            "plan is for shape ({}) but the mesh is ({})",
            plan.shape,
            mesh.computation_shape()
        )));
    }
    let want = plan.block_shape();
    if blocks.len() != plan.shape.num_cores() || blocks.iter().any(|b| b.shape() != want.as_slice()) {
        return Err(Error::Dimension(format!(
            "expected {} blocks of shape {want:?}",
            plan.shape.num_cores()
        )));
    }
    let mode = plan.precision;
    mesh.run_spmd(blocks, |ctx, x| async move {
        let mut x = x.to_precision(mode);
        for dim in 0..plan.dims.len() {
            let group = ctx.line(dim);
            let gathered = strided_gather_on_core(&ctx, x, &group, dim).await?;
            let m = gathered.shape()[dim];
            let local = fft_with_table(&gathered, dim, &plan.twiddles[&m], mode)?;
            ctx.record_local_fft(fft_flops(m) * (local.len() / m) as u64);
            let phase = plan.phase_slice(ctx.core_id(), dim);
            x = phase_adjust_on_core(&ctx, local, phase, &group, dim, mode).await?;
        }
        Ok(x)
    })
}
