//! Dense complex tensors with split real/imaginary planes, tensor
//! contraction along one axis, and precision-mode arithmetic.

mod bf16;
mod matmul;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bf16::{bf16_split, Bf16Value};
pub(crate) use matmul::{mixed_product, Operand};
pub use matmul::{matmul_mixed, Matrix, SPLIT_PAIRS};

/// Arithmetic used for contractions and accumulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionMode {
    /// All arithmetic in `f64`.
    F64Reference,
    /// Products and sums in `f32`.
    F32,
    /// `f32` operands split into three bfloat16 terms, six partial
    /// products, `f32` accumulation.
    Bf16Split3,
}

impl PrecisionMode {
    pub const ALL: [PrecisionMode; 3] =
        [PrecisionMode::F64Reference, PrecisionMode::F32, PrecisionMode::Bf16Split3];

    /// Rounds a stored value to the precision this mode keeps between operations.
    #[inline]
    pub fn round(self, x: f64) -> f64 {
        match self {
            PrecisionMode::F64Reference => x,
            PrecisionMode::F32 | PrecisionMode::Bf16Split3 => x as f32 as f64,
        }
    }

    /// Bytes per complex element on the wire and on disk.
    pub fn complex_bytes(self) -> u64 {
        match self {
            PrecisionMode::F64Reference => 16,
            PrecisionMode::F32 | PrecisionMode::Bf16Split3 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrecisionMode::F64Reference => "f64",
            PrecisionMode::F32 => "f32",
            PrecisionMode::Bf16Split3 => "bf16x3",
        }
    }
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecisionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f64" | "f64_reference" => Ok(PrecisionMode::F64Reference),
            "f32" => Ok(PrecisionMode::F32),
            "bf16x3" | "bf16_split3" => Ok(PrecisionMode::Bf16Split3),
            other => Err(Error::Argument(format!(
                "unknown precision '{other}' (expected f64, f32 or bf16x3)"
            ))),
        }
    }
}

/// Dense rank-1..3 complex tensor, row-major with the last axis fastest.
#[derive(Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl fmt::Debug for ComplexTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexTensor")
            .field("shape", &self.shape)
            .field("values", &self.to_complex_vec())
            .finish()
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > 3 {
        return Err(Error::Dimension(format!("rank {} not in 1..=3", shape.len())));
    }
    if shape.contains(&0) {
        return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
    }
    Ok(shape.iter().product())
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if re.len() != len || im.len() != len {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} values, got re={} im={}",
                re.len(),
                im.len()
            )));
        }
        if re.iter().chain(&im).any(|v| !v.is_finite()) {
            return Err(Error::Argument("tensor values must be finite".into()));
        }
        Ok(ComplexTensor { shape, re, im })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = check_shape(&shape)?;
        Ok(ComplexTensor { shape, re: vec![0.0; len], im: vec![0.0; len] })
    }

    pub fn from_complex(shape: Vec<usize>, values: &[Complex64]) -> Result<Self> {
        let re = values.iter().map(|c| c.re).collect();
        let im = values.iter().map(|c| c.im).collect();
        Self::new(shape, re, im)
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> Complex64) -> Result<Self> {
        let len = check_shape(&shape)?;
        let mut values = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            values.push(f(&idx));
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Self::from_complex(shape, &values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank");
        index.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            assert!(i < n, "index {index:?} out of bounds for {:?}", self.shape);
            acc * n + i
        })
    }

    /// Element at a multi-index. Panics when out of bounds.
    pub fn get(&self, index: &[usize]) -> Complex64 {
        let o = self.offset(index);
        Complex64::new(self.re[o], self.im[o])
    }

    pub fn to_complex_vec(&self) -> Vec<Complex64> {
        self.re.iter().zip(&self.im).map(|(&r, &i)| Complex64::new(r, i)).collect()
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.rank() {
            return Err(Error::Argument(format!(
                "axis {axis} out of range for rank {}",
                self.rank()
            )));
        }
        Ok(())
    }

    /// (elements before the axis, axis extent, elements after the axis).
    pub fn axis_layout(&self, axis: usize) -> Result<(usize, usize, usize)> {
        self.check_axis(axis)?;
        let outer = self.shape[..axis].iter().product();
        let inner = self.shape[axis + 1..].iter().product();
        Ok((outer, self.shape[axis], inner))
    }

    fn with_axis(&self, axis: usize, extent: usize) -> Vec<usize> {
        let mut shape = self.shape.clone();
        shape[axis] = extent;
        shape
    }

    /// Copy of indices `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Self> {
        let (outer, extent, inner) = self.axis_layout(axis)?;
        if len == 0 || start + len > extent {
            return Err(Error::Argument(format!(
                "range {start}..{} outside axis extent {extent}",
                start + len
            )));
        }
        let mut re = Vec::with_capacity(outer * len * inner);
        let mut im = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * extent + start) * inner;
            re.extend_from_slice(&self.re[base..base + len * inner]);
            im.extend_from_slice(&self.im[base..base + len * inner]);
        }
        Ok(ComplexTensor { shape: self.with_axis(axis, len), re, im })
    }

    /// Concatenates tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[ComplexTensor], axis: usize) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("nothing to concatenate".into()))?;
        first.check_axis(axis)?;
        let mut total = 0;
        for p in parts {
            let same_rank = p.rank() == first.rank();
            let same_other = same_rank
                && p.shape.iter().zip(&first.shape).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !same_other {
                return Err(Error::Dimension(format!(
                    "cannot concatenate {:?} with {:?} along axis {axis}",
                    p.shape, first.shape
                )));
            }
            total += p.shape[axis];
        }
        let (outer, _, inner) = first.axis_layout(axis)?;
        let mut re = Vec::with_capacity(outer * total * inner);
        let mut im = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let chunk = p.shape[axis] * inner;
                re.extend_from_slice(&p.re[o * chunk..(o + 1) * chunk]);
                im.extend_from_slice(&p.im[o * chunk..(o + 1) * chunk]);
            }
        }
        Ok(ComplexTensor { shape: first.with_axis(axis, total), re, im })
    }

    pub fn conj(&self) -> Self {
        ComplexTensor {
            shape: self.shape.clone(),
            re: self.re.clone(),
            im: self.im.iter().map(|v| -v).collect(),
        }
    }

    /// Multiplies every element by a real factor, rounding per `mode`.
    pub fn scale(&self, factor: f64, mode: PrecisionMode) -> Self {
        ComplexTensor {
            shape: self.shape.clone(),
            re: self.re.iter().map(|v| mode.round(v * factor)).collect(),
            im: self.im.iter().map(|v| mode.round(v * factor)).collect(),
        }
    }

    /// Elementwise sum, rounding per `mode`.
    pub fn add(&self, other: &ComplexTensor, mode: PrecisionMode) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "cannot add {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let sum = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| mode.round(mode.round(*x) + mode.round(*y))).collect()
        };
        Ok(ComplexTensor { shape: self.shape.clone(), re: sum(&self.re, &other.re), im: sum(&self.im, &other.im) })
    }

    /// Rounds every stored value to the precision of `mode`.
    pub fn to_precision(&self, mode: PrecisionMode) -> Self {
        ComplexTensor {
            shape: self.shape.clone(),
            re: self.re.iter().map(|&v| mode.round(v)).collect(),
            im: self.im.iter().map(|&v| mode.round(v)).collect(),
        }
    }

    /// Same data viewed with a different shape of equal element count.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if len != self.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(ComplexTensor { shape, re: self.re.clone(), im: self.im.clone() })
    }

    pub fn norm_l2(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r.hypot(*i))
            .fold(0.0, f64::max)
    }
}

/// Real multiply-accumulate count of `contract` for a matrix with `rows`
/// rows against a tensor of `tensor_len` elements: `4 · rows · tensor_len`.
pub fn contract_flops(rows: usize, tensor_len: usize) -> u64 {
    4 * rows as u64 * tensor_len as u64
}

/// Contracts a complex `M×K` matrix with `tensor` along `axis`.
///
/// `out[.., m, ..] = Σ_k matrix[m, k] · tensor[.., k, ..]`, computed as four
/// real matrix products (`re = Ar·Br − Ai·Bi`, `im = Ar·Bi + Ai·Br`) under
/// `mode`, each accumulating over `k` in increasing order.
pub fn contract(
    matrix: &ComplexTensor,
    tensor: &ComplexTensor,
    axis: usize,
    mode: PrecisionMode,
) -> Result<ComplexTensor> {
    if matrix.rank() != 2 {
        return Err(Error::Dimension(format!(
            "contraction matrix must be rank 2, got shape {:?}",
            matrix.shape
        )));
    }
    let (rows, k) = (matrix.shape[0], matrix.shape[1]);
    let (outer, extent, inner) = tensor.axis_layout(axis)?;
    if extent != k {
        return Err(Error::Dimension(format!(
            "matrix has {k} columns but tensor axis {axis} has extent {extent}"
        )));
    }
    let ar = Operand::prepare(&matrix.re, mode)?;
    let ai = Operand::prepare(&matrix.im, mode)?;
    let slab_in = k * inner;
    let slab_out = rows * inner;
    let mut re = Vec::with_capacity(outer * slab_out);
    let mut im = Vec::with_capacity(outer * slab_out);
    for o in 0..outer {
        let br = Operand::prepare(&tensor.re[o * slab_in..(o + 1) * slab_in], mode)?;
        let bi = Operand::prepare(&tensor.im[o * slab_in..(o + 1) * slab_in], mode)?;
        let rr = ar.matmul(&br, rows, k, inner);
        let ii = ai.matmul(&bi, rows, k, inner);
        let ri = ar.matmul(&bi, rows, k, inner);
        let ir = ai.matmul(&br, rows, k, inner);
        re.extend(rr.iter().zip(&ii).map(|(a, b)| mode.round(a - b)));
        im.extend(ri.iter().zip(&ir).map(|(a, b)| mode.round(a + b)));
    }
    Ok(ComplexTensor { shape: tensor.with_axis(axis, rows), re, im })
}

/// Multiplies each index `k` along `axis` by `factors[k]` under `mode`.
pub fn scale_along_axis(
    tensor: &ComplexTensor,
    axis: usize,
    factors: &[Complex64],
    mode: PrecisionMode,
) -> Result<ComplexTensor> {
    let (outer, extent, inner) = tensor.axis_layout(axis)?;
    if factors.len() != extent {
        return Err(Error::Dimension(format!(
            "{} factors for axis extent {extent}",
            factors.len()
        )));
    }
    let mut re = Vec::with_capacity(tensor.len());
    let mut im = Vec::with_capacity(tensor.len());
    for o in 0..outer {
        for (k, f) in factors.iter().enumerate() {
            for i in 0..inner {
                let at = (o * extent + k) * inner + i;
                let (xr, xi) = (tensor.re[at], tensor.im[at]);
                let rr = mixed_product(f.re, xr, mode)?;
                let ii = mixed_product(f.im, xi, mode)?;
                let ri = mixed_product(f.re, xi, mode)?;
                let ir = mixed_product(f.im, xr, mode)?;
                re.push(mode.round(rr - ii));
                im.push(mode.round(ri + ir));
            }
        }
    }
    Ok(ComplexTensor { shape: tensor.shape.clone(), re, im })
}

/// `out[.., i, ..] = tensor[.., permutation[i], ..]`.
pub fn reorder(tensor: &ComplexTensor, axis: usize, permutation: &[usize]) -> Result<ComplexTensor> {
    let (outer, extent, inner) = tensor.axis_layout(axis)?;
    if permutation.len() != extent {
        return Err(Error::Argument(format!(
            "permutation of length {} for axis extent {extent}",
            permutation.len()
        )));
    }
    let mut seen = vec![false; extent];
    for &p in permutation {
        if p >= extent || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Argument(format!("{permutation:?} is not a permutation")));
        }
    }
    gather_indices(tensor, axis, outer, extent, inner, permutation)
}

/// `out[.., i, ..] = tensor[.., indices[i], ..]`; indices may repeat or skip.
pub fn select(tensor: &ComplexTensor, axis: usize, indices: &[usize]) -> Result<ComplexTensor> {
    let (outer, extent, inner) = tensor.axis_layout(axis)?;
    if indices.is_empty() || indices.iter().any(|&i| i >= extent) {
        return Err(Error::Argument(format!("indices {indices:?} invalid for axis extent {extent}")));
    }
    gather_indices(tensor, axis, outer, extent, inner, indices)
}

fn gather_indices(
    tensor: &ComplexTensor,
    axis: usize,
    outer: usize,
    extent: usize,
    inner: usize,
    indices: &[usize],
) -> Result<ComplexTensor> {
    let len = outer * indices.len() * inner;
    let mut re = Vec::with_capacity(len);
    let mut im = Vec::with_capacity(len);
    for o in 0..outer {
        for &src in indices {
            let base = (o * extent + src) * inner;
            re.extend_from_slice(&tensor.re[base..base + inner]);
            im.extend_from_slice(&tensor.im[base..base + inner]);
        }
    }
    Ok(ComplexTensor { shape: tensor.with_axis(axis, indices.len()), re, im })
}
