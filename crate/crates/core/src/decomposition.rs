//! Block decomposition by computation shape and global/local index maps.
//!
//! Cores are numbered lexicographically: core `(p1, p2, p3)` has flat id
//! `p1·P2·P3 + p2·P3 + p3`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ComplexTensor;
use crate::vandermonde::{slice_rows, VandermondeSlice};

/// Logical core grid `(P1, P2, P3)`; absent dimensions use 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComputationShape {
    pub p1: usize,
    pub p2: usize,
    pub p3: usize,
}

impl ComputationShape {
    pub fn new(p1: usize, p2: usize, p3: usize) -> Result<Self> {
        if p1 == 0 || p2 == 0 || p3 == 0 {
            return Err(Error::Argument(format!("core counts must be positive: ({p1},{p2},{p3})")));
        }
        Ok(ComputationShape { p1, p2, p3 })
    }

    pub fn single() -> Self {
        ComputationShape { p1: 1, p2: 1, p3: 1 }
    }

    /// Shape from up to three counts, padding with 1.
    pub fn from_slice(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() || counts.len() > 3 {
            return Err(Error::Argument(format!("expected 1 to 3 core counts, got {}", counts.len())));
        }
        let at = |i: usize| counts.get(i).copied().unwrap_or(1);
        Self::new(at(0), at(1), at(2))
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.p1, self.p2, self.p3]
    }

    pub fn num_cores(&self) -> usize {
        self.p1 * self.p2 * self.p3
    }

    pub fn cores_along(&self, dim: usize) -> usize {
        self.as_array()[dim]
    }

    pub fn coord_of(&self, core: usize) -> [usize; 3] {
        [core / (self.p2 * self.p3), (core / self.p3) % self.p2, core % self.p3]
    }

    pub fn flat_of(&self, coord: [usize; 3]) -> usize {
        (coord[0] * self.p2 + coord[1]) * self.p3 + coord[2]
    }

    /// Cores that share every coordinate of `core` except along `dim`,
    /// ordered by their coordinate along `dim`.
    pub fn line(&self, dim: usize, core: usize) -> Vec<usize> {
        let mut coord = self.coord_of(core);
        (0..self.cores_along(dim))
            .map(|p| {
                coord[dim] = p;
                self.flat_of(coord)
            })
            .collect()
    }

    /// All distinct lines along `dim`, ordered by their first member.
    pub fn lines(&self, dim: usize) -> Vec<Vec<usize>> {
        (0..self.num_cores())
            .filter(|&c| self.coord_of(c)[dim] == 0)
            .map(|c| self.line(dim, c))
            .collect()
    }

    /// Checks that the grid splits data of extents `dims` into equal blocks.
    pub fn validate_extents(&self, dims: &[usize]) -> Result<()> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::Dimension(format!("rank {} not in 1..=3", dims.len())));
        }
        for (d, &p) in self.as_array().iter().enumerate() {
            let n = dims.get(d).copied().unwrap_or(1);
            if n == 0 || n % p != 0 {
                return Err(Error::Decomposition(format!(
                    "{p} cores along dimension {} do not divide extent {n}",
                    d + 1
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ComputationShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.p1, self.p2, self.p3)
    }
}

impl FromStr for ComputationShape {
    type Err = Error;

    /// Accepts `2`, `2,2`, `2x2x4`.
    fn from_str(s: &str) -> Result<Self> {
        let counts = s
            .split([',', 'x'])
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Argument(format!("cannot parse computation shape '{s}'")))?;
        Self::from_slice(&counts)
    }
}

/// Which contiguous block of the global tensor each core owns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockAssignment {
    global_shape: Vec<usize>,
    block_shape: Vec<usize>,
    shape: ComputationShape,
}

impl BlockAssignment {
    pub fn new(global_shape: &[usize], shape: ComputationShape) -> Result<Self> {
        shape.validate_extents(global_shape)?;
        let cores = shape.as_array();
        let block_shape = global_shape.iter().zip(cores).map(|(n, p)| n / p).collect();
        Ok(BlockAssignment { global_shape: global_shape.to_vec(), block_shape, shape })
    }

    pub fn global_shape(&self) -> &[usize] {
        &self.global_shape
    }

    pub fn block_shape(&self) -> &[usize] {
        &self.block_shape
    }

    pub fn computation_shape(&self) -> ComputationShape {
        self.shape
    }

    pub fn num_cores(&self) -> usize {
        self.shape.num_cores()
    }

    /// Global index of the first element of `core`'s block.
    pub fn offsets(&self, core: usize) -> Vec<usize> {
        let coord = self.shape.coord_of(core);
        self.block_shape.iter().zip(coord).map(|(b, p)| b * p).collect()
    }
}

/// Splits `global` into contiguous blocks, one per core in flat-id order.
pub fn decompose(
    global: &ComplexTensor,
    shape: ComputationShape,
) -> Result<(Vec<ComplexTensor>, BlockAssignment)> {
    let assignment = BlockAssignment::new(global.shape(), shape)?;
    let blocks = (0..shape.num_cores())
        .map(|core| {
            let offsets = assignment.offsets(core);
            let mut block = global.clone();
            for (axis, (&start, &len)) in offsets.iter().zip(&assignment.block_shape).enumerate() {
                block = block.narrow(axis, start, len)?;
            }
            Ok(block)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((blocks, assignment))
}

/// Reassembles per-core blocks (flat-id order) into the global tensor.
pub fn gather_to_host(blocks: &[ComplexTensor], assignment: &BlockAssignment) -> Result<ComplexTensor> {
    if blocks.len() != assignment.num_cores() {
        return Err(Error::Assembly(format!(
            "expected {} blocks, got {}",
            assignment.num_cores(),
            blocks.len()
        )));
    }
    let global = &assignment.global_shape;
    let total: usize = global.iter().product();
    let mut re = vec![0.0; total];
    let mut im = vec![0.0; total];
    for (core, block) in blocks.iter().enumerate() {
        if block.shape() != assignment.block_shape.as_slice() {
            return Err(Error::Assembly(format!(
                "block {core} has shape {:?}, expected {:?}",
                block.shape(),
                assignment.block_shape
            )));
        }
        let offsets = assignment.offsets(core);
        let bshape = block.shape();
        for local in 0..block.len() {
            // unravel the local index, shift, and ravel into the global layout
            let mut rem = local;
            let mut flat = 0;
            let mut stride = 1;
            for d in (0..bshape.len()).rev() {
                let i = rem % bshape[d];
                rem /= bshape[d];
                flat += (offsets[d] + i) * stride;
                stride *= global[d];
            }
            re[flat] = block.re()[local];
            im[flat] = block.im()[local];
        }
    }
    ComplexTensor::new(global.clone(), re, im)
}

/// Strided owner of global index `n`: `n = P·l + β` gives `(β, l)`.
pub fn global_to_local(n: usize, n_total: usize, num_cores: usize) -> Result<(usize, usize)> {
    if num_cores == 0 || !n_total.is_multiple_of(num_cores) {
        return Err(Error::Decomposition(format!(
            "{num_cores} cores do not evenly divide extent {n_total}"
        )));
    }
    if n >= n_total {
        return Err(Error::Argument(format!("index {n} out of range for extent {n_total}")));
    }
    Ok((n % num_cores, n / num_cores))
}

/// Inverse of [`global_to_local`]: `P·l + β`.
pub fn local_to_global(core: usize, local: usize, num_cores: usize) -> Result<usize> {
    if core >= num_cores {
        return Err(Error::Argument(format!("core {core} out of range for {num_cores} cores")));
    }
    Ok(num_cores * local + core)
}

/// Per-core Vandermonde row slices: entry `[core][dim]` holds the rows of
/// `matrices[dim]` owned by the core's coordinate along `dim`.
pub fn slices_for_shape(
    matrices: &[ComplexTensor],
    shape: ComputationShape,
) -> Result<Vec<Vec<VandermondeSlice>>> {
    let dims: Vec<usize> = matrices.iter().map(|m| m.shape()[0]).collect();
    shape.validate_extents(&dims)?;
    // Cores sharing a coordinate share the slice; build each once.
    let per_dim: Vec<Vec<VandermondeSlice>> = matrices
        .iter()
        .enumerate()
        .map(|(d, v)| {
            let p = shape.cores_along(d);
            (0..p).map(|i| Ok(slice_rows(v, i, p)?.with_dim_index(d))).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..shape.num_cores())
        .map(|core| {
            let coord = shape.coord_of(core);
            per_dim.iter().enumerate().map(|(d, s)| s[coord[d]].clone()).collect()
        })
        .collect())
}
