//! Vandermonde matrices `V[k][n] = z_k^{-n}` for uniform and nonuniform
//! sampling, their per-core row slices, and FFT phase-adjustment factors.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ComplexTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    UniformUnitCircle,
    Arbitrary,
}

/// Points `z_k` on the z-plane at which a transform is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoints {
    points: Vec<Complex64>,
    kind: SamplingKind,
}

impl SamplePoints {
    /// `z_k = exp(j·2πk/n)`, the ordinary DFT frequencies.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("sample count must be at least 1".into()));
        }
        let points = (0..n).map(|k| Complex64::from_polar(1.0, TAU * k as f64 / n as f64)).collect();
        Ok(SamplePoints { points, kind: SamplingKind::UniformUnitCircle })
    }

    /// Caller-supplied points. Duplicates are allowed; zero is not.
    pub fn arbitrary(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("sample count must be at least 1".into()));
        }
        if let Some(k) = points.iter().position(|z| z.norm() == 0.0 || !z.is_finite()) {
            return Err(Error::Argument(format!(
                "sample point {k} is {}; points must be finite and nonzero",
                points[k]
            )));
        }
        Ok(SamplePoints { points, kind: SamplingKind::Arbitrary })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn kind(&self) -> SamplingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.kind == SamplingKind::UniformUnitCircle
    }
}

/// `exp(-j·2π·num/den)` with the phase reduced exactly in integers first.
fn root_of_unity(num: usize, den: usize) -> Complex64 {
    let reduced = (num % den) as f64;
    Complex64::from_polar(1.0, -TAU * reduced / den as f64)
}

/// The `n×n` DFT matrix `V[k][m] = exp(-j·2πkm/n)`.
pub fn build_uniform(n: usize) -> Result<ComplexTensor> {
    if n == 0 {
        return Err(Error::Argument("matrix size must be at least 1".into()));
    }
    ComplexTensor::from_fn(vec![n, n], |i| root_of_unity(i[0] * i[1], n))
}

/// `V[k][n] = z_k^{-n}` by one reciprocal per point and repeated multiplication.
pub fn build_nonuniform(samples: &SamplePoints) -> Result<ComplexTensor> {
    let n = samples.len();
    if let Some(z) = samples.points.iter().find(|z| z.norm() == 0.0) {
        return Err(Error::Argument(format!("sample point {z} has no negative powers")));
    }
    let mut values = Vec::with_capacity(n * n);
    for z in &samples.points {
        let step = z.inv();
        let mut power = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            values.push(power);
            power *= step;
        }
    }
    ComplexTensor::from_complex(vec![n, n], &values)
}

/// Uniform points get the exactly-reduced DFT matrix, others the power iteration.
pub fn build_for(samples: &SamplePoints) -> Result<ComplexTensor> {
    match samples.kind {
        SamplingKind::UniformUnitCircle => build_uniform(samples.len()),
        SamplingKind::Arbitrary => build_nonuniform(samples),
    }
}

fn check_partition(n: usize, num_cores: usize, core_index: usize) -> Result<usize> {
    if num_cores == 0 || !n.is_multiple_of(num_cores) {
        return Err(Error::Decomposition(format!(
            "{num_cores} cores do not evenly divide extent {n}"
        )));
    }
    if core_index >= num_cores {
        return Err(Error::Argument(format!(
            "core index {core_index} out of range for {num_cores} cores"
        )));
    }
    Ok(n / num_cores)
}

/// The `(N/P) × N` row block of a Vandermonde (or phase) matrix held by one core.
#[derive(Debug, Clone, PartialEq)]
pub struct VandermondeSlice {
    rows: ComplexTensor,
    core_index: usize,
    num_cores: usize,
    dim_index: usize,
}

impl VandermondeSlice {
    pub fn rows(&self) -> &ComplexTensor {
        &self.rows
    }

    pub fn core_index(&self) -> usize {
        self.core_index
    }

    pub fn num_cores(&self) -> usize {
        self.num_cores
    }

    /// Tensor dimension (0-based) this slice transforms.
    pub fn dim_index(&self) -> usize {
        self.dim_index
    }

    pub fn with_dim_index(mut self, dim_index: usize) -> Self {
        self.dim_index = dim_index;
        self
    }

    /// Column block `j` of width `N/P`: the part that multiplies the input
    /// block originally owned by group position `j`.
    pub fn column_block(&self, j: usize) -> Result<ComplexTensor> {
        if j >= self.num_cores {
            return Err(Error::Argument(format!(
                "column block {j} out of range for {} cores",
                self.num_cores
            )));
        }
        let width = self.rows.shape()[1] / self.num_cores;
        self.rows.narrow(1, j * width, width)
    }

    pub fn conj(&self) -> Self {
        VandermondeSlice { rows: self.rows.conj(), ..self.clone() }
    }
}

/// Rows `[p·N/P, (p+1)·N/P)` of a square matrix.
pub fn slice_rows(v: &ComplexTensor, core_index: usize, num_cores: usize) -> Result<VandermondeSlice> {
    if v.rank() != 2 || v.shape()[0] != v.shape()[1] {
        return Err(Error::Dimension(format!("expected a square matrix, got {:?}", v.shape())));
    }
    let block = check_partition(v.shape()[0], num_cores, core_index)?;
    Ok(VandermondeSlice {
        rows: v.narrow(0, core_index * block, block)?,
        core_index,
        num_cores,
        dim_index: 0,
    })
}

/// Phase factors for the FFT combination step on core `p`:
/// entry `[r][β] = exp(-j·2π·β·(p·N/P + r)/N)`.
pub fn build_phase_slice(n_total: usize, num_cores: usize, core_index: usize) -> Result<ComplexTensor> {
    let block = check_partition(n_total, num_cores, core_index)?;
    ComplexTensor::from_fn(vec![block, num_cores], |i| {
        let k = core_index * block + i[0];
        root_of_unity(i[1] * k, n_total)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn uniform_small_cases() {
        assert_eq!(build_uniform(1).unwrap().to_complex_vec(), vec![c(1., 0.)]);
        let v2 = build_uniform(2).unwrap().to_complex_vec();
        let want2 = [c(1., 0.), c(1., 0.), c(1., 0.), c(-1., 0.)];
        assert!(v2.iter().zip(&want2).all(|(a, b)| close(*a, *b, 1e-15)));
        let v4 = build_uniform(4).unwrap();
        let row1: Vec<_> = (0..4).map(|m| v4.get(&[1, m])).collect();
        let want = [c(1., 0.), c(0., -1.), c(-1., 0.), c(0., 1.)];
        assert!(row1.iter().zip(&want).all(|(a, b)| close(*a, *b, 1e-15)));
        assert!(build_uniform(0).is_err());
    }

    #[test]
    fn uniform_is_scaled_unitary() {
        for n in [3usize, 8, 12] {
            let v = build_uniform(n).unwrap();
            for a in 0..n {
                for b in 0..n {
                    let s: Complex64 = (0..n).map(|m| v.get(&[a, m]) * v.get(&[b, m]).conj()).sum();
                    let want = if a == b { c(1., 0.) } else { c(0., 0.) };
                    assert!(close(s / n as f64, want, 1e-12));
                    let s2: Complex64 = (0..n).map(|m| v.get(&[m, a]).conj() * v.get(&[m, b])).sum();
                    assert!(close(s2 / n as f64, want, 1e-12));
                }
            }
        }
    }

    #[test]
    fn nonuniform_matches_uniform_points() {
        let v = build_nonuniform(&SamplePoints::uniform(4).unwrap()).unwrap();
        let u = build_uniform(4).unwrap();
        for (a, b) in v.to_complex_vec().iter().zip(u.to_complex_vec()) {
            assert!(close(*a, b, 1e-12));
        }
    }

    #[test]
    fn nonuniform_real_points() {
        let s = SamplePoints::arbitrary(vec![c(2., 0.), c(4., 0.)]).unwrap();
        let v = build_nonuniform(&s).unwrap().to_complex_vec();
        assert_eq!(v, vec![c(1., 0.), c(0.5, 0.), c(1., 0.), c(0.25, 0.)]);
        // Duplicates construct fine.
        let d = SamplePoints::arbitrary(vec![c(2., 0.), c(2., 0.)]).unwrap();
        assert_eq!(build_nonuniform(&d).unwrap().to_complex_vec()[2], c(1., 0.));
        assert!(SamplePoints::arbitrary(vec![c(1., 0.), c(0., 0.)]).is_err());
        assert!(SamplePoints::arbitrary(vec![]).is_err());
    }

    #[test]
    fn nonuniform_product_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 8;
        let pts: Vec<_> = (0..n).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..TAU))).collect();
        let x: Vec<_> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let v = build_nonuniform(&SamplePoints::arbitrary(pts.clone()).unwrap()).unwrap();
        for (k, z) in pts.iter().enumerate() {
            let via_matrix: Complex64 = (0..n).map(|m| v.get(&[k, m]) * x[m]).sum();
            let direct: Complex64 = (0..n).map(|m| x[m] * z.powi(-(m as i32))).sum();
            assert!(close(via_matrix, direct, 1e-12));
        }
    }

    #[test]
    fn slices_partition_the_matrix() {
        let v = build_uniform(4).unwrap();
        assert_eq!(slice_rows(&v, 0, 1).unwrap().rows(), &v);
        let s = slice_rows(&v, 1, 2).unwrap();
        assert_eq!(s.rows(), &v.narrow(0, 2, 2).unwrap());
        let parts: Vec<_> = (0..4).map(|p| slice_rows(&v, p, 4).unwrap().rows().clone()).collect();
        assert_eq!(ComplexTensor::concat(&parts, 0).unwrap(), v);
        assert!(matches!(slice_rows(&v, 0, 3), Err(Error::Decomposition(_))));
        assert!(matches!(slice_rows(&v, 2, 2), Err(Error::Argument(_))));
    }

    #[test]
    fn column_blocks_tile_the_slice() {
        let v = build_uniform(6).unwrap();
        let s = slice_rows(&v, 1, 3).unwrap();
        let blocks: Vec<_> = (0..3).map(|j| s.column_block(j).unwrap()).collect();
        assert!(blocks.iter().all(|b| b.shape() == [2, 2]));
        assert_eq!(&ComplexTensor::concat(&blocks, 1).unwrap(), s.rows());
        assert!(s.column_block(3).is_err());
    }

    #[test]
    fn phase_slice_examples() {
        let ones = build_phase_slice(8, 1, 0).unwrap();
        assert_eq!(ones.shape(), &[8, 1]);
        assert!(ones.to_complex_vec().iter().all(|z| *z == c(1., 0.)));
        let p = build_phase_slice(4, 2, 0).unwrap().to_complex_vec();
        let want = [c(1., 0.), c(1., 0.), c(1., 0.), c(0., -1.)];
        assert!(p.iter().zip(&want).all(|(a, b)| close(*a, *b, 1e-15)));
        assert!(matches!(build_phase_slice(6, 4, 0), Err(Error::Decomposition(_))));
    }

    #[test]
    fn phase_slices_combine_local_transforms() {
        // Eight-point DFT assembled from four strided two-point DFTs.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, p) = (8usize, 4usize);
        let m = n / p;
        let x: Vec<_> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let locals: Vec<Vec<Complex64>> = (0..p)
            .map(|beta| {
                (0..m)
                    .map(|k| (0..m).map(|l| x[p * l + beta] * root_of_unity(l * k, m)).sum())
                    .collect()
            })
            .collect();
        for core in 0..p {
            let phase = build_phase_slice(n, p, core).unwrap();
            for r in 0..m {
                let k = core * m + r;
                let got: Complex64 = (0..p).map(|beta| phase.get(&[r, beta]) * locals[beta][r]).sum();
                let want: Complex64 = (0..n).map(|j| x[j] * Complex64::from_polar(1.0, -TAU * (j * k) as f64 / n as f64)).sum();
                assert!(close(got, want, 1e-12));
            }
        }
    }
}
