//! Real matrix multiply with selectable arithmetic.
//!
//! `Bf16Split3` emulates a bfloat16 multiply unit with `f32` accumulation:
//! every operand is split into three bfloat16 terms and the six partial
//! products with term indices `i + j <= 4` (1-based) are accumulated.

use super::bf16::bf16_split;
use super::PrecisionMode;
use crate::error::{Error, Result};

/// Partial-product order for the three-term split, as (a-term, b-term).
pub const SPLIT_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (1, 0), (0, 2), (2, 0), (1, 1)];

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// `a · b` with the arithmetic prescribed by `mode`.
pub fn matmul_mixed(a: &Matrix, b: &Matrix, mode: PrecisionMode) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let lhs = Operand::prepare(&a.data, mode)?;
    let rhs = Operand::prepare(&b.data, mode)?;
    let data = lhs.matmul(&rhs, a.rows, a.cols, b.cols);
    Matrix::new(a.rows, b.cols, data)
}

/// A matrix operand converted once into the representation a mode computes with.
#[derive(Debug, Clone)]
pub(crate) enum Operand {
    F64(Vec<f64>),
    F32(Vec<f32>),
    Split([Vec<f32>; 3]),
}

impl Operand {
    pub(crate) fn prepare(values: &[f64], mode: PrecisionMode) -> Result<Self> {
        Ok(match mode {
            PrecisionMode::F64Reference => Operand::F64(values.to_vec()),
            PrecisionMode::F32 => Operand::F32(values.iter().map(|&v| v as f32).collect()),
            PrecisionMode::Bf16Split3 => {
                let mut terms = [
                    Vec::with_capacity(values.len()),
                    Vec::with_capacity(values.len()),
                    Vec::with_capacity(values.len()),
                ];
                for &v in values {
                    let h = bf16_split(v as f32)?;
                    for (t, hv) in terms.iter_mut().zip(h) {
                        t.push(hv.to_f32());
                    }
                }
                Operand::Split(terms)
            }
        })
    }

    /// `self (m×k) · rhs (k×n)`; every output element accumulates in increasing `k`.
    pub(crate) fn matmul(&self, rhs: &Operand, m: usize, k: usize, n: usize) -> Vec<f64> {
        match (self, rhs) {
            (Operand::F64(a), Operand::F64(b)) => {
                let mut out = vec![0.0f64; m * n];
                for i in 0..m {
                    let row = &mut out[i * n..(i + 1) * n];
                    for p in 0..k {
                        let aip = a[i * k + p];
                        for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                            *o += aip * bv;
                        }
                    }
                }
                out
            }
            (Operand::F32(a), Operand::F32(b)) => {
                widen(&matmul_f32(a, b, m, k, n))
            }
            (Operand::Split(a), Operand::Split(b)) => {
                let mut total = vec![0.0f32; m * n];
                for &(i, j) in &SPLIT_PAIRS {
                    let partial = matmul_f32(&a[i], &b[j], m, k, n);
                    for (t, p) in total.iter_mut().zip(partial) {
                        *t += p;
                    }
                }
                widen(&total)
            }
            _ => unreachable!("operands prepared with different modes"),
        }
    }
}

fn matmul_f32(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Scalar product `a · b` under `mode`, matching [`matmul_mixed`] for a 1×1×1 case.
pub(crate) fn mixed_product(a: f64, b: f64, mode: PrecisionMode) -> Result<f64> {
    Ok(match mode {
        PrecisionMode::F64Reference => a * b,
        PrecisionMode::F32 => ((a as f32) * (b as f32)) as f64,
        PrecisionMode::Bf16Split3 => {
            let ha = bf16_split(a as f32)?;
            let hb = bf16_split(b as f32)?;
            let mut acc = 0.0f32;
            for &(i, j) in &SPLIT_PAIRS {
                acc += ha[i].to_f32() * hb[j].to_f32();
            }
            acc as f64
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MODES: [PrecisionMode; 3] =
        [PrecisionMode::F64Reference, PrecisionMode::F32, PrecisionMode::Bf16Split3];

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_is_exact_in_every_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random(5, 4, &mut rng);
        for mode in MODES {
            let out = matmul_mixed(&Matrix::identity(5), &b, mode).unwrap();
            let expected: Vec<f64> = match mode {
                PrecisionMode::F64Reference => b.data().to_vec(),
                _ => b.data().iter().map(|&v| v as f32 as f64).collect(),
            };
            assert_eq!(out.data(), &expected[..], "{mode:?}");
        }
    }

    #[test]
    fn small_integers_exact() {
        let a = Matrix::new(1, 1, vec![3.0]).unwrap();
        let b = Matrix::new(1, 1, vec![5.0]).unwrap();
        for mode in MODES {
            assert_eq!(matmul_mixed(&a, &b, mode).unwrap().data(), &[15.0]);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = Matrix::new(2, 3, vec![0.0; 6]).unwrap();
        let b = Matrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(matmul_mixed(&a, &b, PrecisionMode::F32), Err(Error::Dimension(_))));
    }

    #[test]
    fn split_beats_plain_bf16() {
        // A single bf16 term per operand would lose ~3 significant digits.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(16, 16, &mut rng);
        let b = random(16, 16, &mut rng);
        let exact = matmul_mixed(&a, &b, PrecisionMode::F64Reference).unwrap();
        let split = matmul_mixed(&a, &b, PrecisionMode::Bf16Split3).unwrap();
        let err = exact
            .data()
            .iter()
            .zip(split.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn scalar_product_matches_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (x, y) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let a = Matrix::new(1, 1, vec![x]).unwrap();
            let b = Matrix::new(1, 1, vec![y]).unwrap();
            for mode in MODES {
                assert_eq!(
                    mixed_product(x, y, mode).unwrap(),
                    matmul_mixed(&a, &b, mode).unwrap().data()[0]
                );
            }
        }
    }
}
