//! Brute-force reference transforms, evaluated straight from the defining
//! sums `X(z_k) = Σ_n x_n z_k^{-n}` in `f64`.
//!
//! Nothing here may depend on the engines or on the Vandermonde builders:
//! powers come from polar form rather than repeated multiplication.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::ComplexTensor;
use crate::vandermonde::SamplePoints;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub values: ComplexTensor,
    /// Largest magnitude in `values`, for relative-error scaling.
    pub max_abs: f64,
}

impl OracleResult {
    fn new(values: ComplexTensor) -> Self {
        let max_abs = values.max_abs();
        OracleResult { values, max_abs }
    }
}

/// `z^{-n}` as `|z|^{-n} · exp(-j·n·arg z)`.
fn neg_power(z: Complex64, n: usize) -> Complex64 {
    let (r, theta) = z.to_polar();
    Complex64::from_polar(r.powi(-(n as i32)), -(n as f64) * theta)
}

fn power_row(z: Complex64, len: usize) -> Vec<Complex64> {
    (0..len).map(|n| neg_power(z, n)).collect()
}

/// Naive `O(N²)` transform of a vector at arbitrary points.
pub fn direct_dft(x: &ComplexTensor, samples: &SamplePoints) -> Result<OracleResult> {
    if x.rank() != 1 {
        return Err(Error::Dimension(format!("expected a vector, got shape {:?}", x.shape())));
    }
    let n = x.len();
    if samples.len() != n {
        return Err(Error::Dimension(format!("{} sample points for {n} inputs", samples.len())));
    }
    let xs = x.to_complex_vec();
    let out: Vec<Complex64> = samples
        .points()
        .iter()
        .map(|&z| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, xm) in xs.iter().enumerate() {
                acc += xm * neg_power(z, m);
            }
            acc
        })
        .collect();
    Ok(OracleResult::new(ComplexTensor::from_complex(vec![n], &out)?))
}

/// Naive transform of a rank-3 tensor sampled on a rectangular grid.
pub fn direct_dft_3d(x: &ComplexTensor, samples: [&SamplePoints; 3]) -> Result<OracleResult> {
    if x.rank() != 3 {
        return Err(Error::Dimension(format!("expected rank 3, got shape {:?}", x.shape())));
    }
    let shape = x.shape().to_vec();
    for (d, s) in samples.iter().enumerate() {
        if s.len() != shape[d] {
            return Err(Error::Dimension(format!(
                "{} sample points for extent {} along dimension {}",
                s.len(),
                shape[d],
                d + 1
            )));
        }
    }
    let (n1, n2, n3) = (shape[0], shape[1], shape[2]);
    let xs = x.to_complex_vec();
    let mut out = Vec::with_capacity(xs.len());
    for &z1 in samples[0].points() {
        let r1 = power_row(z1, n1);
        for &z2 in samples[1].points() {
            let r2 = power_row(z2, n2);
            for &z3 in samples[2].points() {
                let r3 = power_row(z3, n3);
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..n1 {
                    for b in 0..n2 {
                        let f12 = r1[a] * r2[b];
                        let row = &xs[(a * n2 + b) * n3..(a * n2 + b + 1) * n3];
                        for (c, xv) in row.iter().enumerate() {
                            acc += xv * f12 * r3[c];
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    Ok(OracleResult::new(ComplexTensor::from_complex(shape, &out)?))
}

/// Rank-1..3 convenience wrapper over [`direct_dft_3d`].
pub fn direct_dft_nd(x: &ComplexTensor, samples: &[SamplePoints]) -> Result<OracleResult> {
    if samples.len() != x.rank() {
        return Err(Error::Dimension(format!(
            "{} sample sets for a rank-{} tensor",
            samples.len(),
            x.rank()
        )));
    }
    let unit = SamplePoints::uniform(1)?;
    let mut shape3 = x.shape().to_vec();
    shape3.resize(3, 1);
    let pick = |d: usize| samples.get(d).unwrap_or(&unit);
    let result = direct_dft_3d(&x.reshape(shape3)?, [pick(0), pick(1), pick(2)])?;
    Ok(OracleResult::new(result.values.reshape(x.shape().to_vec())?))
}

/// `‖a − b‖₂ / ‖b‖₂`, or `‖a‖₂` when `b` is all zeros.
pub fn relative_l2_error(a: &ComplexTensor, b: &ComplexTensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("cannot compare {:?} with {:?}", a.shape(), b.shape())));
    }
    let diff: f64 = a
        .re()
        .iter()
        .zip(b.re())
        .chain(a.im().iter().zip(b.im()))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let norm = b.norm_l2();
    Ok(if norm == 0.0 { a.norm_l2() } else { diff / norm })
}

/// `max |a − b| / max |b|` over elements (0 when both vanish).
pub fn max_relative_error(a: &ComplexTensor, b: &ComplexTensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("cannot compare {:?} with {:?}", a.shape(), b.shape())));
    }
    let worst = a
        .to_complex_vec()
        .iter()
        .zip(b.to_complex_vec())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let scale = b.max_abs();
    Ok(if scale == 0.0 { worst } else { worst / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn delta_and_constant() {
        let delta = ComplexTensor::from_complex(vec![4], &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]).unwrap();
        let u = SamplePoints::uniform(4).unwrap();
        let r = direct_dft(&delta, &u).unwrap();
        assert!(r.values.to_complex_vec().iter().all(|v| (v - c(1., 0.)).norm() < 1e-15));
        let ones = ComplexTensor::from_complex(vec![4], &[c(1., 0.); 4]).unwrap();
        let r = direct_dft(&ones, &u).unwrap().values.to_complex_vec();
        let want = [c(4., 0.), c(0., 0.), c(0., 0.), c(0., 0.)];
        assert!(r.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-14));
        assert!(direct_dft(&ones, &SamplePoints::uniform(3).unwrap()).is_err());
    }

    #[test]
    fn summation_order_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 32;
        let pts: Vec<_> = (0..n).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..TAU))).collect();
        let xs = random_vec(n, &mut rng);
        let x = ComplexTensor::from_complex(vec![n], &xs).unwrap();
        let forward = direct_dft(&x, &SamplePoints::arbitrary(pts.clone()).unwrap()).unwrap();
        for (k, z) in pts.iter().enumerate() {
            let mut rev = c(0., 0.);
            for m in (0..n).rev() {
                rev += xs[m] * neg_power(*z, m);
            }
            assert!((rev - forward.values.get(&[k])).norm() < 1e-12);
        }
    }

    #[test]
    fn single_element_3d() {
        let x = ComplexTensor::from_complex(vec![1, 1, 1], &[c(2., -3.)]).unwrap();
        let u = SamplePoints::uniform(1).unwrap();
        assert_eq!(direct_dft_3d(&x, [&u, &u, &u]).unwrap().values, x);
    }

    #[test]
    fn separable_input_gives_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (a, b, d) = (random_vec(4, &mut rng), random_vec(3, &mut rng), random_vec(5, &mut rng));
        let s1 = SamplePoints::uniform(4).unwrap();
        let pts: Vec<_> = (0..3).map(|_| Complex64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(0.0..TAU))).collect();
        let s2 = SamplePoints::arbitrary(pts).unwrap();
        let s3 = SamplePoints::uniform(5).unwrap();
        let x = ComplexTensor::from_fn(vec![4, 3, 5], |i| a[i[0]] * b[i[1]] * d[i[2]]).unwrap();
        let full = direct_dft_3d(&x, [&s1, &s2, &s3]).unwrap().values;
        let fa = direct_dft(&ComplexTensor::from_complex(vec![4], &a).unwrap(), &s1).unwrap().values;
        let fb = direct_dft(&ComplexTensor::from_complex(vec![3], &b).unwrap(), &s2).unwrap().values;
        let fd = direct_dft(&ComplexTensor::from_complex(vec![5], &d).unwrap(), &s3).unwrap().values;
        for i in 0..4 {
            for j in 0..3 {
                for k in 0..5 {
                    let want = fa.get(&[i]) * fb.get(&[j]) * fd.get(&[k]);
                    assert!((full.get(&[i, j, k]) - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn nd_wrapper_agrees_with_1d() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let xs = random_vec(8, &mut rng);
        let x = ComplexTensor::from_complex(vec![8], &xs).unwrap();
        let s = SamplePoints::uniform(8).unwrap();
        let a = direct_dft(&x, &s).unwrap().values;
        let b = direct_dft_nd(&x, &[s]).unwrap().values;
        assert!(relative_l2_error(&b, &a).unwrap() < 1e-15);
    }

    #[test]
    fn relative_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let b = ComplexTensor::from_complex(vec![6], &random_vec(6, &mut rng)).unwrap();
        assert_eq!(relative_l2_error(&b, &b).unwrap(), 0.0);
        let a = b.scale(2.0, crate::PrecisionMode::F64Reference);
        assert!((relative_l2_error(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        let eps = 1e-3;
        let mut re = b.re().to_vec();
        re[2] += eps;
        let pert = ComplexTensor::new(vec![6], re, b.im().to_vec()).unwrap();
        let want = eps / b.norm_l2();
        assert!((relative_l2_error(&pert, &b).unwrap() - want).abs() < 1e-12);
        let zero = ComplexTensor::zeros(vec![6]).unwrap();
        assert!((relative_l2_error(&b, &zero).unwrap() - b.norm_l2()).abs() < 1e-15);
        assert!(relative_l2_error(&b, &ComplexTensor::zeros(vec![3]).unwrap()).is_err());
    }
}
