//! Synthetic inputs.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ComplexTensor;
use crate::vandermonde::SamplePoints;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// 1 at the origin, 0 elsewhere.
    Delta,
    /// All ones.
    Constant,
    /// `exp(j·2π·k·n_i/N_i)` along every axis.
    Tone(usize),
    /// Real and imaginary parts uniform in `[-1, 1)`, seeded.
    Random,
}

impl Generator {
    pub fn generate(self, dims: &[usize], seed: u64) -> Result<ComplexTensor> {
        match self {
            Generator::Delta => ComplexTensor::from_fn(dims.to_vec(), |i| {
                Complex64::new(if i.iter().all(|&v| v == 0) { 1.0 } else { 0.0 }, 0.0)
            }),
            Generator::Constant => ComplexTensor::from_fn(dims.to_vec(), |_| Complex64::new(1.0, 0.0)),
            Generator::Tone(k) => ComplexTensor::from_fn(dims.to_vec(), |i| {
                i.iter()
                    .zip(dims)
                    .map(|(&n, &len)| Complex64::from_polar(1.0, TAU * ((k * n) % len) as f64 / len as f64))
                    .product()
            }),
            Generator::Random => random_tensor(dims, seed),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Delta => write!(f, "delta"),
            Generator::Constant => write!(f, "constant"),
            Generator::Tone(k) => write!(f, "tone:{k}"),
            Generator::Random => write!(f, "random"),
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    /// `delta`, `constant`, `tone:K` or `random`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Generator::Delta),
            "constant" => Ok(Generator::Constant),
            "random" => Ok(Generator::Random),
            _ => match s.strip_prefix("tone:") {
                Some(k) => k
                    .parse()
                    .map(Generator::Tone)
                    .map_err(|_| Error::Argument(format!("bad tone frequency in {s:?}"))),
                None => Err(Error::Argument(format!(
                    "unknown generator {s:?} (expected delta, constant, tone:K or random)"
                ))),
            },
        }
    }
}

pub fn random_tensor(dims: &[usize], seed: u64) -> Result<ComplexTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexTensor::from_fn(dims.to_vec(), |_| {
        let re = rng.gen_range(-1.0..1.0);
        Complex64::new(re, rng.gen_range(-1.0..1.0))
    })
}

/// `n` distinct seeded points on the unit circle.
pub fn random_unit_circle(n: usize, seed: u64) -> Result<SamplePoints> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut angles: Vec<f64> = Vec::with_capacity(n);
    while angles.len() < n {
        let a = rng.gen_range(0.0..TAU);
        if angles.iter().all(|b| (a - b).abs() > 1e-9) {
            angles.push(a);
        }
    }
    SamplePoints::arbitrary(angles.into_iter().map(|a| Complex64::from_polar(1.0, a)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators() {
        let d = Generator::Delta.generate(&[2, 2], 0).unwrap();
        assert_eq!(d.re(), &[1., 0., 0., 0.]);
        let c = Generator::Constant.generate(&[3], 0).unwrap();
        assert_eq!(c.re(), &[1., 1., 1.]);
        let t = Generator::Tone(1).generate(&[4], 0).unwrap();
        assert!((t.get(&[1]) - Complex64::new(0., 1.)).norm() < 1e-15);
        assert_eq!(Generator::Random.generate(&[5], 9).unwrap(), Generator::Random.generate(&[5], 9).unwrap());
        assert_ne!(Generator::Random.generate(&[5], 9).unwrap(), Generator::Random.generate(&[5], 8).unwrap());
    }

    #[test]
    fn parse_and_display() {
        for g in [Generator::Delta, Generator::Constant, Generator::Tone(3), Generator::Random] {
            assert_eq!(g.to_string().parse::<Generator>().unwrap(), g);
        }
        assert!("tone:x".parse::<Generator>().is_err());
        assert!("noise".parse::<Generator>().is_err());
    }

    #[test]
    fn unit_circle_points_are_distinct() {
        let s = random_unit_circle(64, 1).unwrap();
        assert_eq!(s.len(), 64);
        for (i, a) in s.points().iter().enumerate() {
            assert!((a.norm() - 1.0).abs() < 1e-15);
            assert!(s.points()[i + 1..].iter().all(|b| (a - b).norm() > 1e-10));
        }
    }
}
