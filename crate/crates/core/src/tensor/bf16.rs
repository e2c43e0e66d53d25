use std::fmt;

use crate::error::{Error, Result};

/// A bfloat16 value: 1 sign bit, 8 exponent bits, 7 mantissa bits.
///
/// Conversion from `f32` rounds to nearest, ties to even.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Bf16Value(u16);

impl Bf16Value {
    pub const ZERO: Bf16Value = Bf16Value(0);

    pub const fn from_bits(bits: u16) -> Self {
        Bf16Value(bits)
    }

    pub const fn to_bits(self) -> u16 {
        self.0
    }

    pub fn from_f32(x: f32) -> Self {
        let bits = x.to_bits();
        if x.is_nan() {
            // keep it a quiet NaN after truncation
            return Bf16Value(((bits >> 16) as u16) | 0x0040);
        }
        let lsb = (bits >> 16) & 1;
        let rounded = bits.wrapping_add(0x7fff + lsb);
        Bf16Value((rounded >> 16) as u16)
    }

    pub fn to_f32(self) -> f32 {
        f32::from_bits(u32::from(self.0) << 16)
    }

    pub fn is_finite(self) -> bool {
        self.to_f32().is_finite()
    }
}

impl fmt::Debug for Bf16Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bf16Value({:#06x} = {})", self.0, self.to_f32())
    }
}

impl From<Bf16Value> for f32 {
    fn from(v: Bf16Value) -> f32 {
        v.to_f32()
    }
}

/// Splits `x` into three bfloat16 terms whose exact sum reproduces `x`.
///
/// `h1 = bf16(x)`, `h2 = bf16(x - h1)`, `h3 = bf16(x - h1 - h2)`. Each
/// subtraction is exact in `f32`, so the residual after three terms is below
/// `2^-22 * |x|` whenever the third term is still a normal bfloat16 number.
pub fn bf16_split(x: f32) -> Result<[Bf16Value; 3]> {
    if !x.is_finite() {
        return Err(Error::Argument(format!("cannot split non-finite value {x}")));
    }
    let h1 = Bf16Value::from_f32(x);
    if !h1.is_finite() {
        return Err(Error::Argument(format!("{x} rounds outside the bfloat16 range")));
    }
    let r1 = x - h1.to_f32();
    let h2 = Bf16Value::from_f32(r1);
    let r2 = r1 - h2.to_f32();
    let h3 = Bf16Value::from_f32(r2);
    Ok([h1, h2, h3])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values_round_trip() {
        for x in [0.0f32, -0.0, 1.0, -2.5, 3.0, 5.0, 15.0, 0.5, 256.0] {
            assert_eq!(Bf16Value::from_f32(x).to_f32().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn ties_round_to_even() {
        // 1 + 2^-8 sits exactly between 1.0 (even mantissa) and 1 + 2^-7.
        let tie_down = f32::from_bits(0x3f80_8000);
        assert_eq!(Bf16Value::from_f32(tie_down).to_bits(), 0x3f80);
        // 1 + 3*2^-8 sits between 1 + 2^-7 (odd) and 1 + 2^-6 (even).
        let tie_up = f32::from_bits(0x3f81_8000);
        assert_eq!(Bf16Value::from_f32(tie_up).to_bits(), 0x3f82);
        // Just above a tie always rounds up.
        let above = f32::from_bits(0x3f80_8001);
        assert_eq!(Bf16Value::from_f32(above).to_bits(), 0x3f81);
        // Negative tie mirrors the positive one.
        let neg = f32::from_bits(0xbf80_8000);
        assert_eq!(Bf16Value::from_f32(neg).to_bits(), 0xbf80);
    }

    #[test]
    fn bits_round_trip_through_f32() {
        for bits in (0u16..=u16::MAX).step_by(7) {
            let v = Bf16Value::from_bits(bits);
            if v.to_f32().is_nan() {
                continue;
            }
            assert_eq!(Bf16Value::from_f32(v.to_f32()), v);
        }
    }

    #[test]
    fn rounding_error_is_half_ulp() {
        let mut x = 1.0e-30f32;
        while x < 1.0e30 {
            let b = Bf16Value::from_f32(x).to_f32();
            assert!(((b - x) as f64).abs() <= (x as f64) * 2f64.powi(-8));
            x *= 1.37;
        }
    }

    #[test]
    fn split_examples() {
        assert_eq!(bf16_split(1.0).unwrap(), [Bf16Value::from_f32(1.0), Bf16Value::ZERO, Bf16Value::ZERO]);
        let z = bf16_split(0.0).unwrap();
        assert!(z.iter().all(|h| h.to_f32() == 0.0));
    }

    #[test]
    fn split_rejects_non_finite_and_overflow() {
        assert!(bf16_split(f32::NAN).is_err());
        assert!(bf16_split(f32::INFINITY).is_err());
        assert!(bf16_split(f32::MAX).is_err());
    }

    #[test]
    fn split_of_pi_against_f64_residual() {
        let x = std::f32::consts::PI;
        let h = bf16_split(x).unwrap();
        // All terms are f32 values spanning < 53 bits, so the f64 sum is exact.
        let sum: f64 = h.iter().map(|v| v.to_f32() as f64).sum();
        let residual = (x as f64 - sum).abs();
        assert!(residual <= 2f64.powi(-22) * x as f64, "residual {residual}");
    }
}
