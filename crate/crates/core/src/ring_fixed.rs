//! Arithmetic in Z_2^64 and the fixed-point codec on top of it.
//!
//! A real number `x` is carried as the ring element `round(x * 2^f)`, with
//! negative values in two's complement. Addition is exact; a product of two
//! encoded values carries `2f` fractional bits and has to be truncated by `f`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit width of the ring. Only 64 is supported.
pub const RING_BITS: u32 = 64;

/// An element of Z_2^64. All arithmetic wraps.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
#[repr(transparent)]
pub struct RingElement(pub u64);

impl RingElement {
    pub const ZERO: RingElement = RingElement(0);
    pub const ONE: RingElement = RingElement(1);

    pub const fn new(v: u64) -> Self {
        RingElement(v)
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    /// Two's-complement interpretation.
    pub const fn signed(self) -> i64 {
        self.0 as i64
    }

    pub const fn from_signed(v: i64) -> Self {
        RingElement(v as u64)
    }

    pub fn to_le_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(b: [u8; 8]) -> Self {
        RingElement(u64::from_le_bytes(b))
    }
}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RingElement({})", self.0)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for RingElement {
    fn from(v: u64) -> Self {
        RingElement(v)
    }
}

impl Add for RingElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        RingElement(self.0.wrapping_add(rhs.0))
    }
}

impl Sub for RingElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        RingElement(self.0.wrapping_sub(rhs.0))
    }
}

impl Mul for RingElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        RingElement(self.0.wrapping_mul(rhs.0))
    }
}

impl Neg for RingElement {
    type Output = Self;
    fn neg(self) -> Self {
        RingElement(self.0.wrapping_neg())
    }
}

impl AddAssign for RingElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for RingElement {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for RingElement {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for RingElement {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(RingElement::ZERO, |a, b| a + b)
    }
}

/// Fixed-point layout inside the 64-bit ring.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointConfig {
    /// Total ring width; always 64.
    pub k: u32,
    /// Fractional bits.
    pub f: u32,
    /// Integer magnitude bits.
    pub m: u32,
    /// Statistical security parameter in bits.
    pub s: u32,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            k: RING_BITS,
            f: 15,
            m: 16,
            s: 40,
        }
    }
}

impl FixedPointConfig {
    pub fn new(f: u32, m: u32, s: u32) -> Result<Self> {
        let cfg = FixedPointConfig {
            k: RING_BITS,
            f,
            m,
            s,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k != RING_BITS {
            return Err(Error::Config(format!(
                "ring width must be {RING_BITS}, got {}",
                self.k
            )));
        }
        if self.f == 0 || self.m == 0 || self.f + self.m >= self.k {
            return Err(Error::Config(format!(
                "need f >= 1, m >= 1 and f + m < k (f={}, m={})",
                self.f, self.m
            )));
        }
        Ok(())
    }

    /// Scale factor 2^f as a float.
    pub fn scale(&self) -> f64 {
        (self.f as f64).exp2()
    }

    /// Smallest representable step, 2^-f.
    pub fn resolution(&self) -> f64 {
        (-(self.f as f64)).exp2()
    }

    /// Exclusive bound on representable magnitudes, 2^m.
    pub fn max_magnitude(&self) -> f64 {
        (self.m as f64).exp2()
    }

    /// Bits needed for the signed integer carrying an in-range value: m + f.
    pub fn value_bits(&self) -> u32 {
        self.m + self.f
    }
}

/// Encodes `x` as `round(x * 2^f)` (half away from zero) in two's complement.
pub fn encode_fixed(x: f64, cfg: &FixedPointConfig) -> Result<RingElement> {
    if !x.is_finite() || x.abs() >= cfg.max_magnitude() {
        return Err(Error::Range {
            value: x,
            int_bits: cfg.m,
        });
    }
    let scaled = (x * cfg.scale()).round() as i64;
    Ok(RingElement::from_signed(scaled))
}

/// Inverse of [`encode_fixed`] up to quantization.
pub fn decode_fixed(v: RingElement, cfg: &FixedPointConfig) -> f64 {
    v.signed() as f64 / cfg.scale()
}

/// Arithmetic right shift by `bits`, rounding toward negative infinity.
pub fn shift_truncate(v: RingElement, bits: u32) -> RingElement {
    if bits >= 64 {
        return RingElement::from_signed(if v.signed() < 0 { -1 } else { 0 });
    }
    RingElement::from_signed(v.signed() >> bits)
}
