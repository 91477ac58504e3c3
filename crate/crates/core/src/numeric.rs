//! Scalar types shared by the exact (rational) and floating-point backends.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Field-like scalar used for exact and approximate probability arithmetic.
pub trait Scalar: Clone + Debug + Send + Sync + PartialOrd {
    fn zero() -> Self;
    fn one() -> Self;
    /// Exact conversion from a finite `f64` (every finite `f64` is a dyadic
    /// rational).
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn half(&self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn half(&self) -> Self {
        self * 0.5
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite probability")
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn half(&self) -> Self {
        self / BigRational::from_integer(BigInt::from(2))
    }
}

/// Nearest `f64` to a big rational, robust to numerators and denominators
/// that overflow `f64` on their own.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Shift both sides down to 64 significant bits before dividing.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
    n / d * 2f64.powi((shift_n - shift_d) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_conversion_round_trips() {
        for x in [0.0, 0.25, 1.0 / 3.0, 0.1, 1e-30, 0.999_999] {
            let r = <BigRational as Scalar>::from_f64(x);
            assert_eq!(r.to_f64(), x);
        }
    }

    #[test]
    fn huge_rationals_convert() {
        let big = BigInt::from(3) << 2000usize;
        let r = BigRational::new(big.clone(), big * BigInt::from(4));
        assert_eq!(rational_to_f64(&r), 0.25);
    }
}
