//! Numeric traits shared by every module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, NumAssign, One, ToPrimitive, Zero};

/// Arithmetic needed to build hop-weight schedules.
///
/// Implemented for the float types and for [`BigRational`], so schedules such
/// as heat weights can be checked exactly. `pow` returns `None` when the result
/// is not representable (a non-integer exponent on a rational).
pub trait Weight: Clone + Num + PartialOrd + FromPrimitive + Debug {
    fn pow(&self, exponent: &Self) -> Option<Self>;
    fn is_finite_weight(&self) -> bool;
}

/// Real scalar for graph and feature arithmetic.
pub trait Scalar:
    Float
    + Weight
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; every `f64` has a nearest value in `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

macro_rules! float_scalar {
    ($($t:ty),*) => {$(
        impl Weight for $t {
            #[inline]
            fn pow(&self, exponent: &Self) -> Option<Self> {
                Some(Float::powf(*self, *exponent))
            }
            #[inline]
            fn is_finite_weight(&self) -> bool {
                Float::is_finite(*self)
            }
        }
        impl Scalar for $t {}
    )*};
}

float_scalar!(f32, f64);

impl Weight for BigRational {
    fn pow(&self, exponent: &Self) -> Option<Self> {
        if !exponent.is_integer() {
            return None;
        }
        let e = exponent.to_integer();
        let magnitude: u32 = e.magnitude().try_into().ok()?;
        let mut acc = BigRational::one();
        for _ in 0..magnitude {
            acc *= self;
        }
        if e < BigInt::zero() {
            if acc.is_zero() {
                return None;
            }
            acc = acc.recip();
        }
        Some(acc)
    }

    fn is_finite_weight(&self) -> bool {
        true
    }
}

/// `ceil(x)` that treats values within 1e-9 of an integer as that integer, so
/// products like `0.1 * 30` do not round up to 4.
pub(crate) fn robust_ceil(x: f64) -> usize {
    let r = x.round();
    let v = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    v.max(0.0) as usize
}

/// `floor(x)` with the same integer snapping as [`robust_ceil`].
pub(crate) fn robust_floor(x: f64) -> usize {
    let r = x.round();
    let v = if (x - r).abs() < 1e-9 { r } else { x.floor() };
    v.max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rational_pow_integer_exponents() {
        assert_eq!(Weight::pow(&q(2, 3), &q(2, 1)), Some(q(4, 9)));
        assert_eq!(Weight::pow(&q(2, 3), &q(-1, 1)), Some(q(3, 2)));
        assert_eq!(Weight::pow(&q(5, 1), &q(0, 1)), Some(q(1, 1)));
        assert_eq!(Weight::pow(&q(2, 1), &q(1, 2)), None);
        assert_eq!(Weight::pow(&q(0, 1), &q(-1, 1)), None);
    }

    #[test]
    fn snapping_rounding() {
        assert_eq!(robust_ceil(0.1 * 30.0), 3);
        assert_eq!(robust_ceil(0.2 * 5.0), 1);
        assert_eq!(robust_ceil(1.2), 2);
        assert_eq!(robust_floor(0.5 * 9.0), 4);
        assert_eq!(robust_floor(0.7 * 10.0), 7);
        assert_eq!(robust_floor(0.3), 0);
    }
}
