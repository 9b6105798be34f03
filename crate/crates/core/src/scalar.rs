//! Exact ordered-field scalars used for every coordinate.
//!
//! Geometry and substitution code is generic over [`Scalar`]. The crate root
//! fixes the arbitrary-precision instantiation ([`crate::Rational`]); the
//! fixed-width ratios are handy for small experiments and property tests.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, Signed, ToPrimitive};

/// An exact, totally ordered field element.
pub trait Scalar:
    Clone + Ord + Hash + Debug + Display + Num + Signed + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self;

    /// `n / d`; panics when `d == 0`.
    fn from_frac(n: i64, d: i64) -> Self;

    fn floor_big(&self) -> BigInt;

    fn ceil_big(&self) -> BigInt;

    /// Nearest `f64`, used only for reporting and float cross-checks.
    fn approx_f64(&self) -> f64;

    /// Lossless conversion to an arbitrary-precision rational.
    fn to_big_rational(&self) -> BigRational;

    fn half() -> Self {
        Self::from_frac(1, 2)
    }

    fn pow_u32(&self, exp: u32) -> Self {
        num_traits::pow(self.clone(), exp as usize)
    }
}

macro_rules! impl_scalar_for_ratio {
    ($int:ty) => {
        impl Scalar for Ratio<$int> {
            fn from_i64(v: i64) -> Self {
                Ratio::from_integer(<$int>::from(v))
            }

            fn from_frac(n: i64, d: i64) -> Self {
                Ratio::new(<$int>::from(n), <$int>::from(d))
            }

            fn floor_big(&self) -> BigInt {
                BigInt::from(self.floor().to_integer())
            }

            fn ceil_big(&self) -> BigInt {
                BigInt::from(self.ceil().to_integer())
            }

            fn approx_f64(&self) -> f64 {
                self.to_f64().unwrap_or(f64::NAN)
            }

            fn to_big_rational(&self) -> BigRational {
                BigRational::new(BigInt::from(*self.numer()), BigInt::from(*self.denom()))
            }
        }
    };
}

impl_scalar_for_ratio!(i64);
impl_scalar_for_ratio!(i128);

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_frac(n: i64, d: i64) -> Self {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn floor_big(&self) -> BigInt {
        self.floor().to_integer()
    }

    fn ceil_big(&self) -> BigInt {
        self.ceil().to_integer()
    }

    fn approx_f64(&self) -> f64 {
        big_ratio_to_f64(self)
    }

    fn to_big_rational(&self) -> BigRational {
        self.clone()
    }
}

/// `f64` approximation that survives numerators and denominators far outside
/// the `f64` range (`ToPrimitive` gives up on those).
pub fn big_ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    let n_bits = r.numer().bits() as i64;
    let d_bits = r.denom().bits() as i64;
    let shift_n = (n_bits - 900).max(0);
    let shift_d = (d_bits - 900).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(f64::NAN);
    let exp = shift_n - shift_d;
    (n / d) * 2f64.powi(exp.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

/// Decimal logarithm of a positive rational, accurate far beyond the `f64`
/// exponent range.
pub fn log10_big_ratio(r: &BigRational) -> f64 {
    fn log10_big(n: &BigInt) -> f64 {
        let bits = n.bits() as i64;
        let shift = (bits - 64).max(0);
        let top = (n >> shift as usize).to_f64().unwrap_or(f64::NAN);
        top.log10() + shift as f64 * std::f64::consts::LOG10_2
    }
    log10_big(r.numer()) - log10_big(r.denom())
}

/// Render a rational as `p/q` (or `p` when integral).
pub fn format_rational<S: Scalar>(r: &S) -> String {
    let b = r.to_big_rational();
    if b.is_integer() {
        b.numer().to_string()
    } else {
        format!("{}/{}", b.numer(), b.denom())
    }
}

/// Scientific-notation rendering with `digits` significant digits, valid for
/// magnitudes far outside the `f64` range.
pub fn format_scientific(r: &BigRational, digits: usize) -> String {
    use num_traits::Zero;
    if r.is_zero() {
        return format!("{:.*}e0", digits.saturating_sub(1), 0.0);
    }
    let sign = if r.is_negative() { "-" } else { "" };
    let a = r.abs();
    let lg = log10_big_ratio(&a);
    let mut exp = lg.floor() as i64;
    // Exact mantissa: a / 10^exp, computed in rationals, then rounded.
    let ten = BigInt::from(10);
    let scale = |e: i64| -> BigRational {
        if e >= 0 {
            BigRational::from_integer(num_traits::pow(ten.clone(), e as usize))
        } else {
            BigRational::new(BigInt::from(1), num_traits::pow(ten.clone(), (-e) as usize))
        }
    };
    let mut mant = &a / scale(exp);
    let one = BigRational::from_integer(BigInt::from(1));
    let ten_r = BigRational::from_integer(ten.clone());
    while mant >= ten_r {
        mant /= &ten_r;
        exp += 1;
    }
    while mant < one {
        mant *= &ten_r;
        exp -= 1;
    }
    let frac_digits = digits.saturating_sub(1);
    let pow = scale(frac_digits as i64);
    let scaled = (&mant * &pow + BigRational::new(BigInt::from(1), BigInt::from(2))).floor();
    let mut int_digits = scaled.to_integer().to_string();
    if int_digits.len() > digits {
        // rounding carried into a new digit
        int_digits.truncate(digits);
        exp += 1;
    }
    let (head, tail) = int_digits.split_at(1);
    if tail.is_empty() {
        format!("{sign}{head}e{exp}")
    } else {
        format!("{sign}{head}.{tail}e{exp}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn floor_and_ceil_agree_across_backends() {
        let a = Rational64::from_frac(-7, 2);
        let b = BigRational::from_frac(-7, 2);
        assert_eq!(a.floor_big(), b.floor_big());
        assert_eq!(a.ceil_big(), b.ceil_big());
        assert_eq!(a.floor_big(), BigInt::from(-4));
        assert_eq!(a.ceil_big(), BigInt::from(-3));
    }

    #[test]
    fn huge_ratio_to_f64() {
        let big = BigRational::from_integer(num_traits::pow(BigInt::from(3), 700));
        let v = big_ratio_to_f64(&(big.clone() / BigRational::from_integer(num_traits::pow(BigInt::from(3), 698))));
        assert!((v - 9.0).abs() < 1e-12);
        assert!((log10_big_ratio(&big) - 700.0 * 3f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn scientific_formatting() {
        let r = BigRational::from_integer(BigInt::from(1296));
        assert_eq!(format_scientific(&r, 4), "1.296e3");
        let r = BigRational::new(BigInt::from(1), BigInt::from(6));
        assert_eq!(format_scientific(&r, 3), "1.67e-1");
        let r = BigRational::from_integer(BigInt::from(-999_999));
        assert_eq!(format_scientific(&r, 3), "-1.00e6");
    }
}
