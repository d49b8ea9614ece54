//! Scalar abstraction shared by every measure and machine computation.
//!
//! All contract values are exact rationals ([`BigRational`]); `f64` is
//! supported for quick diagnostics where exact equality is not required.

use std::fmt::Debug;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Field operations plus the handful of conversions the library needs.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Send + Sync + 'static {
    /// True when arithmetic is exact (equality tests are meaningful).
    const EXACT: bool;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_bigints(num: BigInt, den: BigInt) -> Self;

    /// `2^{-n}`.
    fn pow2_neg(n: usize) -> Self;

    fn to_f64(&self) -> f64;

    /// Approximate base-2 logarithm; `-inf` for zero. Only used as a
    /// comparison prefilter in front of exact arithmetic.
    fn log2_approx(&self) -> f64;

    fn from_f64(x: f64) -> Self;

    /// Least integer `>= self`.
    fn ceil_int(&self) -> BigInt;

    /// Parses `num/den` or a bare integer.
    fn parse(text: &str) -> Option<Self>;

    /// Renders as `num/den` (always with an explicit denominator for exact types).
    fn render(&self) -> String;

    fn is_negative_value(&self) -> bool {
        *self < Self::zero()
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn powi(&self, exp: usize) -> Self {
        num_traits::pow(self.clone(), exp)
    }

    /// Product without normalization. The caller guarantees the result is
    /// already in lowest terms (each numerator coprime to the other
    /// denominator), as for products of Bernoulli cell factors.
    fn mul_coprime(&self, other: &Self) -> Self {
        self.clone() * other.clone()
    }

    /// Sum of many values.
    fn sum_all<I: IntoIterator<Item = Self>>(items: I) -> Self {
        items.into_iter().fold(Self::zero(), |a, b| a + b)
    }
}

fn biguint_log2(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return x.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.log2() + shift as f64
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_bigints(num: BigInt, den: BigInt) -> Self {
        BigRational::new(num, den)
    }

    fn pow2_neg(n: usize) -> Self {
        BigRational::new_raw(BigInt::one(), BigInt::one() << n)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| self.log2_approx().exp2())
    }

    fn log2_approx(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        biguint_log2(self.numer().magnitude()) - biguint_log2(self.denom().magnitude())
    }

    fn from_f64(x: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(x).unwrap_or_else(BigRational::zero)
    }

    fn ceil_int(&self) -> BigInt {
        let (q, r) = self.numer().div_mod_floor(self.denom());
        if r.is_zero() {
            q
        } else {
            q + 1
        }
    }

    fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        let (num, den) = match text.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (text, "1"),
        };
        let num: BigInt = num.parse().ok()?;
        let den: BigInt = den.parse().ok()?;
        if den.is_zero() {
            return None;
        }
        Some(BigRational::new(num, den))
    }

    fn render(&self) -> String {
        let den = self.denom();
        let (num, den) = if den.sign() == Sign::Minus {
            (-self.numer(), -den)
        } else {
            (self.numer().clone(), den.clone())
        };
        format!("{num}/{den}")
    }

    fn is_negative_value(&self) -> bool {
        self.is_negative()
    }

    fn mul_coprime(&self, other: &Self) -> Self {
        BigRational::new_raw(self.numer() * other.numer(), self.denom() * other.denom())
    }

    /// Accumulates over a running common denominator and reduces once.
    fn sum_all<I: IntoIterator<Item = Self>>(items: I) -> Self {
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for x in items {
            let (n, d) = (x.numer(), x.denom());
            if *d == den {
                num += n;
                continue;
            }
            let (q, r) = den.div_rem(d);
            if r.is_zero() {
                num += n * q;
                continue;
            }
            let (q, r) = d.div_rem(&den);
            if r.is_zero() {
                num = num * q + n;
                den = d.clone();
                continue;
            }
            let g = den.gcd(d);
            let m = d / &g;
            num = num * &m + n * (&den / &g);
            den *= m;
        }
        BigRational::new(num, den)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_bigints(num: BigInt, den: BigInt) -> Self {
        Scalar::to_f64(&BigRational::new(num, den))
    }

    fn pow2_neg(n: usize) -> Self {
        (-(n as f64)).exp2()
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn log2_approx(&self) -> f64 {
        self.log2()
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn ceil_int(&self) -> BigInt {
        BigInt::from_f64(self.ceil()).unwrap_or_else(BigInt::zero)
    }

    fn parse(text: &str) -> Option<Self> {
        <BigRational as Scalar>::parse(text).map(|r| Scalar::to_f64(&r))
    }

    fn render(&self) -> String {
        format!("{self}")
    }
}
