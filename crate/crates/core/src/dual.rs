//! Forward-mode dual numbers.
//!
//! A [`Dual`] carries a value and the derivative of that value along one
//! seed direction. Because it implements [`num_traits::Float`], any function
//! written against [`Real`](crate::scalar::Real) can be differentiated by
//! evaluating it on dual inputs: seed one tangent coordinate with derivative
//! one, read the derivative off the result. The solver uses this to build
//! residual Jacobians column by column.

use std::num::FpCategory;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

use crate::scalar::Real;

/// Value plus derivative along a single seed direction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual<T> {
    /// Function value.
    pub re: T,
    /// Derivative of the value with respect to the seeded input.
    pub du: T,
}

impl<T: Real> Dual<T> {
    /// A constant: value with zero derivative.
    pub fn constant(re: T) -> Self {
        Dual { re, du: T::zero() }
    }

    /// A seeded variable: derivative one with respect to itself.
    pub fn variable(re: T) -> Self {
        Dual { re, du: T::one() }
    }
}

/// Ordering and comparisons look at the value first, so branch logic inside
/// generic code takes the same path a plain float evaluation would.
impl<T: Real> PartialOrd for Dual<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        match self.re.partial_cmp(&other.re) {
            Some(std::cmp::Ordering::Equal) => self.du.partial_cmp(&other.du),
            ord => ord,
        }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual {
            re: self.re + rhs.re,
            du: self.du + rhs.du,
        }
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual {
            re: self.re - rhs.re,
            du: self.du - rhs.du,
        }
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Dual {
            re: self.re * rhs.re,
            du: self.du * rhs.re + self.re * rhs.du,
        }
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Dual {
            re: self.re / rhs.re,
            du: (self.du * rhs.re - self.re * rhs.du) / (rhs.re * rhs.re),
        }
    }
}

impl<T: Real> Rem for Dual<T> {
    type Output = Self;
    fn rem(self, rhs: Self) -> Self {
        // x % y = x - y * trunc(x / y); trunc is locally constant.
        Dual {
            re: self.re % rhs.re,
            du: self.du - rhs.du * (self.re / rhs.re).trunc(),
        }
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            du: -self.du,
        }
    }
}

impl<T: Real> Zero for Dual<T> {
    fn zero() -> Self {
        Dual::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.du.is_zero()
    }
}

impl<T: Real> One for Dual<T> {
    fn one() -> Self {
        Dual::constant(T::one())
    }
}

impl<T: Real> Num for Dual<T> {
    type FromStrRadixErr = <T as Num>::FromStrRadixErr;
    fn from_str_radix(str: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(str, radix).map(Dual::constant)
    }
}

impl<T: Real> ToPrimitive for Dual<T> {
    fn to_i64(&self) -> Option<i64> {
        self.re.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.re.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        self.re.to_f64()
    }
}

impl<T: Real> NumCast for Dual<T> {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        T::from(n).map(Dual::constant)
    }
}

impl<T: Real> FromPrimitive for Dual<T> {
    fn from_i64(n: i64) -> Option<Self> {
        T::from_i64(n).map(Dual::constant)
    }
    fn from_u64(n: u64) -> Option<Self> {
        T::from_u64(n).map(Dual::constant)
    }
    fn from_f64(n: f64) -> Option<Self> {
        T::from_f64(n).map(Dual::constant)
    }
}

impl<T: Real> Float for Dual<T> {
    fn nan() -> Self {
        Dual::constant(T::nan())
    }
    fn infinity() -> Self {
        Dual::constant(T::infinity())
    }
    fn neg_infinity() -> Self {
        Dual::constant(T::neg_infinity())
    }
    fn neg_zero() -> Self {
        Dual::constant(T::neg_zero())
    }
    fn min_value() -> Self {
        Dual::constant(T::min_value())
    }
    fn min_positive_value() -> Self {
        Dual::constant(T::min_positive_value())
    }
    fn max_value() -> Self {
        Dual::constant(T::max_value())
    }
    fn epsilon() -> Self {
        Dual::constant(T::epsilon())
    }

    fn is_nan(self) -> bool {
        self.re.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.re.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.du.is_finite()
    }
    fn is_normal(self) -> bool {
        self.re.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.re.classify()
    }

    fn floor(self) -> Self {
        Dual::constant(self.re.floor())
    }
    fn ceil(self) -> Self {
        Dual::constant(self.re.ceil())
    }
    fn round(self) -> Self {
        Dual::constant(self.re.round())
    }
    fn trunc(self) -> Self {
        Dual::constant(self.re.trunc())
    }
    fn fract(self) -> Self {
        Dual {
            re: self.re.fract(),
            du: self.du,
        }
    }

    fn abs(self) -> Self {
        if self.re < T::zero() {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Dual::constant(self.re.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.re.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.re.is_sign_negative()
    }

    fn mul_add(self, a: Self, b: Self) -> Self {
        Dual {
            re: self.re.mul_add(a.re, b.re),
            du: self.du * a.re + self.re * a.du + b.du,
        }
    }
    fn recip(self) -> Self {
        Dual {
            re: self.re.recip(),
            du: -self.du / (self.re * self.re),
        }
    }

    fn powi(self, n: i32) -> Self {
        let scale = T::from_i32(n).expect("small integer exponent") * self.re.powi(n - 1);
        Dual {
            re: self.re.powi(n),
            du: self.du * scale,
        }
    }
    fn powf(self, n: Self) -> Self {
        let re = self.re.powf(n.re);
        // d(x^y) = x^y * (y' ln x + y x'/x)
        let du = re * (n.du * self.re.ln() + n.re * self.du / self.re);
        Dual { re, du }
    }
    fn sqrt(self) -> Self {
        let root = self.re.sqrt();
        Dual {
            re: root,
            du: self.du / (T::of(2.0) * root),
        }
    }
    fn cbrt(self) -> Self {
        let root = self.re.cbrt();
        Dual {
            re: root,
            du: self.du / (T::of(3.0) * root * root),
        }
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual {
            re: e,
            du: self.du * e,
        }
    }
    fn exp2(self) -> Self {
        let e = self.re.exp2();
        Dual {
            re: e,
            du: self.du * e * T::of(std::f64::consts::LN_2),
        }
    }
    fn ln(self) -> Self {
        Dual {
            re: self.re.ln(),
            du: self.du / self.re,
        }
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        Dual {
            re: self.re.log2(),
            du: self.du / (self.re * T::of(std::f64::consts::LN_2)),
        }
    }
    fn log10(self) -> Self {
        Dual {
            re: self.re.log10(),
            du: self.du / (self.re * T::of(std::f64::consts::LN_10)),
        }
    }
    fn exp_m1(self) -> Self {
        Dual {
            re: self.re.exp_m1(),
            du: self.du * self.re.exp(),
        }
    }
    fn ln_1p(self) -> Self {
        Dual {
            re: self.re.ln_1p(),
            du: self.du / (T::one() + self.re),
        }
    }

    fn max(self, other: Self) -> Self {
        if self.re >= other.re {
            self
        } else {
            other
        }
    }
    fn min(self, other: Self) -> Self {
        if self.re <= other.re {
            self
        } else {
            other
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        if self.re > other.re {
            self - other
        } else {
            Self::zero()
        }
    }
    fn hypot(self, other: Self) -> Self {
        let h = self.re.hypot(other.re);
        Dual {
            re: h,
            du: (self.re * self.du + other.re * other.du) / h,
        }
    }

    fn sin(self) -> Self {
        Dual {
            re: self.re.sin(),
            du: self.du * self.re.cos(),
        }
    }
    fn cos(self) -> Self {
        Dual {
            re: self.re.cos(),
            du: -self.du * self.re.sin(),
        }
    }
    fn tan(self) -> Self {
        let c = self.re.cos();
        Dual {
            re: self.re.tan(),
            du: self.du / (c * c),
        }
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn asin(self) -> Self {
        Dual {
            re: self.re.asin(),
            du: self.du / (T::one() - self.re * self.re).sqrt(),
        }
    }
    fn acos(self) -> Self {
        Dual {
            re: self.re.acos(),
            du: -self.du / (T::one() - self.re * self.re).sqrt(),
        }
    }
    fn atan(self) -> Self {
        Dual {
            re: self.re.atan(),
            du: self.du / (T::one() + self.re * self.re),
        }
    }
    fn atan2(self, other: Self) -> Self {
        // self is y, other is x.
        let denom = self.re * self.re + other.re * other.re;
        Dual {
            re: self.re.atan2(other.re),
            du: (self.du * other.re - self.re * other.du) / denom,
        }
    }

    fn sinh(self) -> Self {
        Dual {
            re: self.re.sinh(),
            du: self.du * self.re.cosh(),
        }
    }
    fn cosh(self) -> Self {
        Dual {
            re: self.re.cosh(),
            du: self.du * self.re.sinh(),
        }
    }
    fn tanh(self) -> Self {
        let c = self.re.cosh();
        Dual {
            re: self.re.tanh(),
            du: self.du / (c * c),
        }
    }
    fn asinh(self) -> Self {
        Dual {
            re: self.re.asinh(),
            du: self.du / (self.re * self.re + T::one()).sqrt(),
        }
    }
    fn acosh(self) -> Self {
        Dual {
            re: self.re.acosh(),
            du: self.du / (self.re * self.re - T::one()).sqrt(),
        }
    }
    fn atanh(self) -> Self {
        Dual {
            re: self.re.atanh(),
            du: self.du / (T::one() - self.re * self.re),
        }
    }

    fn integer_decode(self) -> (u64, i16, i8) {
        self.re.integer_decode()
    }
    fn to_degrees(self) -> Self {
        let k = T::of(180.0 / std::f64::consts::PI);
        Dual {
            re: self.re.to_degrees(),
            du: self.du * k,
        }
    }
    fn to_radians(self) -> Self {
        let k = T::of(std::f64::consts::PI / 180.0);
        Dual {
            re: self.re.to_radians(),
            du: self.du * k,
        }
    }
}
