use std::fmt::{Debug, Display};

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the numerics are generic over: `f32` or `f64`.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug {}

impl<T> Scalar for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug {}

/// Converts an `f64` literal (tolerances, reference constants) into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub(crate) fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn cplx<T: Scalar>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}
