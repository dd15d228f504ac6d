//! Scalar abstraction: everything numeric is generic over [`Float`].

use nalgebra::RealField;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Real scalar type usable throughout the crate (`f64`, `f32`, ...).
///
/// `RealField` brings the transcendental functions and lets nalgebra
/// factorize matrices of `T` and `Complex<T>`; the `num_traits` bounds make
/// `Complex<T>` arithmetic and f64 round-trips available.
pub trait Float: RealField + FromPrimitive + ToPrimitive + Num + Copy {}

impl<T: RealField + FromPrimitive + ToPrimitive + Num + Copy> Float for T {}

/// Shorthand conversion from an `f64` literal into the working scalar.
#[inline]
pub fn c<T: Float>(x: f64) -> T {
    T::from_f64(x).expect("f64 must convert into the scalar type")
}

/// Best-effort conversion back to `f64` (for error payloads and output).
#[inline]
pub fn as_f64<T: Float>(x: T) -> f64 {
    x.to_f64().expect("scalar must convert into f64")
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Float>(x: T) -> T {
    let two_pi = T::two_pi();
    let mut y = x - two_pi * (x / two_pi).round();
    if y <= -T::pi() {
        y += two_pi;
    }
    if y > T::pi() {
        y -= two_pi;
    }
    y
}

/// Fractional part in `[0, 1)`.
pub fn frac<T: Float>(x: T) -> T {
    let f = x - x.floor();
    // floor() of a value epsilon below an integer can still round the
    // difference up to exactly 1.0; fold that back.
    if f >= T::one() {
        f - T::one()
    } else {
        f
    }
}
