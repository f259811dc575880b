//! Scalar abstraction shared by every numeric module.
//!
//! All of the analysis is written against [`Real`], which is implemented for
//! `f32` and `f64`. Complex quantities use [`Cplx`], nalgebra's re-export of
//! `num_complex::Complex`, so that the same values flow straight into the
//! dense linear algebra.

use nalgebra::{ComplexField, RealField};

pub use nalgebra::Complex;

/// Complex number over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

/// Floating point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + Into<f64> + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self` (rounding for `f32`).
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Converts a count into `Self`.
    fn of_usize(n: usize) -> Self {
        nalgebra::convert(n as f64)
    }

    /// Machine epsilon.
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for `Complex::new`.
#[inline]
pub fn cx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

/// Real number lifted into the complex plane.
#[inline]
pub fn cr<T: Real>(re: T) -> Cplx<T> {
    Complex::new(re, T::zero())
}

/// Modulus `|z|`.
#[inline]
pub fn modulus<T: Real>(z: Cplx<T>) -> T {
    z.modulus()
}

/// `true` when both parts are finite.
#[inline]
pub fn is_finite<T: Real>(z: Cplx<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Lossy conversion to `Complex<f64>` for reporting and serialization.
#[inline]
pub fn to_c64<T: Real>(z: Cplx<T>) -> Complex<f64> {
    Complex::new(z.re.into(), z.im.into())
}

/// Euclidean norm of a complex slice.
pub fn norm2<T: Real>(v: &[Cplx<T>]) -> T {
    v.iter()
        .fold(T::zero(), |acc, z| acc + z.modulus_squared())
        .sqrt()
}

/// Double precision complex number.
pub type C64 = Complex<f64>;
