//! Scalar traits shared by the numeric kernels.
//!
//! The kernels in [`crate::linalg`] and [`crate::planewave::transfer`] are
//! written against these traits so they run on `f32`, `f64` and their complex
//! counterparts. The physics layers work in SI units, where quantities such
//! as `ħ²/2m ≈ 4e-44` underflow `f32`, so they are fixed to `f64`.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, One, Zero};

/// Real floating point scalar.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field scalar usable in the tridiagonal solver: a real or complex number.
pub trait Scalar:
    Copy
    + Debug
    + Zero
    + One
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    type Real: Real;

    /// Absolute value (modulus for complex numbers).
    fn modulus(self) -> Self::Real;

    fn is_finite(self) -> bool;
}

macro_rules! impl_real_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            type Real = $t;
            fn modulus(self) -> $t {
                self.abs()
            }
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
        }
    };
}

impl_real_scalar!(f32);
impl_real_scalar!(f64);

impl<T: Real> Scalar for Complex<T> {
    type Real = T;
    fn modulus(self) -> T {
        self.norm()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Principal square root of a complex number with the branch cut chosen so
/// that the imaginary part is non-negative.
///
/// Used for wave numbers: `k = sqrt(2m(E - V))/ħ` must decay (`Im k ≥ 0`) in
/// classically forbidden or absorbing regions.
pub fn sqrt_upper<T: Real>(z: Complex<T>) -> Complex<T> {
    let s = z.sqrt();
    if s.im < T::zero() {
        -s
    } else {
        s
    }
}
