//! Real scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Smallest residual tolerance that the eigen-solver can honestly reach.
    fn eigen_tol_floor() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }

    /// Converts an `f64` literal. Panics only for values not representable at all.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `10 log10(x)`.
#[inline]
pub fn to_db<T: Scalar>(linear: T) -> T {
    T::lit(10.0) * linear.log10()
}

/// `10^(x / 10)`.
#[inline]
pub fn from_db<T: Scalar>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Neumaier-compensated sum, evaluated strictly in iteration order.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(angle: T) -> T {
    let two_pi = T::TAU();
    let r = (angle + T::PI()) % two_pi;
    let r = if r < T::zero() { r + two_pi } else { r };
    if r == T::zero() {
        T::PI()
    } else {
        r - T::PI()
    }
}
