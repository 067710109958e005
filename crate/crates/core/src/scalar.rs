//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable as the entry type of Hermitian operators.
///
/// Implemented for `f32` and `f64`. The solvers are tuned for `f64`; `f32`
/// is supported by the operator algebra but the default solver tolerances
/// are below its resolution.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Absolute part of the Hermitian-symmetry tolerance, scaled by `1 + max|A_ij|`.
    fn hermitian_tol() -> Self;
}

impl Real for f64 {
    fn hermitian_tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn hermitian_tol() -> Self {
        1e-5
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn abs<T: Real>(x: T) -> T {
    nalgebra::ComplexField::abs(x)
}

/// A real number or `+∞`.
///
/// Infeasible primal points (negative spectrum, support outside a kernel)
/// evaluate to [`Extended::PosInf`] rather than an error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extended<T> {
    Finite(T),
    PosInf,
}

impl<T: Real> Extended<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::PosInf => None,
        }
    }

    /// Lossy view as a float, mapping the sentinel to `+∞`.
    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(x) => to_f64(x),
            Extended::PosInf => f64::INFINITY,
        }
    }

    pub fn add(self, other: Extended<T>) -> Extended<T> {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::PosInf,
        }
    }

    pub fn scale(self, k: T) -> Extended<T> {
        match self {
            Extended::Finite(a) => Extended::Finite(a * k),
            Extended::PosInf => Extended::PosInf,
        }
    }

    /// `self <= other` in the extended order.
    pub fn le(&self, other: &Extended<T>) -> bool {
        match (self, other) {
            (_, Extended::PosInf) => true,
            (Extended::PosInf, Extended::Finite(_)) => false,
            (Extended::Finite(a), Extended::Finite(b)) => a <= b,
        }
    }
}

impl<T> From<T> for Extended<T> {
    fn from(x: T) -> Self {
        Extended::Finite(x)
    }
}
