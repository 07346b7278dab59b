//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A real scalar the stage games, solvers and agents are generic over.
///
/// In practice this is implemented for `f32` and `f64` only.
pub trait Scalar:
    'static
    + Float
    + FromPrimitive
    + ToPrimitive
    + Copy
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Sum
    + for<'a> Sum<&'a Self>
    + Serialize
    + DeserializeOwned
{
    /// Converts an `f64` literal. Never fails for the implemented types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
