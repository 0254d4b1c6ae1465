//! Scalar abstraction shared by the deterministic parts of the crate.
//!
//! Everything that is plain floating-point arithmetic (grids, closures, the
//! low-order solve, the reference solver, the MLMC statistics) is written
//! against [`Real`] so it runs in `f32` or `f64`. The particle tracker keeps
//! its own integer/`f64` bookkeeping and hands results over through
//! [`crate::mc::TallyMoments`].

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point number, implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
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
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Relative residual accepted after a direct solve: `1e-10`, or a few
    /// hundred ulps for types that cannot reach it.
    #[inline]
    fn solve_tolerance() -> Self {
        Self::lit(1e-10).max(Self::epsilon() * Self::lit(512.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
