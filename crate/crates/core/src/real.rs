//! Generic scalar type for the analytic kernels: f32 or f64.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar the mechanism calculus is generic over.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lift an f64 constant into the scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable")
    }

    /// Lower into f64 (used at reporting boundaries).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
