//! Scalar abstraction shared by the numeric modules.
//!
//! Class breaks, hexagon math and evaluation metrics are written once over
//! [`Real`] and instantiated for `f32` and `f64`. The closed-form break rules
//! only need field arithmetic and are additionally available over [`Field`],
//! which admits exact rationals.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// Field-like scalar: exact arithmetic types such as `Ratio<i64>` qualify.
pub trait Field: Num + Copy + PartialOrd + FromPrimitive + Debug {}

impl<T> Field for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug {}

/// Floating-point scalar used by the numeric modules.
pub trait Real: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`, for constants.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Round half away from zero to `decimals` places.
pub fn round_to<T: Real>(v: T, decimals: i32) -> T {
    let scale = T::lit(10f64.powi(decimals));
    (v * scale).round() / scale
}
