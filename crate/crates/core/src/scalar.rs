//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type implementing [`Real`]. `f64` is the default used by
//! the CLI and the on-disk formats; `f32` is available for memory-bound runs.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable throughout the toolkit: f32 or f64.
pub trait Real:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64` (used for constants and tolerances).
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Conversion from a count.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(|| Self::of(n as f64))
    }

    /// Widening conversion for reporting and file output.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real widens to f64")
    }

    /// ln(2π), the diagonal-Gaussian normalization constant.
    fn ln_two_pi() -> Self {
        Self::of((2.0 * std::f64::consts::PI).ln())
    }

    /// Tolerance used when validating that probability vectors sum to one.
    /// 1e-9 at f64 precision, scaled up where the epsilon is coarser.
    fn probability_tolerance() -> Self {
        let floor = Self::of(1e-9);
        let scaled = Self::epsilon() * Self::of(64.0);
        if scaled > floor {
            scaled
        } else {
            floor
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// log(Σ exp(v_i)) computed without leaving the log domain.
///
/// Empty input and all-`-inf` input both yield `-inf`.
pub fn log_sum_exp<R: Real>(values: &[R]) -> R {
    let mut max = R::neg_infinity();
    for &v in values {
        if v > max {
            max = v;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = R::zero();
    for &v in values {
        sum += (v - max).exp();
    }
    max + sum.ln()
}
