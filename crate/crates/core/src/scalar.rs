//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the model, solver and simulator are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the literal is not representable,
    /// which cannot happen for `f32`/`f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Absolute tolerance used for "sums to one" style invariants.
    fn unit_tolerance() -> Self {
        let floor = Self::lit(1e-9);
        let scaled = Self::epsilon() * Self::lit(64.0);
        if scaled > floor {
            scaled
        } else {
            floor
        }
    }

    /// Relative tolerance for treating two solver values as a tie.
    fn tie_tolerance(reference: Self) -> Self {
        Self::epsilon() * Self::lit(64.0) * reference.abs().max(Self::one())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
