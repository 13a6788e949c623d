use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the whole library is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Converts an `f64` literal. Panics only if the target type cannot represent it at all.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numeric tolerances used across the geometry code, gathered in one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Minimum |w| of a projected homogeneous point before it is treated as at infinity.
    pub eps_w: f64,
    /// Reprojection error budget for exact correspondences.
    pub eps_exact: f64,
    /// Minimum |det| of a unit-Frobenius homography.
    pub eps_det: f64,
    /// Minimum triangle area (in normalized coordinates) for three points to count as non-collinear.
    pub eps_collinear: f64,
}

pub const EPS_W: f64 = 1e-12;
pub const EPS_EXACT: f64 = 1e-9;
pub const EPS_DET: f64 = 1e-12;
pub const EPS_COLLINEAR: f64 = 1e-9;

pub const TOLERANCES: Tolerances =
    Tolerances { eps_w: EPS_W, eps_exact: EPS_EXACT, eps_det: EPS_DET, eps_collinear: EPS_COLLINEAR };
