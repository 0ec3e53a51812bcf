//! Scalar abstraction: the math core is generic over the floating-point type.

/// Floating-point scalar usable by the math core (`f32` or `f64`).
pub trait Real:
    nalgebra::RealField + num_traits::FromPrimitive + num_traits::ToPrimitive + Copy
{
    /// Convert an `f64` constant into the scalar type.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
