//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All decoders are written against [`Real`] so the same code runs in `f32`
//! and `f64`. Complex quantities use [`num_complex::Complex`] over the same
//! real type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`].
pub type Cplx<F> = Complex<F>;

/// Conjugated inner product `<a, b> = sum conj(a_i) * b_i`.
#[inline]
pub fn cdot<F: Real>(a: &[Cplx<F>], b: &[Cplx<F>]) -> Cplx<F> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(Cplx::new(F::zero(), F::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// Squared Euclidean norm of a complex vector.
#[inline]
pub fn cnorm_sqr<F: Real>(a: &[Cplx<F>]) -> F {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Real dot product.
#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}
