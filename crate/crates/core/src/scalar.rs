//! Scalar abstraction shared by every numerical module.
//!
//! All model, integration and reduction code is written against [`Real`]
//! (and `nalgebra::ComplexField<RealField = T>` where complex bases are
//! involved). `f32` and `f64` are the two provided instances.

use nalgebra::{Complex, DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable throughout the crate.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static + backend::DenseEigen
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) mod backend {
    use super::*;

    /// Nonsymmetric eigendecomposition backed by `faer`.
    ///
    /// Sealed: implemented for `f32` and `f64` only.
    pub trait DenseEigen: Sized {
        /// Returns `(eigenvalues, right eigenvectors)` of a general real matrix.
        fn general_eigen(a: &DMatrix<Self>) -> Option<(Vec<Complex<Self>>, DMatrix<Complex<Self>>)>;
    }

    macro_rules! impl_dense_eigen {
        ($t:ty) => {
            impl DenseEigen for $t {
                fn general_eigen(
                    a: &DMatrix<$t>,
                ) -> Option<(Vec<Complex<$t>>, DMatrix<Complex<$t>>)> {
                    let n = a.nrows();
                    let fa = faer::Mat::<$t>::from_fn(n, n, |i, j| a[(i, j)]);
                    let evd = fa.eigen().ok()?;
                    let s = evd.S();
                    let u = evd.U();
                    let values = (0..n).map(|i| s[i]).collect();
                    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
                    Some((values, vectors))
                }
            }
        };
    }

    impl_dense_eigen!(f32);
    impl_dense_eigen!(f64);
}
