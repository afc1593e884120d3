//! Generalized energy distances between finitely supported signed measures.
//!
//! Given a conditionally negative definite kernel `gamma` on Euclidean space, hyperbolic
//! space or the sphere, and a Bernstein or `CM_l` function `psi`, this crate evaluates the
//! pairing `I(mu, nu) = s * sum mu_i nu_j psi(gamma(x_i, y_j))` and provides numerical
//! certificates for its structural properties.
//!
//! ```
//! use bernergy::{CndKernel, DiscreteSignedMeasure, Point, PsiFunction};
//! use bernergy::energy::inner_product_bernstein;
//!
//! let x = Point::euclidean(vec![0.0]).unwrap();
//! let y = Point::euclidean(vec![1.0]).unwrap();
//! let eta = DiscreteSignedMeasure::new(vec![x, y], vec![1.0, -1.0]).unwrap();
//! let value = inner_product_bernstein(&eta, &eta, &CndKernel::euclidean_squared(), &PsiFunction::sqrt())
//!     .unwrap();
//! assert_eq!(value, 2.0);
//! ```
//!
//! Modules:
//!
//! - [`spaces`]: points, kernels, the Lorentz product and the large-argument arccosh series.
//! - [`cmfun`]: the function catalog and integral representations.
//! - [`energy`]: measures, moment constraints, inner products and the centered kernel.
//! - [`verify`]: spectral and metric certificates.
//! - [`stats`]: two-sample statistics and the permutation test.

pub mod cmfun;
pub mod energy;
pub mod error;
pub mod gram;
pub mod quadrature;
pub mod sampling;
pub mod spaces;
pub mod stats;
pub mod verify;

pub use cmfun::{PsiFunction, PsiKind};
pub use energy::{CenteredKernel, DiscreteSignedMeasure};
pub use error::{Error, Result};
pub use gram::GramMatrix;
pub use spaces::{CndKernel, Point, Space};
pub use stats::{SampleSet, TestResult};
pub use verify::VerificationReport;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub mod overview {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    pub mod spaces {}
    #[doc = include_str!("../../../book/src/functions.md")]
    pub mod functions {}
    #[doc = include_str!("../../../book/src/energy.md")]
    pub mod energy {}
    #[doc = include_str!("../../../book/src/verification.md")]
    pub mod verification {}
    #[doc = include_str!("../../../book/src/testing.md")]
    pub mod testing {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
