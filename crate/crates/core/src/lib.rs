//! Resolution limits for two incoherent point sources.
//!
//! Quantum Fisher information and Cramér-Rao bounds for the centroid and
//! separation of a weak source pair, the classical information of direct
//! imaging, the SLIVER interferometer and Hermite-Gaussian mode sorting, and
//! a conditioned Monte-Carlo harness for their maximum-likelihood estimators.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`.

pub mod direct;
pub mod error;
pub mod fisher;
pub mod mc;
pub mod psf;
pub mod qbound;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod sld;
pub mod sliver;
pub mod spade;

pub use error::{Error, Result};
pub use fisher::FisherMatrix;
pub use mc::{run_mc, MCConfig, MCResult, Scheme};
pub use psf::Psf;
pub use qbound::{qcr_bound, qfi, SourceConfig};
pub use scalar::Real;

pub type Psf64 = psf::Psf<f64>;
pub type SourceConfig64 = qbound::SourceConfig<f64>;
pub type FisherMatrix64 = fisher::FisherMatrix<f64>;
pub type VarianceBounds64 = qbound::VarianceBounds<f64>;
pub type DirectFI64 = direct::DirectFI<f64>;
pub type SliverProbs64 = sliver::SliverProbs<f64>;
pub type MCConfig64 = mc::MCConfig<f64>;
pub type MCResult64 = mc::MCResult<f64>;
pub type MCRow64 = mc::MCRow<f64>;

pub type Psf32 = psf::Psf<f32>;
pub type SourceConfig32 = qbound::SourceConfig<f32>;
pub type FisherMatrix32 = fisher::FisherMatrix<f32>;
