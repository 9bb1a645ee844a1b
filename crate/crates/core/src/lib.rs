//! Schrödinger perturbations of Gaussian transition densities.
//!
//! The crate computes the perturbation series `p̃ = Σ pₙ` of the Gaussian
//! kernels `g_a`, the optimal 4G constant `M(a, b, d)`, Kato-class functionals
//! with explicit constants, splittings of superadditive functions and the
//! resulting Gaussian upper bounds, together with checks of every inequality
//! involved.

pub mod bounds;
pub mod error;
pub mod fourg;
pub mod kato;
pub mod kernels;
pub mod numerics;
pub mod series;
pub mod superadd;

pub use error::{Error, Result};
pub use fourg::{FourGConstants, ReducedPoint};
pub use kato::{KatoEstimate, Potential, PotentialKind, Profile};
pub use kernels::{GaussianKernel, SpaceTimePoint};
pub use numerics::{QuadConfig, RngStream};
pub use series::{Engine, SeriesRequest, SeriesResult, TailCertificate};
pub use superadd::{Splitting, SuperadditiveQ};
