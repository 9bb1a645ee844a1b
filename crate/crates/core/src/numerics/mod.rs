//! Numerical primitives shared by the other modules.

pub mod interp;
pub mod optimize;
pub mod quad;
pub mod rng;
pub mod rules;
pub mod special;

pub use interp::{ChebyshevLobatto, PeriodicGrid};
pub use optimize::{golden_section_max, maximize_scalar, minimize_scalar, nelder_mead_max, OptResult};
pub use quad::{integrate_1d, integrate_half_line, integrate_sqrt_endpoint, QuadConfig, QuadResult, SqrtEnd};
pub use rng::RngStream;
pub use rules::{gauss_hermite, gauss_legendre, GaussRule};
pub use special::{ball_volume, gamma, ln_gamma, sphere_area, upper_gamma_half_integer};
