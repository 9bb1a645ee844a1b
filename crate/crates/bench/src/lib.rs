//! Shared inputs for the benchmarks.

use gausspert_core::{GaussianKernel, Potential, PotentialKind, Profile, SeriesRequest};

/// Gaussian bump `coef·exp(−(|z|/width)²)` in `d = 1`.
pub fn bump(coef: f64, width: f64) -> Potential {
    Potential::new(1, PotentialKind::Radial { u: Profile::Gaussian { coef, width }, cutoff: None }).expect("valid bump")
}

pub fn bump_request() -> SeriesRequest {
    let k = GaussianKernel::new(1.0, 1).expect("valid kernel");
    SeriesRequest::new(k, bump(1.0, 0.7), 0.0, vec![0.2], 1.0, vec![-0.4])
}
