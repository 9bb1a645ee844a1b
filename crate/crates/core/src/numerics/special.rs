use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::param(format!("ln_gamma needs a positive finite argument, got {x}")));
    }
    Ok(libm::lgamma_r(x).0)
}

/// `Γ(x)` for `x > 0`.
pub fn gamma(x: f64) -> Result<f64> {
    Ok(ln_gamma(x)?.exp())
}

/// Upper incomplete gamma `Γ(s, x)` for half-integer `s = twice_s / 2 ≥ 1/2`
/// and `x ≥ 0`, by upward recurrence from `Γ(1/2, x)` or `Γ(1, x)`.
pub fn upper_gamma_half_integer(twice_s: u32, x: f64) -> Result<f64> {
    if twice_s == 0 {
        return Err(Error::param("upper incomplete gamma needs s > 0"));
    }
    if !(x >= 0.0) {
        return Err(Error::param(format!("upper incomplete gamma needs x >= 0, got {x}")));
    }
    let (mut s, mut g) = if twice_s % 2 == 1 { (0.5, PI.sqrt() * libm::erfc(x.sqrt())) } else { (1.0, (-x).exp()) };
    let target = 0.5 * twice_s as f64;
    let ex = (-x).exp();
    while s < target {
        g = s * g + x.powf(s) * ex;
        s += 1.0;
    }
    Ok(g)
}

/// Surface area `σ_{d−1} = 2π^{d/2}/Γ(d/2)` of the unit sphere in `ℝ^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    2.0 * (h * PI.ln() - libm::lgamma_r(h).0).exp()
}

/// Volume of the ball of radius `r` in `ℝ^d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let h = 0.5 * d as f64;
    (h * PI.ln() - libm::lgamma_r(h + 1.0).0).exp() * r.powi(d as i32)
}
