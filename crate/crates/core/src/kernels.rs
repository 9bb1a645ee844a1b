//! The Gaussian kernels
//! `g_a(s,x,t,y) = [4π(t−s)/a]^{−d/2} exp(−a|y−x|²/(4(t−s)))`, zero for `s ≥ t`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gauss_hermite, integrate_1d, QuadConfig, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub a: f64,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        Self { t, x }
    }
}

pub(crate) fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl GaussianKernel {
    pub fn new(a: f64, d: usize) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::param(format!("kernel scale a must be positive, got {a}")));
        }
        if d == 0 {
            return Err(Error::param("dimension d must be at least 1"));
        }
        Ok(Self { a, d })
    }

    /// `ln g_a` as a function of the elapsed time and the squared distance;
    /// `-∞` when `dt ≤ 0`.
    #[inline]
    pub fn ln_eval_r2(&self, dt: f64, r2: f64) -> f64 {
        if !(dt > 0.0) {
            return f64::NEG_INFINITY;
        }
        -0.5 * self.d as f64 * (4.0 * PI * dt / self.a).ln() - self.a * r2 / (4.0 * dt)
    }

    #[inline]
    pub fn eval_r2(&self, dt: f64, r2: f64) -> f64 {
        if !(dt > 0.0) {
            return 0.0;
        }
        (4.0 * PI * dt / self.a).powf(-0.5 * self.d as f64) * (-self.a * r2 / (4.0 * dt)).exp()
    }

    pub fn ln_eval(&self, s: f64, x: &[f64], t: f64, y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        debug_assert_eq!(y.len(), self.d);
        self.ln_eval_r2(t - s, dist2(x, y))
    }

    pub fn eval(&self, s: f64, x: &[f64], t: f64, y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        debug_assert_eq!(y.len(), self.d);
        self.eval_r2(t - s, dist2(x, y))
    }

    pub fn eval_points(&self, from: &SpaceTimePoint, to: &SpaceTimePoint) -> f64 {
        self.eval(from.t, &from.x, to.t, &to.x)
    }

    /// The one-dimensional factor of the kernel, so that
    /// `g_a = Π_i one_dim(dt, x_i − y_i)`.
    #[inline]
    pub fn one_dim(&self, dt: f64, dx: f64) -> f64 {
        GaussianKernel { a: self.a, d: 1 }.eval_r2(dt, dx * dx)
    }

    /// Standard deviation of each coordinate of `y` under `g_a(s,x,t,·)`.
    pub fn coord_std(&self, dt: f64) -> f64 {
        (2.0 * dt / self.a).sqrt()
    }
}

/// Convenience wrapper for [`GaussianKernel::eval`].
pub fn gauss_eval(k: &GaussianKernel, s: f64, x: &[f64], t: f64, y: &[f64]) -> f64 {
    k.eval(s, x, t, y)
}

fn check_dims(k: &GaussianKernel, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != k.d || y.len() != k.d {
        return Err(Error::param(format!("points must have length d = {}, got {} and {}", k.d, x.len(), y.len())));
    }
    Ok(())
}

/// `∫ g(s,x,u,z) g(u,z,t,y) dz` by coordinate-wise adaptive quadrature.
pub fn ck_integral(k: &GaussianKernel, s: f64, u: f64, t: f64, x: &[f64], y: &[f64], cfg: &QuadConfig) -> Result<f64> {
    check_dims(k, x, y)?;
    if !(s < u && u < t) {
        return Err(Error::param(format!("need s < u < t, got {s}, {u}, {t}")));
    }
    let mut prod = 1.0;
    for (&xi, &yi) in x.iter().zip(y) {
        // The integrand is a Gaussian in z centred at the bridge mean.
        let lam = (u - s) / (t - s);
        let mean = xi + lam * (yi - xi);
        let sd = (2.0 * (u - s) * (t - u) / ((t - s) * k.a)).sqrt();
        let half = 40.0 * sd;
        let r = integrate_1d(|z| k.one_dim(u - s, z - xi) * k.one_dim(t - u, yi - z), mean - half, mean + half, cfg)?;
        prod *= r.value;
    }
    Ok(prod)
}

/// `|∫ g(s,x,u,z) g(u,z,t,y) dz − g(s,x,t,y)|`.
pub fn ck_residual(k: &GaussianKernel, s: f64, u: f64, t: f64, x: &[f64], y: &[f64], cfg: &QuadConfig) -> Result<f64> {
    let lhs = ck_integral(k, s, u, t, x, y, cfg)?;
    Ok((lhs - k.eval(s, x, t, y)).abs())
}

/// `∫ g_a(s,x,t,y) dy` by coordinate-wise adaptive quadrature.
pub fn normalization_quadrature(k: &GaussianKernel, s: f64, x: &[f64], t: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(s < t) {
        return Err(Error::param("normalization needs s < t"));
    }
    if x.len() != k.d {
        return Err(Error::param("point dimension mismatch"));
    }
    let sd = k.coord_std(t - s);
    let mut prod = 1.0;
    for &xi in x {
        let r = integrate_1d(|y| k.one_dim(t - s, y - xi), xi - 40.0 * sd, xi + 40.0 * sd, cfg)?;
        prod *= r.value;
    }
    Ok(prod)
}

/// `∫ g_a(s,x,t,y) dy` by the change of variables `y = x + √(4(t−s)/a) ξ`
/// and a tensor Gauss–Hermite rule (each factor evaluated through the kernel).
pub fn normalization_hermite(k: &GaussianKernel, s: f64, x: &[f64], t: f64, order: usize) -> Result<f64> {
    if !(s < t) {
        return Err(Error::param("normalization needs s < t"));
    }
    let rule = gauss_hermite(order)?;
    let scale = (4.0 * (t - s) / k.a).sqrt();
    let mut prod = 1.0;
    for _ in x {
        let one: f64 = rule.iter().map(|(xi, w)| w * (xi * xi).exp() * k.one_dim(t - s, scale * xi) * scale).sum();
        prod *= one;
    }
    Ok(prod)
}

/// Largest sampled value of `g_b / ((b/a)^{d/2} g_a) − 1`, the relative
/// violation of `g_b ≤ (b/a)^{d/2} g_a`.
///
/// Points are drawn with `t − s` log-uniform in `[1e-3, 10]` and `y − x`
/// Gaussian on the `√(t−s)` scale, with every tenth sample at `x = y`. At
/// coinciding points both sides agree analytically, so the result there is
/// a rounding-level quantity (a few ulps).
pub fn scaling_bound_check(a: f64, b: f64, d: usize, samples: usize, rng: &mut RngStream) -> Result<f64> {
    if !(a > 0.0 && b >= a) {
        return Err(Error::param(format!("need 0 < a <= b, got a={a}, b={b}")));
    }
    let ka = GaussianKernel::new(a, d)?;
    let kb = GaussianKernel::new(b, d)?;
    let ln_factor = 0.5 * d as f64 * (b / a).ln();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..samples {
        let dt = rng.log_uniform(1e-3, 10.0);
        let spread = if i % 10 == 0 { 0.0 } else { 3.0 * dt.sqrt() };
        let r2: f64 = (0..d).map(|_| (spread * rng.normal()).powi(2)).sum();
        let v = (kb.ln_eval_r2(dt, r2) - ln_factor - ka.ln_eval_r2(dt, r2)).exp_m1();
        worst = worst.max(v);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeGRatio {
    /// From the three kernels evaluated directly (in log space).
    pub direct: f64,
    /// `2^{d/2} e^{a|y|²/(4t)}`.
    pub closed_form: f64,
}

/// `[g_a(0,0,t,y) ∧ g_a(t,y,2t,2y)] / g_a(0,0,2t,2y)`, which grows without
/// bound in `|y|`: the 3G inequality fails for Gaussian kernels.
pub fn three_g_failure(a: f64, d: usize, t: f64, y: &[f64]) -> Result<ThreeGRatio> {
    if !(t > 0.0) {
        return Err(Error::param("three_g_failure needs t > 0"));
    }
    let k = GaussianKernel::new(a, d)?;
    if y.len() != d {
        return Err(Error::param("point dimension mismatch"));
    }
    let zero = vec![0.0; d];
    let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
    let left = k.ln_eval(0.0, &zero, t, y);
    let right = k.ln_eval(t, y, 2.0 * t, &y2);
    let whole = k.ln_eval(0.0, &zero, 2.0 * t, &y2);
    let r2 = dist2(y, &zero);
    Ok(ThreeGRatio {
        direct: (left.min(right) - whole).exp(),
        closed_form: 2f64.powf(0.5 * d as f64) * (a * r2 / (4.0 * t)).exp(),
    })
}

/// Smallest `|y|` at which the 3G ratio reaches `level`.
pub fn three_g_radius(a: f64, d: usize, t: f64, level: f64) -> f64 {
    let excess = level.ln() - 0.5 * d as f64 * 2f64.ln();
    (4.0 * t * excess.max(0.0) / a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn plug_in_value() {
        let k = GaussianKernel::new(1.0, 1).unwrap();
        assert!((k.eval(0.0, &[0.0], 1.0, &[0.0]) - 0.282_094_791_773_878_1).abs() < 1e-15);
        assert_eq!(k.eval(1.0, &[0.0], 0.0, &[0.0]), 0.0);
        assert_eq!(k.eval(1.0, &[0.0], 1.0, &[0.0]), 0.0);
        assert_eq!(k.ln_eval(1.0, &[0.0], 1.0, &[0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(GaussianKernel::new(0.0, 1).is_err());
        assert!(GaussianKernel::new(1.0, 0).is_err());
        assert!(GaussianKernel::new(f64::NAN, 2).is_err());
    }

    #[test]
    fn ck_examples() {
        let k = GaussianKernel::new(1.0, 1).unwrap();
        assert!(ck_residual(&k, 0.0, 0.5, 1.0, &[0.0], &[0.0], &cfg()).unwrap() <= 1e-10);
        let k = GaussianKernel::new(3.0, 2).unwrap();
        assert!(ck_residual(&k, 0.0, 0.3, 1.0, &[-1.2, 1.9], &[0.4, -2.0], &cfg()).unwrap() <= 1e-8);
        let k = GaussianKernel::new(1.0, 1).unwrap();
        for eps in [1e-3, 1e-6, 1e-9] {
            let r = ck_residual(&k, 0.0, eps, 1.0, &[0.3], &[-0.4], &cfg()).unwrap();
            assert!(r <= 1e-10, "u-s={eps}: {r}");
        }
    }

    #[test]
    fn normalization_both_ways() {
        let k = GaussianKernel::new(0.7, 2).unwrap();
        let q = normalization_quadrature(&k, 0.1, &[1.0, -3.0], 2.5, &cfg()).unwrap();
        assert!((q - 1.0).abs() < 1e-10);
        let k = GaussianKernel::new(2.0, 7).unwrap();
        let h = normalization_hermite(&k, 0.0, &[0.0; 7], 0.3, 20).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_examples() {
        let mut rng = RngStream::new(11, 0);
        let v = scaling_bound_check(1.0, 2.0, 3, 10_000, &mut rng).unwrap();
        assert!(v <= 1e-14, "{v}");
        let v = scaling_bound_check(1.5, 1.5, 2, 1000, &mut rng).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn three_g_examples() {
        let r = three_g_failure(1.0, 1, 1.0, &[0.0]).unwrap();
        assert!((r.direct - 2f64.sqrt()).abs() < 1e-14 && (r.closed_form - 2f64.sqrt()).abs() < 1e-15);
        let r = three_g_failure(1.0, 1, 1.0, &[10.0]).unwrap();
        let exact = 2f64.sqrt() * 25f64.exp();
        assert!(((r.direct - exact) / exact).abs() < 1e-12);
        assert!(((r.closed_form - exact) / exact).abs() < 1e-14);
        let far = three_g_failure(1.0, 1, 1.0, &[20.0]).unwrap();
        assert!(far.direct > r.direct);
        let rad = three_g_radius(1.0, 3, 1.0, 1e6);
        let at = three_g_failure(1.0, 3, 1.0, &[rad * 1.0001, 0.0, 0.0]).unwrap();
        assert!(at.direct > 1e6);
    }

    proptest! {
        #[test]
        fn time_homogeneity(
            s in -5.0f64..5.0, dt in 1e-3f64..5.0, x in -3.0f64..3.0, y in -3.0f64..3.0,
        ) {
            // g_2(s,x,t,y) = g_1(s/2, x, t/2, y)
            let k1 = GaussianKernel::new(1.0, 1).unwrap();
            let k2 = GaussianKernel::new(2.0, 1).unwrap();
            let t = s + dt;
            let lhs = k2.eval(s, &[x], t, &[y]);
            let rhs = k1.eval(s / 2.0, &[x], t / 2.0, &[y]);
            prop_assert!((lhs - rhs).abs() <= 1e-14 * lhs.max(1.0));
        }

        #[test]
        fn symmetry_and_shift(
            a in 0.1f64..5.0, ticks in 1u32..5000,
            x in prop::collection::vec(-3.0f64..3.0, 3), y in prop::collection::vec(-3.0f64..3.0, 3),
            shift in -10i32..10,
        ) {
            // Dyadic times keep (t + r) − (s + r) exact.
            let dt = ticks as f64 / 1024.0;
            let shift = shift as f64;
            let k = GaussianKernel::new(a, 3).unwrap();
            prop_assert_eq!(k.eval(0.0, &x, dt, &y), k.eval(0.0, &y, dt, &x));
            let base = k.eval(0.0, &x, dt, &y);
            let shifted = k.eval(shift, &x, shift + dt, &y);
            prop_assert_eq!(base, shifted);
        }

        #[test]
        fn normalization_random(a in 0.2f64..5.0, dt in 1e-3f64..10.0, x in -5.0f64..5.0, x2 in -5.0f64..5.0) {
            let k = GaussianKernel::new(a, 2).unwrap();
            let n = normalization_quadrature(&k, 0.0, &[x, x2], dt, &QuadConfig::default()).unwrap();
            prop_assert!((n - 1.0).abs() < 1e-8);
        }
    }
}
