//! Adaptive one-dimensional quadrature.
//!
//! Globally adaptive bisection driven by the 15-point Gauss–Kronrod rule with
//! its embedded 7-point Gauss rule as error estimate. Intervals are kept in a
//! max-heap keyed by their error estimate and the worst one is split until the
//! requested tolerance is met or the subdivision budget runs out.
//!
//! Two variable substitutions are provided on top of the core routine: a
//! square-root map that removes `(u - lo)^(-1/2)`-type endpoint behaviour and a
//! map of the half line onto a bounded interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and resolution shared by the quadrature routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub hermite_order: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-11, max_subdivisions: 4000, hermite_order: 40 }
    }
}

impl QuadConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize, hermite_order: usize) -> Result<Self> {
        let cfg = Self { abs_tol, rel_tol, max_subdivisions, hermite_order };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::param("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::param("max_subdivisions must be at least 1"));
        }
        if self.hermite_order < 2 {
            return Err(Error::param("hermite_order must be at least 2"));
        }
        Ok(())
    }

    /// Same configuration with both tolerances replaced.
    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
    pub intervals: usize,
}

/// Endpoint(s) at which the square-root substitution is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqrtEnd {
    Left,
    Right,
    Both,
}

// Kronrod abscissae and weights on [-1, 1]; every second abscissa (odd index)
// is a 7-point Gauss node.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(Error::NonFinite("integrand"));
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::NonFinite("integrand"));
        }
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let asc = asc * half.abs();
    let value = kronrod * half;
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    Ok(Segment { lo, hi, value, err })
}

/// Integrates `f` over `[lo, hi]`.
///
/// Returns `Ok` with a zero value when `lo == hi`. A NaN or infinite integrand
/// value aborts with [`Error::NonFinite`]; exhausting the subdivision budget
/// returns [`Error::NonConvergence`] carrying the best value found.
pub fn integrate_1d<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param("integration limits must be finite"));
    }
    if lo > hi {
        return Err(Error::param(format!("integration limits out of order: [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(QuadResult { value: 0.0, err_est: 0.0, intervals: 0 });
    }
    let first = gk15(&mut f, lo, hi)?;
    let mut total = first.value;
    let mut total_err = first.err;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut intervals = 1;
    loop {
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if intervals >= cfg.max_subdivisions {
            return Err(Error::NonConvergence { what: "adaptive quadrature", value: total, err_est: total_err });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval can no longer be split in floating point.
            heap.push(Segment { err: 0.0, ..worst });
            total_err -= worst.err;
            if heap.iter().all(|s| s.err == 0.0) {
                break;
            }
            continue;
        }
        let left = gk15(&mut f, worst.lo, mid)?;
        let right = gk15(&mut f, mid, worst.hi)?;
        total += left.value + right.value - worst.value;
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        intervals += 1;
    }
    // Re-sum to shed the drift of the running updates.
    let value = heap.iter().map(|s| s.value).sum();
    let err_est = heap.iter().map(|s| s.err).sum();
    Ok(QuadResult { value, err_est, intervals })
}

/// Integrates over `[lo, hi]` after the substitution `u = lo + v²` (or
/// `u = hi - v²`) at the selected endpoint(s).
pub fn integrate_sqrt_endpoint<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    end: SqrtEnd,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    if lo > hi {
        return Err(Error::param(format!("integration limits out of order: [{lo}, {hi}]")));
    }
    match end {
        SqrtEnd::Left => {
            let span = (hi - lo).sqrt();
            integrate_1d(|v| 2.0 * v * f(lo + v * v), 0.0, span, cfg)
        }
        SqrtEnd::Right => {
            let span = (hi - lo).sqrt();
            integrate_1d(|v| 2.0 * v * f(hi - v * v), 0.0, span, cfg)
        }
        SqrtEnd::Both => {
            let mid = 0.5 * (lo + hi);
            let span = (mid - lo).sqrt();
            let a = integrate_1d(|v| 2.0 * v * f(lo + v * v), 0.0, span, cfg)?;
            let span = (hi - mid).sqrt();
            let b = integrate_1d(|v| 2.0 * v * f(hi - v * v), 0.0, span, cfg)?;
            Ok(QuadResult {
                value: a.value + b.value,
                err_est: a.err_est + b.err_est,
                intervals: a.intervals + b.intervals,
            })
        }
    }
}

/// Integrates over `[lo, ∞)`.
///
/// Uses `u = lo + v/(1-v)` followed by `v = 1 - w²`, i.e.
/// `u = lo + 1/w² - 1`, so integrands decaying like `u^(-3/2)` map to bounded
/// integrands in `w`.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut f: F, lo: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    if !lo.is_finite() {
        return Err(Error::param("lower limit must be finite"));
    }
    integrate_1d(
        |w| {
            let w2 = w * w;
            let u = lo + (1.0 - w2) / w2;
            if !u.is_finite() {
                return 0.0;
            }
            let val = f(u) * 2.0 / (w2 * w);
            if val.is_finite() {
                val
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn constant_integrand() {
        let r = integrate_1d(|_| 1.0, 0.0, 1.0, &cfg()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        // Plain bisection reaches the tolerance slowly but does get there.
        let loose = cfg().with_tolerances(1e-10, 1e-10);
        let plain = integrate_1d(|x| x.powf(-0.5), 0.0, 1.0, &loose).unwrap();
        assert!((plain.value - 2.0).abs() < 1e-8, "{}", plain.value);
        let sub = integrate_sqrt_endpoint(|x| x.powf(-0.5), 0.0, 1.0, SqrtEnd::Left, &cfg()).unwrap();
        assert!((sub.value - 2.0).abs() < 1e-12);
        assert!(sub.intervals < plain.intervals);
    }

    #[test]
    fn right_and_both_endpoints() {
        let r = integrate_sqrt_endpoint(|x| (1.0 - x).powf(-0.5), 0.0, 1.0, SqrtEnd::Right, &cfg()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        // ∫_0^1 (x(1-x))^{-1/2} dx = π
        let r = integrate_sqrt_endpoint(|x| (x * (1.0 - x)).powf(-0.5), 0.0, 1.0, SqrtEnd::Both, &cfg()).unwrap();
        assert!((r.value - std::f64::consts::PI).abs() < 1e-11);
    }

    #[test]
    fn half_line_heat_potential_d3() {
        // ∫_0^∞ (4πu)^{-3/2} e^{-1/(4u)} du = Γ(1/2) π^{-3/2} / 4 = 1/(4π)
        let r = integrate_half_line(|u| (4.0 * std::f64::consts::PI * u).powf(-1.5) * (-0.25 / u).exp(), 0.0, &cfg())
            .unwrap();
        let exact = 1.0 / (4.0 * std::f64::consts::PI);
        assert!((r.value - exact).abs() < 1e-12 * exact * 100.0, "{}", r.value);
    }

    #[test]
    fn nan_integrand_is_reported() {
        let err = integrate_1d(|x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, &cfg());
        assert_eq!(err.unwrap_err(), Error::NonFinite("integrand"));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let tight = QuadConfig { max_subdivisions: 3, ..cfg() };
        let err = integrate_1d(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &tight).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn reversed_limits_rejected() {
        assert!(integrate_1d(|x| x, 1.0, 0.0, &cfg()).is_err());
        assert_eq!(integrate_1d(|x| x, 1.0, 1.0, &cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(QuadConfig::new(0.0, 1e-8, 10, 10).is_err());
        assert!(QuadConfig::new(1e-8, 1e-8, 0, 10).is_err());
        assert!(QuadConfig::new(1e-8, 1e-8, 10, 1).is_err());
        assert!(QuadConfig::new(1e-8, 1e-8, 10, 2).is_ok());
    }
}
