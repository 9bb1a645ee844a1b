//! The 4G inequality
//!
//! `g_b(s,x,u,z) g_a(u,z,t,y) ≤ M [g_{b−a}(s,x,u,z) ∨ g_a(u,z,t,y)] g_a(s,x,t,y)`
//!
//! with the optimal constant `M = (b/(b−a))^{d/2} exp((d/2) L(a/(b−a)))`.
//!
//! In the reduced variables `τ = (u−s)/(t−u)`,
//! `ξ = |y−z| √(a/(2d(t−u)))`, `η = |z−x| √(a/(2d(t−u)))` and for collinear
//! `x, z, y` the log-ratio of the two sides equals `(d/2)·gap(τ, ξ, η)` with
//!
//! `gap = (ξ+η)²/(1+τ) + ln(1+τ) − L − η²/τ − max(ξ², η²/(ατ) + ln(ατ))`.
//!
//! Non-collinear configurations only make the right side larger.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{dist2, GaussianKernel};
use crate::numerics::{maximize_scalar, nelder_mead_max, RngStream};

/// `ln(1+τ) − ((τ−α)/(1+τ)) ln(ατ)`, maximized over `τ ≥ α ∨ 1/α` to give `L(α)`.
pub fn l_objective(alpha: f64, tau: f64) -> f64 {
    (tau).ln_1p() - (tau - alpha) / (1.0 + tau) * (alpha * tau).ln()
}

/// `f(τ, x) = ln τ + x²/τ`.
pub fn f_fn(tau: f64, x: f64) -> f64 {
    tau.ln() + x * x / tau
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LValue {
    pub l: f64,
    pub tau_star: f64,
    /// Upper end of the final search window.
    pub t_max: f64,
}

const L_GRID: usize = 512;

/// `L(α)` and a maximizer `τ*`.
///
/// The search runs on a log-τ grid over `[α ∨ 1/α, T_max]` with
/// `T_max = 10⁴ (α ∨ 1/α)`, doubled up to three times while the best grid
/// point sits in the last decile. The objective tends to `−ln α` at infinity.
pub fn compute_l(alpha: f64) -> Result<LValue> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param(format!("alpha must be positive, got {alpha}")));
    }
    let t0 = alpha.max(1.0 / alpha);
    let mut t_max = 1e4 * t0;
    for _ in 0..=3 {
        let r = maximize_scalar(|v| l_objective(alpha, v.exp()), t0.ln(), t_max.ln(), L_GRID, 1e-12)?;
        if r.grid_index < L_GRID * 9 / 10 {
            // The grid's first node is exactly ln t0, but exp(ln t0) may be
            // off by an ulp, so the endpoint is evaluated directly too.
            let at_t0 = l_objective(alpha, t0);
            let (l, tau_star) = if at_t0 >= r.value { (at_t0, t0) } else { (r.value, r.argmax.exp()) };
            return Ok(LValue { l, tau_star, t_max });
        }
        t_max *= 2.0;
    }
    Err(Error::NonConvergence { what: "L(alpha) search window", value: alpha, err_est: f64::INFINITY })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourGConstants {
    pub alpha: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub tau_star: f64,
    pub a: f64,
    pub b: f64,
    pub d: usize,
    #[serde(rename = "M")]
    pub m: f64,
    pub ln_m: f64,
    /// `(1−a/b)^{−d}`, present when `a/b ≥ 1/(1+e^{−1/2})`.
    pub simple_formula: Option<f64>,
}

/// Threshold on `a/b` above which `M = (1−a/b)^{−d}`.
pub fn simple_formula_threshold() -> f64 {
    1.0 / (1.0 + (-0.5f64).exp())
}

pub fn compute_m(a: f64, b: f64, d: usize) -> Result<FourGConstants> {
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(Error::param(format!("need 0 < a < b, got a={a}, b={b}")));
    }
    if d == 0 {
        return Err(Error::param("dimension d must be at least 1"));
    }
    let alpha = a / (b - a);
    let lv = compute_l(alpha)?;
    let half_d = 0.5 * d as f64;
    let ln_m = half_d * (b / (b - a)).ln() + half_d * lv.l;
    let simple_formula = (a / b >= simple_formula_threshold()).then(|| (1.0 - a / b).powi(-(d as i32)));
    Ok(FourGConstants { alpha, l: lv.l, tau_star: lv.tau_star, a, b, d, m: ln_m.exp(), ln_m, simple_formula })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub tau: f64,
    pub xi: f64,
    pub eta_var: f64,
}

impl ReducedPoint {
    pub fn new(tau: f64, xi: f64, eta_var: f64) -> Self {
        Self { tau, xi, eta_var }
    }
}

/// The reduced 4G gap; the inequality holds iff `gap ≤ 0` everywhere.
///
/// Evaluated as `ln(1+τ) − L − (τξ−η)²/(τ(1+τ)) − max(0, c − ξ²)` with
/// `c − ξ² = (η/√(ατ) − ξ)(η/√(ατ) + ξ) + ln(ατ)`, which is algebraically
/// identical to the defining form and avoids cancellation at large `ξ, η`.
pub fn reduced_gap(alpha: f64, p: &ReducedPoint, l: f64) -> f64 {
    let ReducedPoint { tau, xi, eta_var: eta } = *p;
    let root = eta / (alpha * tau).sqrt();
    let excess = (root - xi) * (root + xi) + (alpha * tau).ln();
    let mismatch = tau * xi - eta;
    tau.ln_1p() - l - mismatch * mismatch / (tau * (1.0 + tau)) - excess.max(0.0)
}

/// The defining (unsimplified) form of [`reduced_gap`].
pub fn reduced_gap_direct(alpha: f64, p: &ReducedPoint, l: f64) -> f64 {
    let ReducedPoint { tau, xi, eta_var: eta } = *p;
    (xi + eta).powi(2) / (1.0 + tau) + tau.ln_1p()
        - l
        - eta * eta / tau
        - (xi * xi).max(eta * eta / (alpha * tau) + (alpha * tau).ln())
}

/// `argmax_ξ gap(τ, ξ, η) = max(√c⁺, η/τ)` with `c = η²/(ατ) + ln(ατ)`.
///
/// The gap increases in `ξ` while `ξ² < c` and is a downward parabola in
/// `ξ` centred at `η/τ` once `ξ² ≥ c`.
pub fn profiled_xi(alpha: f64, tau: f64, eta: f64) -> f64 {
    let c = eta * eta / (alpha * tau) + (alpha * tau).ln();
    c.max(0.0).sqrt().max(eta / tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: ReducedPoint,
    pub gap: f64,
    pub l: f64,
    pub tau_star: f64,
}

/// On the curve `ξ = η/α`, `ξ² = η²/(ατ) + ln(ατ)` the gap equals
/// `l_objective(τ) − L`.
fn ridge_point(alpha: f64, tau: f64) -> Option<ReducedPoint> {
    let ln_at = (alpha * tau).ln();
    if tau > alpha && ln_at > 0.0 {
        let eta = alpha * (tau * ln_at / (tau - alpha)).sqrt();
        eta.is_finite().then(|| ReducedPoint::new(tau, eta / alpha, eta))
    } else {
        None
    }
}

/// A point where the reduced gap is within `1e-6` of zero, certifying that
/// `L` cannot be lowered.
///
/// Interior maximizers give an exact witness on the ridge. When `τ* = α`
/// the ridge point escapes to infinity, and `τ` is moved towards `α` until
/// the gap exceeds `−10⁻⁷`. When `τ* = 1/α` the origin `ξ = η = 0` works.
pub fn tightness_witness(alpha: f64) -> Result<Witness> {
    let lv = compute_l(alpha)?;
    let l = lv.l;
    let mut best: Option<(ReducedPoint, f64)> = None;
    let mut consider = |p: ReducedPoint| {
        let g = reduced_gap(alpha, &p, l);
        if best.is_none_or(|(_, bg)| g > bg) {
            best = Some((p, g));
        }
    };
    if let Some(p) = ridge_point(alpha, lv.tau_star) {
        consider(p);
    }
    if alpha > 1.0 {
        let mut rel = 0.1;
        for _ in 0..80 {
            if let Some(p) = ridge_point(alpha, alpha * (1.0 + rel)) {
                let g = reduced_gap(alpha, &p, l);
                consider(p);
                if g >= -1e-7 {
                    break;
                }
            }
            rel *= 0.5;
        }
    }
    if alpha <= 1.0 {
        consider(ReducedPoint::new(1.0 / alpha, 0.0, 0.0));
    }
    let (point, gap) = best.ok_or_else(|| Error::Violation("no tightness witness found".into()))?;
    if gap < -1e-6 {
        return Err(Error::NonConvergence { what: "tightness witness", value: gap, err_est: 1e-6 });
    }
    Ok(Witness { point, gap, l, tau_star: lv.tau_star })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupSearch {
    pub sup: f64,
    pub point: ReducedPoint,
    pub starts: usize,
}

const ETA_CAP: f64 = 1e6;

/// Multi-start maximization of the reduced gap.
///
/// Each start draws `τ` log-uniformly in `[(α∨1/α)/10, 10³(α∨1/α)]` and `η`
/// log-uniformly in `[10⁻³, 10⁶]`, then runs Nelder–Mead in `(ln τ, ln η)`
/// with `ξ` set to its exact maximizer [`profiled_xi`]. The wide `η` range
/// is needed because for `α ≥ e^{1/2}` the gap only approaches its supremum
/// as `η → ∞`.
pub fn gap_sup_search(alpha: f64, l: f64, starts: usize, rng: &mut RngStream) -> SupSearch {
    let t0 = alpha.max(1.0 / alpha);
    let objective = |v: &[f64]| {
        let tau = v[0].exp();
        let eta = v[1].exp().min(ETA_CAP);
        let xi = profiled_xi(alpha, tau, eta);
        reduced_gap(alpha, &ReducedPoint::new(tau, xi, eta), l)
    };
    let seeds: Vec<[f64; 2]> = (0..starts)
        .map(|_| [rng.uniform((t0 / 10.0).ln(), (t0 * 1e3).ln()), rng.uniform(1e-3f64.ln(), ETA_CAP.ln())])
        .collect();
    let results: Vec<(Vec<f64>, f64)> =
        seeds.par_iter().map(|x0| nelder_mead_max(objective, x0, &[0.5, 0.5], 1e-13, 1e-16, 20_000)).collect();
    let (x, sup) =
        results.into_iter().fold((vec![0.0, 0.0], f64::NEG_INFINITY), |acc, r| if r.1 > acc.1 { r } else { acc });
    let tau = x[0].exp();
    let eta = x[1].exp().min(ETA_CAP);
    SupSearch { sup, point: ReducedPoint::new(tau, profiled_xi(alpha, tau, eta), eta), starts }
}

/// Largest raw gap over random points with `τ` log-uniform in `[10⁻³, 10³]`
/// and `ξ, η` uniform in `[0, 10]` (no profiling).
pub fn gap_random_max(alpha: f64, l: f64, samples: usize, rng: &mut RngStream) -> (f64, ReducedPoint) {
    let mut best = (f64::NEG_INFINITY, ReducedPoint::new(1.0, 0.0, 0.0));
    for _ in 0..samples {
        let p = ReducedPoint::new(rng.log_uniform(1e-3, 1e3), rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0));
        let g = reduced_gap(alpha, &p, l);
        if g > best.0 {
            best = (g, p);
        }
    }
    best
}

/// Largest sampled `f(1+τ, ξ+η) − [f(1,ξ) ∨ f(ατ,η) + η²/τ + L]`.
pub fn pointwise_ratio_check(alpha: f64, l: f64, samples: usize, rng: &mut RngStream) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let tau = rng.log_uniform(1e-3, 1e3);
        let xi = rng.uniform(0.0, 10.0);
        let eta = rng.uniform(0.0, 10.0);
        let lhs = f_fn(1.0 + tau, xi + eta);
        let rhs = f_fn(1.0, xi).max(f_fn(alpha * tau, eta)) + eta * eta / tau + l;
        worst = worst.max(lhs - rhs);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeConfig {
    pub s: f64,
    pub u: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourGCheck {
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    pub holds: bool,
}

impl FourGCheck {
    pub fn lhs(&self) -> f64 {
        self.ln_lhs.exp()
    }

    pub fn rhs(&self) -> f64 {
        self.ln_rhs.exp()
    }

    pub fn log_ratio(&self) -> f64 {
        self.ln_lhs - self.ln_rhs
    }
}

/// Both sides of the 4G inequality, in log space, with `g_{c}` for a
/// general left-branch scale `c` (the inequality itself uses `c = b − a`).
#[allow(clippy::too_many_arguments)]
pub fn four_g_sides(a: f64, b: f64, c_left: f64, d: usize, m: f64, cfg: &SpaceTimeConfig) -> Result<FourGCheck> {
    let SpaceTimeConfig { s, u, t, x, z, y } = cfg;
    if !(s < u && u < t) {
        return Err(Error::param(format!("need s < u < t, got {s}, {u}, {t}")));
    }
    if x.len() != d || z.len() != d || y.len() != d {
        return Err(Error::param("point dimension mismatch"));
    }
    if !(m > 0.0) {
        return Err(Error::param("M must be positive"));
    }
    let ka = GaussianKernel::new(a, d)?;
    let kb = GaussianKernel::new(b, d)?;
    let kc = GaussianKernel::new(c_left, d)?;
    let r_xz = dist2(x, z);
    let r_zy = dist2(z, y);
    let r_xy = dist2(x, y);
    let ln_lhs = kb.ln_eval_r2(u - s, r_xz) + ka.ln_eval_r2(t - u, r_zy);
    let branch = kc.ln_eval_r2(u - s, r_xz).max(ka.ln_eval_r2(t - u, r_zy));
    let ln_rhs = m.ln() + branch + ka.ln_eval_r2(t - s, r_xy);
    Ok(FourGCheck { ln_lhs, ln_rhs, holds: ln_lhs <= ln_rhs + 1e-12f64.ln_1p() })
}

#[allow(clippy::too_many_arguments)]
pub fn verify_4g_pointwise(
    a: f64,
    b: f64,
    d: usize,
    s: f64,
    u: f64,
    t: f64,
    x: &[f64],
    z: &[f64],
    y: &[f64],
    m: f64,
) -> Result<FourGCheck> {
    if !(a > 0.0 && b > a) {
        return Err(Error::param(format!("need 0 < a < b, got a={a}, b={b}")));
    }
    let cfg = SpaceTimeConfig { s, u, t, x: x.to_vec(), z: z.to_vec(), y: y.to_vec() };
    four_g_sides(a, b, b - a, d, m, &cfg)
}

/// Collinear configuration realizing a reduced point: `s = 0`, `t − u = h`,
/// `u = τh`, `x = 0`, `z = |z−x| e₁`, `y = (|z−x| + |y−z|) e₁`.
pub fn witness_to_config(a: f64, d: usize, p: &ReducedPoint, h: f64) -> SpaceTimeConfig {
    let scale = (2.0 * d as f64 * h / a).sqrt();
    let r1 = p.eta_var * scale;
    let r2 = p.xi * scale;
    let mut x = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut y = vec![0.0; d];
    x[0] = 0.0;
    z[0] = r1;
    y[0] = r1 + r2;
    SpaceTimeConfig { s: 0.0, u: p.tau * h, t: p.tau * h + h, x, z, y }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub samples: usize,
    pub violations: usize,
    pub max_log_ratio: f64,
    pub worst: Option<SpaceTimeConfig>,
}

const BLOCK: usize = 4096;

fn random_config(d: usize, rng: &mut RngStream) -> SpaceTimeConfig {
    let s = rng.uniform(-1.0, 1.0);
    let u = s + rng.log_uniform(1e-3, 10.0);
    let t = u + rng.log_uniform(1e-3, 10.0);
    // Mixture of spatial scales: coinciding points, bulk and far tails.
    const SPREADS: [f64; 5] = [0.0, 0.5, 1.0, 3.0, 10.0];
    let sx = SPREADS[rng.index(SPREADS.len())];
    let sy = SPREADS[rng.index(SPREADS.len())];
    let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let z: Vec<f64> = x.iter().map(|v| v + sx * (u - s).sqrt() * rng.normal()).collect();
    let y: Vec<f64> = z.iter().map(|v| v + sy * (t - u).sqrt() * rng.normal()).collect();
    SpaceTimeConfig { s, u, t, x, z, y }
}

/// Checks the 4G inequality at `samples` random configurations.
///
/// Work is split into fixed blocks, each with its own sub-stream, so the
/// report does not depend on the thread count.
pub fn sampling_suite(a: f64, b: f64, d: usize, m: f64, samples: usize, rng: &RngStream) -> Result<SamplingReport> {
    if !(a > 0.0 && b > a) {
        return Err(Error::param(format!("need 0 < a < b, got a={a}, b={b}")));
    }
    let blocks = samples.div_ceil(BLOCK);
    let per_block: Vec<Result<(usize, f64, Option<SpaceTimeConfig>)>> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut r = rng.substream(blk as u64);
            let n = BLOCK.min(samples - blk * BLOCK);
            let mut violations = 0;
            let mut worst = (f64::NEG_INFINITY, None);
            for _ in 0..n {
                let cfg = random_config(d, &mut r);
                let chk = four_g_sides(a, b, b - a, d, m, &cfg)?;
                if !chk.holds {
                    violations += 1;
                }
                if chk.log_ratio() > worst.0 {
                    worst = (chk.log_ratio(), Some(cfg));
                }
            }
            Ok((violations, worst.0, worst.1))
        })
        .collect();
    let mut report = SamplingReport { samples, violations: 0, max_log_ratio: f64::NEG_INFINITY, worst: None };
    for blk in per_block {
        let (v, lr, cfg) = blk?;
        report.violations += v;
        if lr > report.max_log_ratio {
            report.max_log_ratio = lr;
            report.worst = cfg;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessWitness {
    pub delta: f64,
    pub point: ReducedPoint,
    pub config: SpaceTimeConfig,
    /// `ln(lhs/rhs)` with `g_{(b−a)(1+δ)}` in place of `g_{b−a}`; positive
    /// means the modified inequality fails.
    pub ln_ratio_modified: f64,
    /// The same configuration checked against the true inequality.
    pub ln_ratio_original: f64,
}

/// Searches for a configuration where the 4G inequality with `g_{b−a}`
/// replaced by `g_{(b−a)(1+δ)}` fails.
///
/// The two reduced branch differences are maximized jointly (their minimum)
/// by Nelder–Mead over `τ ∈ [10⁻², 10²]`, `ξ, η ∈ [10⁻³, 10²]`; the best point
/// is then checked in the original variables.
pub fn b_minus_a_sharpness(
    a: f64,
    b: f64,
    d: usize,
    delta: f64,
    starts: usize,
    rng: &mut RngStream,
) -> Result<SharpnessWitness> {
    if !(delta > 0.0) {
        return Err(Error::param("delta must be positive"));
    }
    let consts = compute_m(a, b, d)?;
    let (alpha, l) = (consts.alpha, consts.l);
    let lo = [1e-2f64.ln(), 1e-3f64.ln(), 1e-3f64.ln()];
    let hi = [1e2f64.ln(), 1e2f64.ln(), 1e2f64.ln()];
    let unpack = |v: &[f64]| -> ReducedPoint {
        let c: Vec<f64> = (0..3).map(|i| v[i].clamp(lo[i], hi[i]).exp()).collect();
        ReducedPoint::new(c[0], c[1], c[2])
    };
    let objective = |v: &[f64]| {
        let ReducedPoint { tau, xi, eta_var: eta } = unpack(v);
        let common = (xi + eta).powi(2) / (1.0 + tau) + tau.ln_1p() - eta * eta / tau - l;
        let left = common - xi * xi + delta * eta * eta / (alpha * tau) - delta.ln_1p();
        let right = common - eta * eta / (alpha * tau) - (alpha * tau).ln();
        left.min(right)
    };
    let mut best = (vec![0.0; 3], f64::NEG_INFINITY);
    for _ in 0..starts {
        let x0: Vec<f64> = (0..3).map(|i| rng.uniform(lo[i], hi[i])).collect();
        let r = nelder_mead_max(objective, &x0, &[0.5, 0.5, 0.5], 1e-10, 1e-14, 5000);
        if r.1 > best.1 {
            best = r;
        }
    }
    let point = unpack(&best.0);
    let config = witness_to_config(a, d, &point, 1.0);
    let modified = four_g_sides(a, b, (b - a) * (1.0 + delta), d, consts.m, &config)?;
    let original = four_g_sides(a, b, b - a, d, consts.m, &config)?;
    Ok(SharpnessWitness {
        delta,
        point,
        config,
        ln_ratio_modified: modified.log_ratio(),
        ln_ratio_original: original.log_ratio(),
    })
}

/// `ln(1 + e^{1/2})`, the value of `L` at `α = e^{1/2}`.
pub fn l_at_sqrt_e() -> f64 {
    E.sqrt().ln_1p()
}
