//! Class-N membership checks and the explicit upper bounds for `p̃`.
//!
//! `q ∈ N(p, p*, C, η, Q)` means `p ≤ C p*` together with
//! `∫_s^t ∫ p(s,x,u,z) q(u,z) p*(u,z,t,y) dz du ≤ [η + Q(s,t)] p*(s,x,t,y)`.
//! Membership is checked at sampled points only; the record keeps every
//! sample so a failure can be reproduced.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourg::compute_m;
use crate::kato::{c0, half_ball_volume, Potential};
use crate::kernels::GaussianKernel;
use crate::numerics::{gauss_hermite, gauss_legendre, integrate_1d, minimize_scalar, QuadConfig, RngStream};
use crate::series::TailCertificate;
use crate::superadd::{split, SuperadditiveQ};

const SAMPLE_TOL: f64 = 1e-8;
const MC_TIME_NODES: usize = 64;
const MC_SPACE_SAMPLES: usize = 1024;

/// `binom(n+k−1, k−1) θⁿ Cᵏ`, evaluated as a product in log space.
pub fn lemma2_bound(n: usize, k: usize, theta: f64, c: f64) -> Result<f64> {
    if k < 1 || !(theta >= 0.0) || !(c >= 1.0) || !theta.is_finite() || !c.is_finite() {
        return Err(Error::param(format!(
            "lemma2_bound needs k >= 1, theta >= 0, C >= 1 (got k={k}, theta={theta}, C={c})"
        )));
    }
    if n == 0 {
        return finite((k as f64) * c.ln(), "lemma2_bound");
    }
    if theta == 0.0 {
        return Ok(0.0);
    }
    let ln_binom: f64 = (1..k).map(|i| ((n + i) as f64 / i as f64).ln()).sum();
    finite(ln_binom + n as f64 * theta.ln() + k as f64 * c.ln(), "lemma2_bound")
}

fn finite(ln_value: f64, what: &'static str) -> Result<f64> {
    let v = ln_value.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_factor_domain(c: f64, eta: f64, eps: f64, q_value: f64) -> Result<()> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::param(format!("C must be >= 1, got {c}")));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::param(format!("eta must lie in [0, 1), got {eta}")));
    }
    if !(eps > 0.0 && eps < 1.0 - eta) {
        return Err(Error::param(format!("eps must lie in (0, 1 - eta) = (0, {}), got {eps}", 1.0 - eta)));
    }
    if !(q_value >= 0.0 && q_value.is_finite()) {
        return Err(Error::param(format!("Q(s,t) must be finite and >= 0, got {q_value}")));
    }
    Ok(())
}

/// `ln (C/(1−η−ε))^{1+Q/ε}`.
pub fn theorem1_ln_factor(c: f64, eta: f64, eps: f64, q_value: f64) -> Result<f64> {
    check_factor_domain(c, eta, eps, q_value)?;
    Ok((1.0 + q_value / eps) * (c.ln() - (-(eta + eps)).ln_1p()))
}

/// `(C/(1−η−ε))^{1+Q/ε}`.
pub fn theorem1_factor(c: f64, eta: f64, eps: f64, q_value: f64) -> Result<f64> {
    finite(theorem1_ln_factor(c, eta, eps, q_value)?, "theorem1_factor")
}

/// Factor for `C = 1` and `p* = p`: `(1/(1−η))^{1+Q/η}`, or `e^Q` when `η = 0`.
pub fn sharp_factor(eta: f64, q_value: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) || !(q_value >= 0.0) {
        return Err(Error::param("sharp factor needs 0 <= eta < 1 and Q >= 0"));
    }
    if eta == 0.0 {
        return finite(q_value, "sharp_factor");
    }
    finite(-(1.0 + q_value / eta) * (-eta).ln_1p(), "sharp_factor")
}

/// The `ε` minimising the perturbation-series factor, and that factor. The result
/// is never worse than `ε = η` (for `0 < η < 1/2`) or `ε = (1−η)/2`.
pub fn optimize_eps(c: f64, eta: f64, q_value: f64) -> Result<(f64, f64)> {
    let span = 1.0 - eta;
    check_factor_domain(c, eta, 0.5 * span, q_value)?;
    let ln_f = |eps: f64| theorem1_ln_factor(c, eta, eps, q_value).unwrap_or(f64::INFINITY);
    let lo = span * 1e-9;
    let mut best = if q_value == 0.0 {
        (lo, ln_f(lo))
    } else {
        let hi = span * (1.0 - 1e-9);
        let r = minimize_scalar(|l| ln_f(l.exp()), lo.ln(), hi.ln(), 96, 1e-12)?;
        (r.argmax.exp(), r.value)
    };
    let mut candidates = vec![0.5 * span];
    if eta > 0.0 && eta < 0.5 {
        candidates.push(eta);
    }
    for eps in candidates {
        let v = ln_f(eps);
        if v < best.1 {
            best = (eps, v);
        }
    }
    Ok((best.0, finite(best.1, "optimize_eps")?))
}

/// `η` and the slope of `Q(s,t) = slope·(t−s)` for a time-independent `q`
/// with `I_{√h}(q) = i_sqrt_h`: `η = b c₀(d) M I` and
/// `slope = 2 M I/(h |B(0,1/2)|)`.
pub fn explkato_split(b: f64, a: f64, d: usize, i_sqrt_h: f64, h: f64) -> Result<(f64, f64)> {
    if d < 3 {
        return Err(Error::param("the Kato-class bound needs d >= 3"));
    }
    if !(h > 0.0) || !(i_sqrt_h >= 0.0) {
        return Err(Error::param("need h > 0 and I >= 0"));
    }
    let m = compute_m(a, b, d)?.m;
    let eta = b * c0(d)? * m * i_sqrt_h;
    let slope = 2.0 * m * i_sqrt_h / (h * half_ball_volume(d));
    Ok((eta, slope))
}

/// `I_{√h}(q) M [b c₀(d) + 2(t−s)/(h |B(0,1/2)|)]`.
pub fn explkato_bound(b: f64, a: f64, d: usize, i_sqrt_h: f64, h: f64, t_minus_s: f64) -> Result<f64> {
    if !(t_minus_s > 0.0) {
        return Err(Error::param("t - s must be positive"));
    }
    let (eta, slope) = explkato_split(b, a, d, i_sqrt_h, h)?;
    Ok(eta + slope * t_minus_s)
}

/// `M′ N` with `M′ = ((b−a)/a ∨ a/(b−a))^{d/2} M`.
pub fn step1_parabolic_bound(b: f64, a: f64, d: usize, n_value: f64) -> Result<f64> {
    if !(n_value >= 0.0) {
        return Err(Error::param("N must be >= 0"));
    }
    let m = compute_m(a, b, d)?.m;
    let ratio = ((b - a) / a).max(a / (b - a));
    Ok(ratio.powf(0.5 * d as f64) * m * n_value)
}

/// `(η, β)` with `q ∈ N(g_b, g_a, (b/a)^{d/2}, η, β(t−s))` from the parabolic
/// Kato value `N_h^c(q)`, `c = (b−a) ∧ a`: `η = M′ N_h` and `β = η/h`.
pub fn parabolic_membership(b: f64, a: f64, d: usize, n_h: f64, h: f64) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::param("h must be positive"));
    }
    let eta = step1_parabolic_bound(b, a, d, n_h)?;
    Ok((eta, eta / h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    #[serde(rename = "C")]
    pub c: f64,
    pub eta: f64,
    pub eps: f64,
    /// `Q(s,t) = q_slope·(t−s)`.
    pub q_slope: f64,
    /// Largest `t − s` the certificate was optimised for.
    pub horizon: f64,
    #[serde(rename = "Q_value")]
    pub q_value: f64,
    pub bound_factor: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub lambda_cap: f64,
    pub a: f64,
    pub b: f64,
    pub d: usize,
}

impl BoundCertificate {
    /// `(C/(1−η−ε))^{1+Q(s,t)/ε}` for `t − s = dt`.
    pub fn factor(&self, dt: f64) -> Result<f64> {
        theorem1_factor(self.c, self.eta, self.eps, self.q_slope * dt.max(0.0))
    }

    /// `p*(s,x,t,y) = e^{λ(t−s)} g_a(s,x,t,y)`.
    pub fn pstar(&self, s: f64, x: &[f64], t: f64, y: &[f64]) -> Result<f64> {
        let g = GaussianKernel::new(self.a, self.d)?;
        Ok((self.lambda * (t - s)).exp() * g.eval(s, x, t, y))
    }

    /// Upper bound for `p̃(s,x,t,y)`.
    pub fn bound(&self, s: f64, x: &[f64], t: f64, y: &[f64]) -> Result<f64> {
        Ok(self.factor(t - s)? * self.pstar(s, x, t, y)?)
    }

    /// Term bounds for the series at `(s,x,t,y)` with the fewest pieces
    /// `k` that make `θ = η + Q(s,t)/k < 1`.
    pub fn tail_certificate(&self, s: f64, x: &[f64], t: f64, y: &[f64]) -> Result<TailCertificate> {
        let q = self.q_slope * (t - s);
        let k = pieces_for(self.eta, q);
        Ok(TailCertificate {
            c: self.c,
            eta: self.eta,
            theta: self.eta + q / k as f64,
            k,
            pstar: self.pstar(s, x, t, y)?,
        })
    }
}

/// Smallest `k` with `η + Q/k < 1`, aiming for `θ ≤ (1+η)/2`.
fn pieces_for(eta: f64, q: f64) -> usize {
    let room = 0.5 * (1.0 - eta);
    ((q / room).ceil() as usize).max(1)
}

/// Explicit Gaussian bound for a time-independent `q` in `d ≥ 3` with
/// `p ≤ Λ e^{λ(t−s)} g_b`: `C = Λ(b/a)^{d/2}`, `η = Λ b c₀ M I` and
/// `Q(s,t) = Λ·2MI(t−s)/(h|B(0,1/2)|)`, with `ε` optimised at `t − s = horizon`.
#[allow(clippy::too_many_arguments)]
pub fn thm_new_pipeline(
    lambda_cap: f64,
    lambda: f64,
    b: f64,
    a: f64,
    h: f64,
    d: usize,
    i_sqrt_h: f64,
    horizon: f64,
) -> Result<BoundCertificate> {
    if !(lambda_cap >= 1.0) || !lambda.is_finite() {
        return Err(Error::param("need Lambda >= 1 and finite lambda"));
    }
    if !(horizon > 0.0) {
        return Err(Error::param("horizon must be positive"));
    }
    let (eta0, slope0) = explkato_split(b, a, d, i_sqrt_h, h)?;
    let eta = lambda_cap * eta0;
    if eta >= 1.0 {
        let per_i = eta / i_sqrt_h;
        return Err(Error::param(format!(
            "eta = {eta:.6} >= 1, the bound does not apply; it needs I_sqrt_h(q) < {:.6e} at b = {b} (decrease b or h)",
            1.0 / per_i
        )));
    }
    let c = lambda_cap * (b / a).powf(0.5 * d as f64);
    let q_slope = lambda_cap * slope0;
    let q_value = q_slope * horizon;
    let (eps, bound_factor) = optimize_eps(c, eta, q_value)?;
    Ok(BoundCertificate { c, eta, eps, q_slope, horizon, q_value, bound_factor, lambda, lambda_cap, a, b, d })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub s: f64,
    pub x: Vec<f64>,
    pub t: f64,
    pub y: Vec<f64>,
}

/// Sample design for membership checks: `t − s` log-uniform in `[1e-3, 10]`,
/// `x, y` Gaussian on the `√(t−s)` scale around a common centre, and every
/// fifth point a far probe with `|y − x| ∈ {5, 10}·√(t−s)`.
pub fn sample_design(d: usize, n: usize, rng: &mut RngStream) -> Vec<SamplePoint> {
    (0..n)
        .map(|i| {
            let dt = rng.log_uniform(1e-3, 10.0);
            let s = rng.uniform(-1.0, 1.0);
            let scale = dt.sqrt();
            let centre: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let x: Vec<f64> = centre.iter().map(|c| c + scale * rng.normal()).collect();
            let y = if i % 5 == 4 {
                let far = if (i / 5) % 2 == 0 { 5.0 } else { 10.0 };
                let mut y = x.clone();
                y[0] += far * scale;
                y
            } else {
                centre.iter().map(|c| c + scale * rng.normal()).collect()
            };
            SamplePoint { s, x, t: s + dt, y }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LhsMethod {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipSample {
    #[serde(flatten)]
    pub point: SamplePoint,
    pub lhs: f64,
    /// Quadrature error estimate, or the Monte Carlo standard error.
    pub lhs_err: f64,
    /// `[η + Q(s,t)] p*(s,x,t,y)`.
    pub rhs: f64,
    /// `p(s,x,t,y)/(C p*(s,x,t,y))`.
    pub kernel_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NMembership {
    pub p_params: GaussianKernel,
    pub pstar_params: GaussianKernel,
    #[serde(rename = "C")]
    pub c: f64,
    pub eta: f64,
    #[serde(rename = "Q")]
    pub q: SuperadditiveQ,
    pub method: LhsMethod,
    pub verified_at: Vec<MembershipSample>,
}

impl NMembership {
    /// Term bounds at `(s,x,t,y)`: `Q` is split into pieces of size at most
    /// `(1−η)/2`, so `θ = η + max piece < 1`.
    pub fn tail_certificate(&self, s: f64, x: &[f64], t: f64, y: &[f64]) -> Result<TailCertificate> {
        let q = self.q.regularize();
        let sp = split(&q, s, t, 0.5 * (1.0 - self.eta))?;
        let max_piece = sp.piece_values.iter().copied().fold(0.0, f64::max);
        Ok(TailCertificate {
            c: self.c,
            eta: self.eta,
            theta: self.eta + max_piece,
            k: sp.k(),
            pstar: self.pstar_params.eval(s, x, t, y),
        })
    }

    /// Largest `lhs / (C[η + Q⁻(s,t)] p*)` over the recorded samples; at most
    /// one when the regularised form of the membership bound holds.
    pub fn regularized_ratio(&self) -> Result<f64> {
        let q_reg = self.q.regularize();
        let mut worst: f64 = 0.0;
        for smp in &self.verified_at {
            let p = &smp.point;
            let pstar = self.pstar_params.eval(p.s, &p.x, p.t, &p.y);
            let rhs = self.c * (self.eta + q_reg.eval(p.s, p.t)) * pstar;
            let lhs = (smp.lhs - smp.lhs_err).max(0.0);
            if lhs > 0.0 {
                worst = worst.max(lhs / rhs);
            }
        }
        Ok(worst)
    }
}

/// `∫_s^t ∫ g_b(s,x,u,z) q(u,z) g_a(u,z,t,y) dz du` and its error estimate.
///
/// The product of the two kernels in `z` is `N(x−y; 0, V(u))` times a
/// Gaussian density in `z`, so the space integral is an expectation. It is
/// taken by Gauss–Hermite for `d ≤ 2` and by Monte Carlo otherwise.
#[allow(clippy::too_many_arguments)]
pub fn membership_lhs(
    pk: &GaussianKernel,
    sk: &GaussianKernel,
    q: &Potential,
    p: &SamplePoint,
    method: LhsMethod,
    cfg: &QuadConfig,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let (s, t, d) = (p.s, p.t, pk.d);
    let (b, a) = (pk.a, sk.a);
    let r2: f64 = p.x.iter().zip(&p.y).map(|(u, v)| (u - v).powi(2)).sum();
    let moments = |u: f64| {
        let v1 = 2.0 * (u - s) / b;
        let v2 = 2.0 * (t - u) / a;
        let v = v1 + v2;
        let weight = (-0.5 * d as f64 * (2.0 * PI * v).ln() - r2 / (2.0 * v)).exp();
        (weight, v1 / v, (v1 * v2 / v).sqrt())
    };
    let mean = |frac: f64| -> Vec<f64> { p.x.iter().zip(&p.y).map(|(x, y)| x + frac * (y - x)).collect() };
    if q.is_spatially_constant() {
        let mut edges = vec![s, t];
        edges.extend(q.time_breakpoints().into_iter().filter(|&e| e > s && e < t));
        edges.sort_by(f64::total_cmp);
        let (mut total, mut err) = (0.0, 0.0);
        for w in edges.windows(2) {
            let r = integrate_1d(
                |u| {
                    let (weight, _, _) = moments(u);
                    weight * q.eval(u, &p.x)
                },
                w[0],
                w[1],
                cfg,
            )?;
            total += r.value;
            err += r.err_est;
        }
        return Ok((total, err));
    }
    match method {
        LhsMethod::Quadrature => {
            if d > 2 {
                return Err(Error::param("deterministic membership quadrature needs d <= 2"));
            }
            let order = if d == 1 { cfg.hermite_order } else { cfg.hermite_order.min(32) };
            let gh = gauss_hermite(order)?;
            let norm = PI.powf(0.5 * d as f64);
            let expect = |u: f64| -> f64 {
                let (weight, frac, sd) = moments(u);
                if weight == 0.0 {
                    return 0.0;
                }
                let mu = mean(frac);
                let mut acc = 0.0;
                let mut z = vec![0.0; d];
                let n = gh.len();
                for idx in 0..n.pow(d as u32) {
                    let mut w = 1.0;
                    let mut rest = idx;
                    for (i, zi) in z.iter_mut().enumerate() {
                        let j = rest % n;
                        rest /= n;
                        *zi = mu[i] + SQRT_2 * sd * gh.nodes[j];
                        w *= gh.weights[j];
                    }
                    acc += w * q.eval(u, &z);
                }
                weight * acc / norm
            };
            let mut edges = vec![s, t];
            edges.extend(q.time_breakpoints().into_iter().filter(|&e| e > s && e < t));
            edges.sort_by(f64::total_cmp);
            let (mut total, mut err) = (0.0, 0.0);
            for w in edges.windows(2) {
                let r = integrate_1d(expect, w[0], w[1], cfg)?;
                total += r.value;
                err += r.err_est;
            }
            Ok((total, err))
        }
        LhsMethod::MonteCarlo => {
            let gl = gauss_legendre(MC_TIME_NODES)?;
            let (mut total, mut var) = (0.0, 0.0);
            let mut z = vec![0.0; d];
            for (xi, wi) in gl.iter() {
                let u = s + 0.5 * (t - s) * (1.0 + xi);
                let (weight, frac, sd) = moments(u);
                let mu = mean(frac);
                let (mut m1, mut m2) = (0.0, 0.0);
                for _ in 0..MC_SPACE_SAMPLES {
                    for (zi, mi) in z.iter_mut().zip(&mu) {
                        *zi = mi + sd * rng.normal();
                    }
                    let v = q.eval(u, &z);
                    m1 += v;
                    m2 += v * v;
                }
                let n = MC_SPACE_SAMPLES as f64;
                let avg = m1 / n;
                let sv = ((m2 / n - avg * avg).max(0.0) / (n - 1.0)).max(0.0);
                let c = 0.5 * (t - s) * wi * weight;
                total += c * avg;
                var += c * c * sv;
            }
            Ok((total, var.sqrt()))
        }
    }
}

/// Checks `q ∈ N(g_b, g_a, (b/a)^{d/2}, η, Q)` at the given points. Uses
/// Gauss–Hermite in space for `d ≤ 2` and Monte Carlo otherwise; a Monte
/// Carlo sample fails only when it exceeds the bound by three standard errors.
#[allow(clippy::too_many_arguments)]
pub fn verify_membership(
    b_kernel: &GaussianKernel,
    a_kernel: &GaussianKernel,
    q: &Potential,
    eta: f64,
    big_q: &SuperadditiveQ,
    samples: &[SamplePoint],
    cfg: &QuadConfig,
    rng: &RngStream,
) -> Result<NMembership> {
    let d = b_kernel.d;
    if a_kernel.d != d || q.d != d {
        return Err(Error::param("dimension mismatch between kernels and potential"));
    }
    if !(a_kernel.a > 0.0 && a_kernel.a <= b_kernel.a) {
        return Err(Error::param("membership needs 0 < a <= b"));
    }
    if !(eta >= 0.0) {
        return Err(Error::param("eta must be >= 0"));
    }
    big_q.validate()?;
    q.validate()?;
    let c = (b_kernel.a / a_kernel.a).powf(0.5 * d as f64);
    let method = if d <= 2 { LhsMethod::Quadrature } else { LhsMethod::MonteCarlo };
    let checked: Vec<Result<MembershipSample>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, pt)| {
            if pt.x.len() != d || pt.y.len() != d || !(pt.s < pt.t) {
                return Err(Error::param(format!("sample {i} is malformed")));
            }
            let mut r = rng.substream(i as u64);
            let (lhs, lhs_err) = membership_lhs(b_kernel, a_kernel, q, pt, method, cfg, &mut r)?;
            let pstar = a_kernel.eval(pt.s, &pt.x, pt.t, &pt.y);
            let rhs = (eta + big_q.eval(pt.s, pt.t)) * pstar;
            let kernel_ratio = b_kernel.eval(pt.s, &pt.x, pt.t, &pt.y) / (c * pstar);
            let slack = match method {
                LhsMethod::Quadrature => lhs_err,
                LhsMethod::MonteCarlo => 3.0 * lhs_err,
            };
            if lhs - slack > rhs * (1.0 + SAMPLE_TOL) || kernel_ratio > 1.0 + SAMPLE_TOL {
                return Err(Error::Violation(format!(
                    "membership fails at s={}, x={:?}, t={}, y={:?}: lhs={lhs:e} (±{lhs_err:e}), rhs={rhs:e}, p/(C p*)={kernel_ratio}",
                    pt.s, pt.x, pt.t, pt.y
                )));
            }
            Ok(MembershipSample { point: pt.clone(), lhs, lhs_err, rhs, kernel_ratio })
        })
        .collect();
    let verified_at = checked.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(NMembership { p_params: *b_kernel, pstar_params: *a_kernel, c, eta, q: big_q.clone(), method, verified_at })
}

/// Transition density of the one-dimensional Brownian motion with unit
/// drift, `g₁(s, x−s, t, y−t)`.
pub fn drift_density(s: f64, x: f64, t: f64, y: f64) -> f64 {
    if s >= t {
        return 0.0;
    }
    let dt = t - s;
    (4.0 * PI * dt).powf(-0.5) * (-(y - x - dt).powi(2) / (4.0 * dt)).exp()
}

/// Largest sampled `ln p − ln(b^{−1/2} e^{b(t−s)/(4(1−b))} g_b)` for the drift
/// density; nonpositive when the Gaussian bound with growth holds.
pub fn drift_bound_margin(b: f64, samples: usize, rng: &mut RngStream) -> Result<f64> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::param("drift bound needs 0 < b < 1"));
    }
    let g = GaussianKernel::new(b, 1)?;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..samples {
        let dt = rng.log_uniform(1e-3, 1e2);
        let x = rng.uniform(-2.0, 2.0);
        // Every fourth point sits on the ridge y − x = (t−s)/(1−b) where equality holds.
        let y = if i % 4 == 3 { x + dt / (1.0 - b) } else { x + dt + 3.0 * dt.sqrt() * rng.normal() };
        let lp = -0.5 * (4.0 * PI * dt).ln() - (y - x - dt).powi(2) / (4.0 * dt);
        let lb = -0.5 * b.ln() + b * dt / (4.0 * (1.0 - b)) + g.ln_eval(0.0, &[x], dt, &[y]);
        worst = worst.max(lp - lb);
    }
    Ok(worst)
}

/// For each `(c₁, c₂)` a point on the drift line `y − x = t − s` where
/// `p > c₁ g_{c₂}`, found by doubling `t − s`.
pub fn drift_no_gaussian_bound(c1: &[f64], c2: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    for &a1 in c1 {
        for &a2 in c2 {
            let g = GaussianKernel::new(a2, 1)?;
            let mut dt: f64 = 1.0;
            loop {
                let lp = -0.5 * (4.0 * PI * dt).ln();
                if lp > a1.ln() + g.ln_eval(0.0, &[0.0], dt, &[dt]) {
                    out.push((a1, a2, dt));
                    break;
                }
                dt *= 2.0;
                if dt > 1e12 {
                    return Err(Error::Violation(format!("no witness found for c1={a1}, c2={a2}")));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kato::{PotentialKind, Profile};
    use crate::series::{term_grid, tilde_p, SeriesRequest};
    use crate::superadd::IntervalConvention;

    #[test]
    fn lemma_bound_examples() {
        assert!((lemma2_bound(0, 3, 0.4, 2.0).unwrap() - 8.0).abs() < 1e-13);
        assert!((lemma2_bound(5, 1, 0.5, 3.0).unwrap() - 3.0 / 32.0).abs() < 1e-15);
        assert!((lemma2_bound(3, 2, 0.5, 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(lemma2_bound(10, 1, 1e300, 1.0).is_err());
        assert!(lemma2_bound(1, 0, 0.5, 1.0).is_err());
    }

    #[test]
    fn theorem1_examples() {
        assert!((theorem1_factor(1.0, 0.0, 0.5, 0.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((theorem1_factor(1.0, 0.0, 0.5, 1.0).unwrap() - 8.0).abs() < 1e-13);
        let f = theorem1_factor(1.5, 0.3, 0.3, 2.0).unwrap();
        assert!((f / (1.5f64 / 0.4).powf(1.0 + 2.0 / 0.3) - 1.0).abs() < 1e-13);
        assert!(theorem1_factor(1.0, 0.5, 0.5, 1.0).is_err());
        assert!(theorem1_factor(0.5, 0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn optimized_eps_examples() {
        let (eps, f) = optimize_eps(1.0, 0.0, 1.0).unwrap();
        assert!(f <= 8.0 && f >= 1f64.exp() * (1.0 - 1e-12), "{eps} {f}");
        let (_, f0) = optimize_eps(2.0, 0.25, 0.0).unwrap();
        assert!((f0 - 2.0 / 0.75).abs() < 1e-6);
        let (_, f2) = optimize_eps(2.0, 0.25, 3.0).unwrap();
        let a = theorem1_factor(2.0, 0.25, 0.25, 3.0).unwrap();
        let b = theorem1_factor(2.0, 0.25, 0.375, 3.0).unwrap();
        assert!(f2 <= a.min(b));
    }

    #[test]
    fn explicit_kato_coefficients() {
        let i = 1e-4;
        let (eta, slope) = explkato_split(1.0, 0.9, 3, i, 1.0).unwrap();
        assert!((eta / (1000.0 * i / (4.0 * PI)) - 1.0).abs() < 1e-9);
        assert!((slope / (12000.0 * i / PI) - 1.0).abs() < 1e-9);
        assert_eq!(explkato_bound(1.0, 0.9, 3, 0.0, 1.0, 2.0).unwrap(), 0.0);
        assert!((explkato_bound(1.0, 0.9, 3, i, 1.0, 2.0).unwrap() - (eta + 2.0 * slope)).abs() < 1e-15);
    }

    #[test]
    fn step1_examples() {
        let m = compute_m(1.0, 2.0, 2).unwrap().m;
        assert!((step1_parabolic_bound(2.0, 1.0, 2, 1.0).unwrap() - m).abs() < 1e-12 * m);
        assert!((step1_parabolic_bound(1.0, 0.9, 1, 1.0).unwrap() - 30.0).abs() < 1e-9);
        assert_eq!(step1_parabolic_bound(1.0, 0.9, 1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn pipeline_examples() {
        let per_i = 1.0 * c0(3).unwrap() * 1000.0;
        let i = 0.5 / per_i;
        let cert = thm_new_pipeline(1.0, 0.0, 1.0, 0.9, 1.0, 3, i, 1.0).unwrap();
        assert!((cert.eta - 0.5).abs() < 1e-9);
        let direct = theorem1_factor(cert.c, cert.eta, cert.eps, cert.q_value).unwrap();
        assert!((cert.bound_factor / direct - 1.0).abs() < 1e-12);
        let zero = thm_new_pipeline(1.0, 0.0, 1.0, 0.9, 1.0, 3, 0.0, 1.0).unwrap();
        assert!((zero.bound_factor / zero.c - 1.0).abs() < 1e-6);
        let err = thm_new_pipeline(1.0, 0.0, 1.0, 0.9, 1.0, 3, 2.0 / per_i, 1.0).unwrap_err();
        assert!(err.to_string().contains("I_sqrt_h(q) <"));
    }

    #[test]
    fn zero_potential_membership() {
        let b = GaussianKernel::new(1.0, 1).unwrap();
        let a = GaussianKernel::new(0.9, 1).unwrap();
        let mut rng = RngStream::new(5, 0);
        let pts = sample_design(1, 20, &mut rng);
        let m = verify_membership(
            &b,
            &a,
            &Potential::zero(1),
            0.0,
            &SuperadditiveQ::linear(0.0),
            &pts,
            &QuadConfig::default(),
            &rng,
        )
        .unwrap();
        assert!(m.verified_at.iter().all(|s| s.lhs == 0.0));
    }

    fn constant_membership(q0: f64, eta: f64, n: usize) -> (NMembership, Potential) {
        let b = GaussianKernel::new(1.0, 1).unwrap();
        let a = GaussianKernel::new(0.9, 1).unwrap();
        let q = Potential::constant(1, q0).unwrap();
        let slope = q0 * (1.0f64 / 0.9).sqrt();
        let mut rng = RngStream::new(9, 0);
        let pts = sample_design(1, n, &mut rng);
        let m = verify_membership(&b, &a, &q, eta, &SuperadditiveQ::linear(slope), &pts, &QuadConfig::default(), &rng)
            .unwrap();
        (m, q)
    }

    #[test]
    fn constant_potential_membership_and_domination() {
        let (m, q) = constant_membership(0.3, 0.25, 30);
        for smp in m.verified_at.iter().take(10) {
            let p = &smp.point;
            let mut req = SeriesRequest::new(m.p_params, q.clone(), p.s, p.x.clone(), p.t, p.y.clone());
            let cert = m.tail_certificate(p.s, &p.x, p.t, &p.y).unwrap();
            let tp = tilde_p(&req, Some(&cert)).unwrap();
            let qst = m.q.eval(p.s, p.t);
            let pstar = m.pstar_params.eval(p.s, &p.x, p.t, &p.y);
            let (_, best) = optimize_eps(m.c, m.eta, qst).unwrap();
            assert!(tp.value <= best * pstar * (1.0 + 1e-6));
            req.n_terms = 6;
            let terms = term_grid(&req).unwrap();
            for (n, v) in terms.terms.iter().enumerate() {
                assert!(*v <= cert.term_bound(n).unwrap() * (1.0 + 1e-8));
            }
        }
    }

    #[test]
    fn violation_is_reported() {
        let b = GaussianKernel::new(1.0, 1).unwrap();
        let q = Potential::constant(1, 1.0).unwrap();
        let pts = vec![SamplePoint { s: 0.0, x: vec![0.0], t: 1.0, y: vec![0.0] }];
        let err = verify_membership(
            &b,
            &b,
            &q,
            0.0,
            &SuperadditiveQ::linear(0.5),
            &pts,
            &QuadConfig::default(),
            &RngStream::new(0, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Violation(_)));
    }

    #[test]
    fn regularized_membership_bound() {
        let b = GaussianKernel::new(1.0, 1).unwrap();
        let a = GaussianKernel::new(0.8, 1).unwrap();
        let q = Potential::new(
            1,
            PotentialKind::TimeOnly { f: Profile::Constant { value: 1.0 }, window: Some([0.0, 0.5]) },
        )
        .unwrap();
        // Atoms on top of a dominating density: plain superadditive, not regular.
        let big_q = SuperadditiveQ::Composite {
            parts: vec![
                SuperadditiveQ::linear((1.0f64 / 0.8).sqrt()),
                SuperadditiveQ::atoms(&[(0.25, 0.3), (0.5, 0.2)], IntervalConvention::HalfOpenLeftClosed),
            ],
        };
        let mut rng = RngStream::new(3, 0);
        let pts = sample_design(1, 30, &mut rng);
        let m = verify_membership(&b, &a, &q, 0.0, &big_q, &pts, &QuadConfig::default(), &rng).unwrap();
        assert!(m.regularized_ratio().unwrap() <= 1.0 + 1e-8);
    }

    #[test]
    fn drift_example() {
        let mut rng = RngStream::new(1, 0);
        for b in [0.5, 0.9] {
            assert!(drift_bound_margin(b, 2000, &mut rng).unwrap() <= 1e-10);
        }
        let w = drift_no_gaussian_bound(&[1.0, 10.0, 1e3], &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(w.len(), 9);
    }
}
