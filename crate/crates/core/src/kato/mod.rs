//! Kato-class functionals of potentials with explicit constants.
//!
//! `I_δ(U) = sup_x ∫_{|z−x|<δ} |U(z)| |z−x|^{2−d} dz` and the space-time
//! integral `sup_{s,x} ∫_s^{s+h} ∫ g_c(s,x,u,z)|U(z)| dz du` are evaluated by
//! reducing every ball integral to a radial integral around the centre of
//! the potential's support and an angular integral over spheres. The sup over
//! `x` is taken over a finite candidate set, which is exact for radially
//! non-increasing potentials (the sup sits at the origin) and a lower bound
//! otherwise.

mod potential;

pub use potential::{Potential, PotentialKind, Profile};

use std::cell::Cell;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    ball_volume, integrate_1d, integrate_half_line, integrate_sqrt_endpoint, ln_gamma, maximize_scalar, sphere_area,
    upper_gamma_half_integer, QuadConfig, QuadResult, RngStream, SqrtEnd,
};

/// Random candidate centres added to the analytic ones.
pub const RANDOM_CENTERS: usize = 64;

/// Substream used for the candidate centres, so that they do not depend on
/// `δ`, `h` or `c`.
const CENTER_STREAM: u64 = 0x6b61_746f;

/// Cut-off `c r²/(4h)` beyond which the truncated heat potential is dropped.
const HEAT_TAIL: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KatoMethod {
    ClosedForm,
    RadialQuadrature,
    GridSupMonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoEstimate {
    pub delta: f64,
    pub value: f64,
    pub err_est: f64,
    pub method: KatoMethod,
    /// Candidate centre attaining the value.
    pub center: Vec<f64>,
}

fn need_kato_dim(d: usize) -> Result<()> {
    if d < 3 {
        Err(Error::param(format!("Kato constants need d >= 3, got {d}")))
    } else {
        Ok(())
    }
}

/// `c₀(d) = Γ(d/2−1) π^{−d/2} / 4`, so that `∫₀^∞ g_c(0,0,u,x) du = c c₀ |x|^{2−d}`.
pub fn c0(d: usize) -> Result<f64> {
    need_kato_dim(d)?;
    let h = 0.5 * d as f64;
    Ok((ln_gamma(h - 1.0)? - h * PI.ln()).exp() / 4.0)
}

/// `C₁(d,c) = Γ(d/2−1) π^{−d/2} [c + 2^d d(d−2)] / 4`.
pub fn c1(d: usize, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::param(format!("c must be positive, got {c}")));
    }
    let df = d as f64;
    Ok(c0(d)? * (c + 2f64.powi(d as i32) * df * (df - 2.0)))
}

/// `|B(0, 1/2)|`.
pub fn half_ball_volume(d: usize) -> f64 {
    ball_volume(d, 0.5)
}

/// `(c c₀ + τ/(r²|B(0,1/2)|)) I_r`.
pub fn prop_nice_bound(c: f64, tau: f64, r: f64, i_r: f64, d: usize) -> Result<f64> {
    if !(c > 0.0 && tau > 0.0 && r > 0.0 && i_r >= 0.0) {
        return Err(Error::param("prop_nice_bound needs c, tau, r > 0 and I_r >= 0"));
    }
    Ok((c * c0(d)? + tau / (r * r * half_ball_volume(d))) * i_r)
}

/// `c c₀(d) |x|^{2−d}`.
pub fn heat_potential_closed(c: f64, d: usize, r: f64) -> Result<f64> {
    Ok(c * c0(d)? * r.powi(2 - d as i32))
}

fn heat_density(c: f64, d: usize, u: f64, r: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    (-0.5 * d as f64 * (4.0 * PI * u / c).ln() - c * r * r / (4.0 * u)).exp()
}

/// `K(x) = ∫₀^∞ g_c(0,0,u,x) du` by quadrature over the half line.
pub fn heat_potential(c: f64, d: usize, x: &[f64], cfg: &QuadConfig) -> Result<f64> {
    need_kato_dim(d)?;
    if !(c > 0.0) || x.len() != d {
        return Err(Error::param("heat_potential needs c > 0 and x in R^d"));
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::param("heat_potential is infinite at x = 0"));
    }
    // Time scale r², so the integrand has its bulk near the origin of the map.
    let scale = c * r * r / (2.0 * d as f64);
    let res = integrate_half_line(|v| heat_density(c, d, scale * v, r) * scale, 0.0, cfg)?;
    Ok(res.value)
}

/// `k_h(r) = ∫₀^h g_c(0,0,u,x) du` at `|x| = r`.
///
/// For `d ≥ 3` this equals `(c/4) π^{−d/2} r^{2−d} Γ(d/2−1, c r²/(4h))`.
pub fn truncated_heat_potential(c: f64, d: usize, h: f64, r: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(c > 0.0 && h > 0.0 && r >= 0.0) {
        return Err(Error::param("truncated heat potential needs c, h > 0 and r >= 0"));
    }
    if d >= 3 {
        if r == 0.0 {
            return Ok(f64::INFINITY);
        }
        return Ok(heat_kappa(c, d, h, r)? * r.powi(2 - d as i32));
    }
    if r == 0.0 {
        return if d == 1 { Ok((c / (4.0 * PI)).sqrt() * 2.0 * h.sqrt()) } else { Ok(f64::INFINITY) };
    }
    Ok(integrate_1d(|u| heat_density(c, d, u, r), 0.0, h, cfg)?.value)
}

/// `r^{d−2} k_h(r)`, bounded at the origin.
fn heat_kappa(c: f64, d: usize, h: f64, r: f64) -> Result<f64> {
    let gam = upper_gamma_half_integer(d as u32 - 2, c * r * r / (4.0 * h))?;
    Ok(0.25 * c * PI.powf(-0.5 * d as f64) * gam)
}

/// Radial weights integrated over spheres: `φ(r) = r^{2−d} κ(r)` for `r < r_max`.
#[derive(Debug, Clone, Copy)]
enum Weight {
    /// `φ(r) = r^{2−d}`
    Newton,
    /// `φ = k_h` for `g_c`
    Heat { c: f64, h: f64 },
    /// `φ ≡ 1`
    Ball,
}

impl Weight {
    fn kappa(&self, d: usize, r: f64) -> f64 {
        match *self {
            Weight::Newton => 1.0,
            Weight::Ball => r.powi(d as i32 - 2),
            Weight::Heat { c, h } => heat_kappa(c, d, h, r).unwrap_or(f64::NAN),
        }
    }

    fn phi(&self, d: usize, r: f64) -> f64 {
        match *self {
            Weight::Newton => r.powi(2 - d as i32),
            Weight::Ball => 1.0,
            Weight::Heat { c, h } => heat_kappa(c, d, h, r).unwrap_or(f64::NAN) * r.powi(2 - d as i32),
        }
    }

    /// `∫_a^b κ(r) dr` in `d = 3`.
    fn kappa_integral_3d(&self, a: f64, b: f64) -> f64 {
        match *self {
            Weight::Newton => b - a,
            Weight::Ball => 0.5 * (b * b - a * a),
            Weight::Heat { c, h } => {
                let al = (c / (4.0 * h)).sqrt();
                let prim = |r: f64| r * libm::erfc(al * r) - (-(al * r).powi(2)).exp() / (al * PI.sqrt());
                c / (4.0 * PI) * (prim(b) - prim(a))
            }
        }
    }
}

/// Runs a fallible integrand through the adaptive rule, keeping the first error.
fn try_integrate<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    lo: f64,
    hi: f64,
    sqrt_left: bool,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    let failure: Cell<Option<Error>> = Cell::new(None);
    let g = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            let prev = failure.take();
            failure.set(Some(prev.unwrap_or(e)));
            0.0
        }
    };
    let res =
        if sqrt_left { integrate_sqrt_endpoint(g, lo, hi, SqrtEnd::Left, cfg) } else { integrate_1d(g, lo, hi, cfg) };
    if let Some(e) = failure.take() {
        return Err(e);
    }
    res
}

/// `∫_{S^{d−1}} φ(|y + ρω|) dω` for `|y| = dist`, with `φ` cut at `r_max`.
fn shell(d: usize, dist: f64, rho: f64, w: Weight, r_max: f64, cfg: &QuadConfig) -> Result<f64> {
    if d == 1 {
        let f = |r: f64| if r < r_max { w.phi(1, r) } else { 0.0 };
        return Ok(f((dist + rho).abs()) + f((dist - rho).abs()));
    }
    if dist == 0.0 || rho == 0.0 {
        let r = dist.max(rho);
        return Ok(if r < r_max { sphere_area(d) * w.phi(d, r) } else { 0.0 });
    }
    let lo = (dist - rho).abs();
    if lo >= r_max {
        return Ok(0.0);
    }
    if d == 3 {
        let hi = (dist + rho).min(r_max);
        return Ok(2.0 * PI / (dist * rho) * w.kappa_integral_3d(lo, hi));
    }
    let arg = (r_max * r_max - lo * lo) / (4.0 * dist * rho);
    let theta_max = if arg >= 1.0 { PI } else { 2.0 * arg.sqrt().asin() };
    let k = d as i32 - 2;
    let res = integrate_1d(
        |theta| {
            let s = (0.5 * theta).sin();
            let r = (lo * lo + 4.0 * dist * rho * s * s).sqrt();
            (theta.sin() / r).powi(k) * w.kappa(d, r)
        },
        0.0,
        theta_max,
        cfg,
    )?;
    Ok(sphere_area(d - 1) * res.value)
}

/// `∫_{|z−c|<R} m(|z−c|) φ(|z−x|) dz` with `|x − c| = dist`, where `mass(ρ)`
/// is `m(ρ) ρ^{d−1}`.
fn ball_term<M: Fn(f64) -> f64>(
    d: usize,
    dist: f64,
    radius: f64,
    mass: &M,
    w: Weight,
    r_max: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    let lo = (dist - r_max).max(0.0);
    let hi = radius.min(dist + r_max);
    if !(hi > lo) {
        return Ok(QuadResult { value: 0.0, err_est: 0.0, intervals: 0 });
    }
    let inner = cfg.with_tolerances(cfg.abs_tol * 1e-2, (cfg.rel_tol * 0.1).max(1e-14));
    let mut pts = vec![lo, hi];
    for p in [dist, r_max - dist] {
        if p > lo && p < hi {
            pts.push(p);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = QuadResult { value: 0.0, err_est: 0.0, intervals: 0 };
    for seg in pts.windows(2) {
        let r = try_integrate(
            |rho| {
                let m = mass(rho);
                if m == 0.0 {
                    return Ok(0.0);
                }
                Ok(m * shell(d, dist, rho, w, r_max, &inner)?)
            },
            seg[0],
            seg[1],
            seg[0] == 0.0,
            cfg,
        )?;
        total.value += r.value;
        total.err_est += r.err_est;
        total.intervals += r.intervals;
    }
    Ok(total)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Candidate centres for the sup over `x`; depend only on the potential and
/// on the seed and stream id of `rng`.
fn candidate_centers(pot: &Potential, rng: &RngStream) -> Vec<Vec<f64>> {
    let d = pot.d;
    let mut r = rng.substream(CENTER_STREAM);
    let random_in_ball = |r: &mut RngStream, radius: f64| -> Vec<f64> {
        let mut g: Vec<f64> = (0..d).map(|_| r.normal()).collect();
        let n = norm(&g).max(1e-300);
        let rad = radius * r.uniform(0.0, 1.0).powf(1.0 / d as f64);
        g.iter_mut().for_each(|v| *v *= rad / n);
        g
    };
    match &pot.kind {
        PotentialKind::IndicatorSum { direction, n_max } => {
            let mut out: Vec<Vec<f64>> =
                (2..=*n_max).map(|n| direction.iter().map(|v| v * n as f64).collect()).collect();
            for _ in 0..RANDOM_CENTERS {
                let t = r.uniform(1.5, *n_max as f64 + 0.5);
                let off = random_in_ball(&mut r, 0.5);
                out.push(direction.iter().zip(&off).map(|(u, o)| t * u + o).collect());
            }
            out
        }
        PotentialKind::Radial { cutoff, .. } => {
            let radius = cutoff.unwrap_or(1.0);
            let mut out = vec![vec![0.0; d]];
            for _ in 0..RANDOM_CENTERS {
                out.push(random_in_ball(&mut r, radius));
            }
            out
        }
        _ => vec![vec![0.0; d]],
    }
}

/// Value of the ball functional with weight `w` at a single centre `x`.
fn functional_at(pot: &Potential, x: &[f64], w: Weight, r_max: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    let d = pot.d;
    match &pot.kind {
        PotentialKind::IndicatorSum { direction, n_max } => {
            let mut total = QuadResult { value: 0.0, err_est: 0.0, intervals: 0 };
            for n in 2..=*n_max {
                let nf = n as f64;
                let dist = x.iter().zip(direction).map(|(a, u)| (a - nf * u).powi(2)).sum::<f64>().sqrt();
                if dist >= r_max + 1.0 / nf {
                    continue;
                }
                let mass = |rho: f64| nf * rho.powi(d as i32 - 2);
                let r = ball_term(d, dist, 1.0 / nf, &mass, w, r_max, cfg)?;
                total.value += r.value;
                total.err_est += r.err_est;
                total.intervals += r.intervals;
            }
            Ok(total)
        }
        PotentialKind::Radial { u, cutoff } => {
            let cut = cutoff.unwrap_or(f64::INFINITY);
            let mass = |rho: f64| if rho < cut { u.eval(rho) * rho.powi(d as i32 - 1) } else { 0.0 };
            ball_term(d, norm(x), cut, &mass, w, r_max, cfg)
        }
        _ => Err(Error::param("centre-grid functional needs a radial or indicator_sum potential")),
    }
}

/// Sup of the ball functional over the candidate centres.
fn grid_sup(pot: &Potential, w: Weight, r_max: f64, cfg: &QuadConfig, rng: &RngStream) -> Result<(f64, f64, Vec<f64>)> {
    let centers = candidate_centers(pot, rng);
    let values: Vec<QuadResult> =
        centers.par_iter().map(|x| functional_at(pot, x, w, r_max, cfg)).collect::<Result<_>>()?;
    let (i, best) =
        values.iter().enumerate().max_by(|a, b| a.1.value.total_cmp(&b.1.value)).expect("candidate set is never empty");
    Ok((best.value, best.err_est, centers[i].clone()))
}

fn require_static(pot: &Potential) -> Result<()> {
    pot.validate()?;
    if !pot.is_time_independent() {
        return Err(Error::param("this functional needs a time-independent potential"));
    }
    Ok(())
}

fn radial_at_origin(pot: &Potential) -> Option<(&Profile, f64)> {
    match &pot.kind {
        PotentialKind::Radial { u, cutoff } if u.is_radially_nonincreasing() => {
            Some((u, cutoff.unwrap_or(f64::INFINITY)))
        }
        _ => None,
    }
}

/// `I_δ(U) = sup_x ∫_{|z−x|<δ} |U(z)| |z−x|^{2−d} dz`.
pub fn kato_i(pot: &Potential, delta: f64, cfg: &QuadConfig, rng: &RngStream) -> Result<KatoEstimate> {
    require_static(pot)?;
    need_kato_dim(pot.d)?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::param(format!("delta must be positive, got {delta}")));
    }
    let d = pot.d;
    let origin = vec![0.0; d];
    let closed =
        |value: f64| KatoEstimate { delta, value, err_est: 0.0, method: KatoMethod::ClosedForm, center: vec![0.0; d] };
    match &pot.kind {
        PotentialKind::Zero => return Ok(closed(0.0)),
        PotentialKind::Constant { q0 } => return Ok(closed(q0 * sphere_area(d) * delta * delta / 2.0)),
        _ => {}
    }
    if let Some((u, cut)) = radial_at_origin(pot) {
        let res = integrate_sqrt_endpoint(|r| u.eval(r) * r, 0.0, delta.min(cut), SqrtEnd::Left, cfg)?;
        let sigma = sphere_area(d);
        return Ok(KatoEstimate {
            delta,
            value: sigma * res.value,
            err_est: sigma * res.err_est,
            method: KatoMethod::RadialQuadrature,
            center: origin,
        });
    }
    if let PotentialKind::Radial { cutoff: None, .. } = pot.kind {
        return Err(Error::param("a radial profile that is not non-increasing needs a cutoff"));
    }
    let (value, err_est, center) = grid_sup(pot, Weight::Newton, delta, cfg, rng)?;
    Ok(KatoEstimate { delta, value, err_est, method: KatoMethod::GridSupMonteCarlo, center })
}

fn heat_tail_radius(c: f64, h: f64) -> f64 {
    (4.0 * h * HEAT_TAIL / c).sqrt()
}

/// `sup_x ∫₀^h ∫ g_c(0,x,u,z) |U(z)| dz du` for time-independent `U`.
pub fn lhs_psup(pot: &Potential, c: f64, h: f64, cfg: &QuadConfig, rng: &RngStream) -> Result<f64> {
    require_static(pot)?;
    if !(c > 0.0 && h > 0.0) {
        return Err(Error::param("lhs_psup needs c, h > 0"));
    }
    let d = pot.d;
    match &pot.kind {
        PotentialKind::Zero => return Ok(0.0),
        PotentialKind::Constant { q0 } => return Ok(q0 * h),
        _ => {}
    }
    if let Some((u, cut)) = radial_at_origin(pot) {
        let hi = cut.min(heat_tail_radius(c, h));
        let res = try_integrate(
            |r| {
                if r == 0.0 {
                    return Ok(0.0);
                }
                let uv = u.eval(r);
                if uv == 0.0 {
                    return Ok(0.0);
                }
                Ok(truncated_heat_potential(c, d, h, r, cfg)? * uv * r.powi(d as i32 - 1))
            },
            0.0,
            hi,
            true,
            cfg,
        )?;
        return Ok(sphere_area(d) * res.value);
    }
    need_kato_dim(d)?;
    if let PotentialKind::Radial { cutoff: None, .. } = pot.kind {
        return Err(Error::param("a radial profile that is not non-increasing needs a cutoff"));
    }
    let (value, _, _) = grid_sup(pot, Weight::Heat { c, h }, heat_tail_radius(c, h), cfg, rng)?;
    Ok(value)
}

/// `E[U(|Z|)]` for `Z` with density `g_c(0,0,v,·)`.
fn gaussian_radial_mean(d: usize, c: f64, v: f64, u: &Profile, cutoff: f64, cfg: &QuadConfig) -> Result<f64> {
    if v <= 0.0 {
        return Ok(u.eval(0.0));
    }
    let ell = (4.0 * v / c).sqrt();
    let hi = cutoff.min(8.0 * ell);
    let sigma = sphere_area(d);
    let res = integrate_sqrt_endpoint(
        |r| {
            if r == 0.0 {
                return 0.0;
            }
            heat_density(c, d, v, r) * u.eval(r) * r.powi(d as i32 - 1)
        },
        0.0,
        hi,
        SqrtEnd::Left,
        cfg,
    )?;
    Ok(sigma * res.value)
}

/// The two halves of `N_h^c(V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolicN {
    pub forward: f64,
    pub backward: f64,
}

impl ParabolicN {
    pub fn total(&self) -> f64 {
        self.forward + self.backward
    }
}

/// `N_h^c(V)`: forward plus backward space-time sups.
///
/// For time-dependent `V` the potential is restricted to `horizon` (or to its
/// own time window) and the sups run over all start times meeting it.
pub fn parabolic_n(
    pot: &Potential,
    c: f64,
    h: f64,
    horizon: Option<[f64; 2]>,
    cfg: &QuadConfig,
    rng: &RngStream,
) -> Result<ParabolicN> {
    pot.validate()?;
    if !(c > 0.0 && h > 0.0) {
        return Err(Error::param("parabolic_n needs c, h > 0"));
    }
    let d = pot.d;
    if pot.is_time_independent() {
        let forward = lhs_psup(pot, c, h, cfg, rng)?;
        let backward = match (&pot.kind, radial_at_origin(pot)) {
            (PotentialKind::Constant { q0 }, _) => q0 * h,
            // Space first, then time: an independent route to the same number.
            (_, Some((u, cut))) => {
                try_integrate(|v| gaussian_radial_mean(d, c, v, u, cut, cfg), 0.0, h, true, cfg)?.value
            }
            _ => forward,
        };
        return Ok(ParabolicN { forward, backward });
    }
    let (w0, w1) = match (pot.time_support(), horizon) {
        (Some((a, b)), Some([c0, c1])) => (a.max(c0), b.min(c1)),
        (Some(s), None) => s,
        (None, Some([a, b])) => (a, b),
        (None, None) => {
            return Err(Error::param("a time-dependent potential with unbounded time support needs a horizon"))
        }
    };
    if !(w1 > w0) {
        return Ok(ParabolicN { forward: 0.0, backward: 0.0 });
    }
    let window_f = |u: f64| if u < w0 || u >= w1 { 0.0 } else { pot.time_factor(u) };
    match &pot.kind {
        PotentialKind::TimeOnly { .. } => {
            let seg = |lo: f64, hi: f64| pot.time_integral(lo.max(w0), hi.min(w1)).unwrap_or(0.0);
            let fwd = maximize_scalar(|s| seg(s, s + h), w0 - h, w1, 512, 1e-12)?;
            let bwd = maximize_scalar(|t| seg(t - h, t), w0, w1 + h, 512, 1e-12)?;
            Ok(ParabolicN { forward: fwd.value, backward: bwd.value })
        }
        PotentialKind::Separable { u, cutoff, .. } => {
            if !u.is_radially_nonincreasing() {
                return Err(Error::param("separable potentials need a non-increasing radial part"));
            }
            let cut = cutoff.unwrap_or(f64::INFINITY);
            let loose = cfg.with_tolerances(cfg.abs_tol.max(1e-12), cfg.rel_tol.max(1e-9));
            let failure: Cell<Option<Error>> = Cell::new(None);
            let record = |e: Error| {
                let prev = failure.take();
                failure.set(Some(prev.unwrap_or(e)));
                0.0
            };
            let side = |start: f64, sign: f64| -> f64 {
                let mut pts = vec![0.0, h];
                if let PotentialKind::Separable { f: Profile::Step { breaks, .. }, .. } = &pot.kind {
                    pts.extend(breaks.iter().map(|b| sign * (b - start)));
                }
                pts.extend([sign * (w0 - start), sign * (w1 - start)]);
                pts.retain(|p| *p >= 0.0 && *p <= h);
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                let mut acc = 0.0;
                for s in pts.windows(2) {
                    match try_integrate(
                        |v| {
                            let f = window_f(start + sign * v);
                            if f == 0.0 {
                                return Ok(0.0);
                            }
                            Ok(f * gaussian_radial_mean(d, c, v, u, cut, &loose)?)
                        },
                        s[0],
                        s[1],
                        s[0] == 0.0,
                        &loose,
                    ) {
                        Ok(r) => acc += r.value,
                        Err(e) => return record(e),
                    }
                }
                acc
            };
            let fwd = maximize_scalar(|s| side(s, 1.0), w0 - h, w1, 64, 1e-9)?;
            let bwd = maximize_scalar(|t| side(t, -1.0), w0, w1 + h, 64, 1e-9)?;
            if let Some(e) = failure.take() {
                return Err(e);
            }
            Ok(ParabolicN { forward: fwd.value, backward: bwd.value })
        }
        _ => unreachable!("time-independent variants handled above"),
    }
}

/// Radially decreasing kernels used in the convolution lemmas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Zero,
    /// `∫₀^τ g_c(0,0,u,·) du`
    TruncatedHeat {
        c: f64,
        tau: f64,
    },
    /// `∫₀^∞ g_c(0,0,u,·) du = c c₀ |·|^{2−d}`
    FullHeat {
        c: f64,
    },
}

impl KernelSpec {
    pub fn value(&self, d: usize, r: f64, cfg: &QuadConfig) -> Result<f64> {
        match *self {
            KernelSpec::Zero => Ok(0.0),
            KernelSpec::TruncatedHeat { c, tau } => truncated_heat_potential(c, d, tau, r, cfg),
            KernelSpec::FullHeat { c } => {
                if r == 0.0 {
                    Ok(f64::INFINITY)
                } else {
                    heat_potential_closed(c, d, r)
                }
            }
        }
    }

    pub fn integral(&self) -> f64 {
        match *self {
            KernelSpec::Zero => 0.0,
            KernelSpec::TruncatedHeat { tau, .. } => tau,
            KernelSpec::FullHeat { .. } => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionBounds {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// `c₁ = ∫k`, `c₂ = K(r e₁)|B(0,r/2)|`, `c₃ = 1 + c₁/c₂` (or 1 when `c₂ ∈ {0, ∞}`).
pub fn lemma_convolution_bounds(
    r: f64,
    d: usize,
    k: KernelSpec,
    big_k: KernelSpec,
    cfg: &QuadConfig,
) -> Result<ConvolutionBounds> {
    if !(r > 0.0) {
        return Err(Error::param("radius must be positive"));
    }
    let c1 = k.integral();
    let c2 = big_k.value(d, r, cfg)? * ball_volume(d, 0.5 * r);
    let c3 = if c2 == 0.0 || c2.is_infinite() { 1.0 } else { 1.0 + c1 / c2 };
    Ok(ConvolutionBounds { c1, c2, c3 })
}

/// `min_x [f * 1_{B(0,r)}(x) − |B(0,r/2)| f(x)]` over `grid` radii, for
/// `f(x) = exp(−max(|x|, r)²/width²)`.
pub fn radial_convolution_margin(d: usize, r: f64, width: f64, grid: usize, cfg: &QuadConfig) -> Result<f64> {
    if d == 0 || !(r > 0.0 && width > 0.0) || grid < 2 {
        return Err(Error::param("radial_convolution_margin needs d >= 1, r, width > 0 and grid >= 2"));
    }
    let f = |rho: f64| (-(rho.max(r) / width).powi(2)).exp();
    let mass = |rho: f64| f(rho) * rho.powi(d as i32 - 1);
    let vol = ball_volume(d, 0.5 * r);
    let reach = r + 6.0 * width;
    let mut worst = f64::INFINITY;
    for i in 0..grid {
        let dist = reach * i as f64 / (grid - 1) as f64;
        let conv = ball_term(d, dist, f64::INFINITY, &mass, Weight::Ball, r, cfg)?.value;
        worst = worst.min(conv - vol * f(dist));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn radial(d: usize, u: Profile, cutoff: Option<f64>) -> Potential {
        Potential::new(d, PotentialKind::Radial { u, cutoff }).unwrap()
    }

    #[test]
    fn constants() {
        assert!(rel(c0(3).unwrap(), 1.0 / (4.0 * PI)) < 1e-14);
        assert!(rel(c0(4).unwrap(), 1.0 / (4.0 * PI * PI)) < 1e-14);
        assert!(rel(c0(6).unwrap(), 1.0 / (4.0 * PI.powi(3))) < 1e-14);
        assert!(rel(c1(3, 1.0).unwrap(), 25.0 / (4.0 * PI)) < 1e-14);
        assert!(rel(c1(3, 1e-300).unwrap(), 6.0 / PI) < 1e-14);
        assert!(rel(c1(4, 2.0).unwrap(), 130.0 / (4.0 * PI * PI)) < 1e-14);
        assert!(c0(2).is_err());
        assert!(rel(half_ball_volume(3), PI / 6.0) < 1e-14);
        // τ = h, r = √h reproduces C₁.
        for d in 3..8 {
            for c in [0.5, 1.0, 3.0] {
                let h: f64 = 2.5;
                let b = prop_nice_bound(c, h, h.sqrt(), 1.0, d).unwrap();
                assert!(rel(b, c1(d, c).unwrap()) < 1e-13, "d={d}");
            }
        }
        assert_eq!(prop_nice_bound(1.0, 1.0, 1.0, 0.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn heat_potential_closed_form() {
        for d in [3usize, 4, 5] {
            for r in [0.5, 1.0, 2.0] {
                let mut x = vec![0.0; d];
                x[d - 1] = r;
                for c in [1.0, 2.0] {
                    let num = heat_potential(c, d, &x, &cfg()).unwrap();
                    assert!(rel(num, heat_potential_closed(c, d, r).unwrap()) < 1e-9, "d={d} r={r}");
                }
            }
        }
        let v = heat_potential(1.0, 3, &[1.0, 0.0, 0.0], &cfg()).unwrap();
        assert!(rel(v, 1.0 / (4.0 * PI)) < 1e-10);
        let v = heat_potential(2.0, 3, &[0.0, 2.0, 0.0], &cfg()).unwrap();
        assert!(rel(v, 1.0 / (4.0 * PI)) < 1e-10);
    }

    #[test]
    fn truncated_heat_matches_time_integral() {
        for d in [1usize, 2, 3, 4, 5] {
            for (c, h, r) in [(1.0, 1.0, 0.7), (2.0, 0.3, 0.2), (0.5, 4.0, 3.0)] {
                let exact = integrate_1d(|u| heat_density(c, d, u, r), 0.0, h, &cfg()).unwrap().value;
                let v = truncated_heat_potential(c, d, h, r, &cfg()).unwrap();
                assert!(rel(v, exact) < 1e-10, "d={d}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn shell_matches_direct_average_in_3d() {
        // Newton weight in d = 3 against θ-quadrature of the general formula.
        let c = cfg();
        for (dist, rho, rmax) in [(1.0, 0.5, 0.8), (0.3, 0.9, 2.0), (1.0, 1.0, 0.5)] {
            let closed = shell(3, dist, rho, Weight::Newton, rmax, &c).unwrap();
            let lo: f64 = (dist - rho).abs();
            let arg = (rmax * rmax - lo * lo) / (4.0 * dist * rho);
            let tmax = if arg >= 1.0 {
                PI
            } else if arg <= 0.0 {
                0.0
            } else {
                2.0 * arg.sqrt().asin()
            };
            let num = integrate_1d(
                |t| {
                    let r = (dist * dist + rho * rho - 2.0 * dist * rho * t.cos()).sqrt();
                    2.0 * PI * t.sin() / r
                },
                0.0,
                tmax,
                &c,
            )
            .unwrap()
            .value;
            assert!((closed - num).abs() < 1e-9 * num.max(1.0), "{closed} {num}");
        }
    }

    #[test]
    fn kato_i_examples() {
        let rng = RngStream::new(1, 0);
        let one = Potential::constant(3, 1.0).unwrap();
        for delta in [0.1, 1.0, 2.0] {
            let e = kato_i(&one, delta, &cfg(), &rng).unwrap();
            assert!(rel(e.value, 2.0 * PI * delta * delta) < 1e-14);
        }
        let r1 = radial(3, Profile::Constant { value: 1.0 }, None);
        let e = kato_i(&r1, 0.7, &cfg(), &rng).unwrap();
        assert_eq!(e.method, KatoMethod::RadialQuadrature);
        assert!(rel(e.value, 2.0 * PI * 0.49) < 1e-12);
        assert_eq!(kato_i(&Potential::zero(3), 1.0, &cfg(), &rng).unwrap().value, 0.0);
        // U = |z|^{-3/2} in d = 3: σ∫₀^δ r^{-1/2} dr = 8π√δ.
        let sing = radial(3, Profile::Power { coef: 1.0, exponent: -1.5 }, None);
        let e = kato_i(&sing, 0.25, &cfg(), &rng).unwrap();
        assert!(rel(e.value, 8.0 * PI * 0.5) < 1e-9);
        assert!(kato_i(&Potential::constant(2, 1.0).unwrap(), 1.0, &cfg(), &rng).is_err());
    }

    #[test]
    fn grid_sup_agrees_with_origin_for_decreasing_profiles() {
        // Forcing the centre grid onto a radially decreasing profile must
        // not beat the value at the origin.
        let rng = RngStream::new(5, 0);
        for d in [3usize, 4] {
            let pot = radial(d, Profile::Gaussian { coef: 1.0, width: 0.8 }, Some(1.5));
            let direct = kato_i(&pot, 0.6, &cfg(), &rng).unwrap().value;
            let (grid, _, center) = grid_sup(&pot, Weight::Newton, 0.6, &cfg(), &rng).unwrap();
            assert!(rel(grid, direct) < 1e-8, "d={d}: {grid} vs {direct}");
            assert!(norm(&center) == 0.0);
        }
    }

    #[test]
    fn indicator_sum_is_not_kato_but_finite() {
        let rng = RngStream::new(7, 0);
        for d in [3usize, 4] {
            let pot = Potential::indicator_sum(d, 10).unwrap();
            let sigma = sphere_area(d);
            let mut prev = f64::INFINITY;
            for delta in [1.0, 0.5, 0.2] {
                let e = kato_i(&pot, delta, &cfg(), &rng).unwrap();
                assert_eq!(e.method, KatoMethod::GridSupMonteCarlo);
                assert!(e.value >= sigma * (1.0 - 1e-9), "d={d} δ={delta}: {}", e.value);
                assert!(e.value.is_finite());
                assert!(e.value <= prev);
                prev = e.value;
            }
        }
    }

    #[test]
    fn psup_upper_bound_on_catalog() {
        let rng = RngStream::new(11, 0);
        let catalog = vec![
            Potential::constant(3, 0.7).unwrap(),
            radial(3, Profile::Constant { value: 1.0 }, Some(1.0)),
            radial(3, Profile::Power { coef: 1.0, exponent: -1.0 }, Some(2.0)),
            radial(3, Profile::Gaussian { coef: 2.0, width: 0.5 }, None),
            Potential::indicator_sum(3, 6).unwrap(),
        ];
        for pot in &catalog {
            for h in [0.1, 1.0, 10.0] {
                for c in [1.0, 0.5] {
                    let lhs = lhs_psup(pot, c, h, &cfg(), &rng).unwrap();
                    let i = kato_i(pot, h.sqrt(), &cfg(), &rng).unwrap().value;
                    let rhs = c1(3, c).unwrap() * i;
                    assert!(lhs > 0.0 && lhs <= rhs, "{pot:?} h={h}: {lhs} > {rhs}");
                }
            }
        }
        assert!(rel(lhs_psup(&catalog[0], 1.0, 2.0, &cfg(), &rng).unwrap(), 1.4) < 1e-15);
    }

    #[test]
    fn psup_grid_route_matches_origin_route() {
        let rng = RngStream::new(3, 0);
        let pot = radial(3, Profile::Constant { value: 1.0 }, Some(1.0));
        let direct = lhs_psup(&pot, 1.0, 1.0, &cfg(), &rng).unwrap();
        let (grid, _, _) =
            grid_sup(&pot, Weight::Heat { c: 1.0, h: 1.0 }, heat_tail_radius(1.0, 1.0), &cfg(), &rng).unwrap();
        assert!(rel(grid, direct) < 1e-8, "{grid} vs {direct}");
    }

    #[test]
    fn parabolic_n_examples() {
        let rng = RngStream::new(2, 0);
        let q = Potential::constant(2, 1.5).unwrap();
        let n = parabolic_n(&q, 1.0, 0.4, None, &cfg(), &rng).unwrap();
        assert!(rel(n.total(), 2.0 * 1.5 * 0.4) < 1e-15);
        let pot = radial(3, Profile::Power { coef: 1.0, exponent: -1.0 }, Some(1.0));
        for h in [0.1, 1.0] {
            let n = parabolic_n(&pot, 1.0, h, None, &cfg(), &rng).unwrap();
            assert!(rel(n.forward, n.backward) < 1e-8, "{n:?}");
        }
        let t = Potential::new(
            1,
            PotentialKind::TimeOnly { f: Profile::Power { coef: 1.0, exponent: 1.0 }, window: Some([0.0, 1.0]) },
        )
        .unwrap();
        let n = parabolic_n(&t, 1.0, 0.5, None, &cfg(), &rng).unwrap();
        assert!((n.forward - 0.375).abs() < 1e-9 && (n.backward - 0.375).abs() < 1e-9);
        let unbounded =
            Potential::new(1, PotentialKind::TimeOnly { f: Profile::Constant { value: 1.0 }, window: None }).unwrap();
        assert!(parabolic_n(&unbounded, 1.0, 0.5, None, &cfg(), &rng).is_err());
    }

    #[test]
    fn parabolic_n_monotone_and_subadditive() {
        let rng = RngStream::new(4, 0);
        let sep = Potential::new(
            1,
            PotentialKind::Separable {
                f: Profile::Step { breaks: vec![0.0, 0.5, 1.0], values: vec![1.0, 2.0] },
                window: None,
                u: Profile::Gaussian { coef: 1.0, width: 1.0 },
                cutoff: None,
            },
        )
        .unwrap();
        let pots = [sep, radial(3, Profile::Constant { value: 1.0 }, Some(0.5))];
        for pot in &pots {
            let mut prev = 0.0;
            for h in [0.05, 0.1, 0.2, 0.4] {
                let n = parabolic_n(pot, 1.0, h, None, &cfg(), &rng).unwrap().total();
                let n2 = parabolic_n(pot, 1.0, 2.0 * h, None, &cfg(), &rng).unwrap().total();
                assert!(n >= prev - 1e-9);
                assert!(n2 <= 2.0 * n * (1.0 + 1e-8), "{n2} > 2·{n}");
                prev = n;
            }
        }
    }

    #[test]
    fn convolution_lemma_constants() {
        for d in [3usize, 4] {
            for (c, tau, r) in [(1.0, 0.5, 1.0), (2.0, 3.0, 0.4)] {
                let b = lemma_convolution_bounds(
                    r,
                    d,
                    KernelSpec::TruncatedHeat { c, tau },
                    KernelSpec::FullHeat { c },
                    &cfg(),
                )
                .unwrap();
                assert_eq!(b.c1, tau);
                assert!(rel(b.c2, half_ball_volume(d) * c * c0(d).unwrap() * r * r) < 1e-13);
                assert!(rel(b.c3, 1.0 + b.c1 / b.c2) < 1e-15);
            }
        }
        let b = lemma_convolution_bounds(1.0, 3, KernelSpec::Zero, KernelSpec::Zero, &cfg()).unwrap();
        assert_eq!(b.c3, 1.0);
    }

    #[test]
    fn radial_convolution_margin_for_gaussian_profiles() {
        for d in 1..=3 {
            for (r, w) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.7)] {
                let m = radial_convolution_margin(d, r, w, 40, &cfg()).unwrap();
                assert!(m >= -1e-10, "d={d} r={r} w={w}: {m}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn kato_i_nondecreasing_in_delta(coef in 0.1f64..3.0, width in 0.2f64..2.0, d1 in 0.05f64..2.0, d2 in 0.05f64..2.0) {
            let rng = RngStream::new(9, 0);
            let pot = radial(3, Profile::Gaussian { coef, width }, None);
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let a = kato_i(&pot, lo, &cfg(), &rng).unwrap().value;
            let b = kato_i(&pot, hi, &cfg(), &rng).unwrap().value;
            prop_assert!(a <= b * (1.0 + 1e-12));
        }

        #[test]
        fn heat_potential_scales_linearly_in_c(c in 0.1f64..5.0, r in 0.2f64..3.0) {
            let a = heat_potential(c, 3, &[r, 0.0, 0.0], &cfg()).unwrap();
            let b = heat_potential(1.0, 3, &[r, 0.0, 0.0], &cfg()).unwrap();
            prop_assert!(rel(a, c * b) < 1e-9);
        }
    }
}
