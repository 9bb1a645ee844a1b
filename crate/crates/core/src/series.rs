//! Perturbation series `p̃ = Σₙ pₙ` of the Gaussian kernel `p = g_b` by a
//! nonnegative potential `q`, where `p₀ = p` and
//! `pₙ(s,x,t,y) = ∫_s^t ∫ p(s,x,u,z) q(u,z) pₙ₋₁(u,z,t,y) dz du`.
//!
//! The grid engine iterates on the ratios `rₙ(u,z) = pₙ(u,z,t,y)/p(u,z,t,y)`.
//! They satisfy `rₙ(u,z) = ∫_u^t E[q(v,Z_v) rₙ₋₁(v,Z_v)] dv`, with `Z` the
//! bridge of `g_b` from `(u,z)` to `(t,y)`, so every step is an expectation
//! of a smooth function against a Gaussian.
//!
//! For spatially constant `q` the ratios depend on time only and live on
//! Chebyshev panels. For `d = 1` and spatially varying `q` they live on a
//! grid in `(θ, w)`, where `u = s + (t−s)(1 − cos θ)/2` and
//! `z = m(u) + c·sin θ·W·w` follows the bridge from `(s,x)` to `(t,y)`. The
//! map is `2π`-periodic in `θ` with `G(2π−θ, w) = G(θ, −w)`, which gives
//! spectral accuracy in time without special treatment of the endpoints.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::lemma2_bound;
use crate::error::{Error, Result};
use crate::kato::Potential;
use crate::kernels::GaussianKernel;
use crate::numerics::{
    gauss_hermite, gauss_legendre, integrate_1d, ChebyshevLobatto, GaussRule, PeriodicGrid, QuadConfig, RngStream,
};

/// Values of `q` above this are clipped along Monte Carlo paths.
pub const Q_CLIP: f64 = 1e6;
const MC_BLOCK_PAIRS: usize = 256;
const DECAY_TOL: f64 = 1e-12;
const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    GridRecursion,
    MonteCarlo,
}

/// Discretisation of the grid engine. The Richardson check doubles
/// `slices` (spatially varying `q`) or `panel_nodes` (spatially constant `q`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridParams {
    /// Points of the periodic grid in `θ` (even).
    pub slices: usize,
    /// Chebyshev nodes across the bridge.
    pub space_nodes: usize,
    /// Chebyshev nodes per time panel.
    pub panel_nodes: usize,
    /// Half-width of the spatial window in bridge standard deviations.
    pub width: f64,
    /// Gauss–Legendre order of each time integral.
    pub time_order: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { slices: 32, space_nodes: 48, panel_nodes: 24, width: 8.0, time_order: 40 }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        if self.slices < 4 || !self.slices.is_multiple_of(2) {
            return Err(Error::param("grid slices must be even and at least 4"));
        }
        if self.space_nodes < 3 || self.panel_nodes < 3 || self.time_order < 2 {
            return Err(Error::param("grid node counts too small"));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::param("grid width must be positive"));
        }
        Ok(())
    }

    fn refined(&self) -> Self {
        Self { slices: 2 * self.slices, panel_nodes: 2 * self.panel_nodes, ..*self }
    }
}

#[derive(Debug, Clone)]
pub struct SeriesRequest {
    pub kernel: GaussianKernel,
    pub q: Potential,
    pub s: f64,
    pub x: Vec<f64>,
    pub t: f64,
    pub y: Vec<f64>,
    /// Terms computed by `term_grid`; the term cap for `tilde_p`.
    pub n_terms: usize,
    pub engine: Engine,
    pub cfg: QuadConfig,
    pub grid: GridParams,
    pub mc_paths: usize,
    pub mc_steps: usize,
    pub rng: RngStream,
}

impl SeriesRequest {
    pub fn new(kernel: GaussianKernel, q: Potential, s: f64, x: Vec<f64>, t: f64, y: Vec<f64>) -> Self {
        Self {
            kernel,
            q,
            s,
            x,
            t,
            y,
            n_terms: 200,
            engine: Engine::GridRecursion,
            cfg: QuadConfig::default(),
            grid: GridParams::default(),
            mc_paths: 100_000,
            mc_steps: 128,
            rng: RngStream::new(0, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.kernel.d;
        if self.x.len() != d || self.y.len() != d || self.q.d != d {
            return Err(Error::param("dimension mismatch between kernel, potential and points"));
        }
        if !(self.s < self.t) || !self.s.is_finite() || !self.t.is_finite() {
            return Err(Error::param(format!("need s < t, got s={}, t={}", self.s, self.t)));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::param("points must be finite"));
        }
        self.q.validate()?;
        self.cfg.validate()?;
        self.grid.validate()?;
        if self.engine == Engine::MonteCarlo && (self.mc_paths < 4 || self.mc_steps < 2) {
            return Err(Error::param("monte_carlo needs at least 4 paths and 2 steps"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub engine: Engine,
    /// `p(s,x,t,y)`.
    pub p: f64,
    /// `p₀, p₁, …`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub partial_sum: f64,
    /// Best estimate of `p̃`: the partial sum, or the Feynman–Kac mean.
    pub value: f64,
    /// Bound on the omitted terms, present with a tail certificate.
    pub tail_bound: Option<f64>,
    /// Whether the stop rule is backed by a certificate.
    pub rigorous: bool,
    pub err_est: f64,
    pub mc_std_error: Option<f64>,
    pub clip_fraction: Option<f64>,
}

impl SeriesResult {
    fn from_terms(engine: Engine, p: f64, terms: Vec<f64>, err_est: f64) -> Self {
        let partial_sums: Vec<f64> = terms
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let partial_sum = partial_sums.last().copied().unwrap_or(0.0);
        Self {
            engine,
            p,
            terms,
            partial_sums,
            partial_sum,
            value: partial_sum,
            tail_bound: None,
            rigorous: false,
            err_est,
            mc_std_error: None,
            clip_fraction: None,
        }
    }
}

/// Data for the term bound `pₙ ≤ binom(n+k−1,k−1) θⁿ Cᵏ p*(s,x,t,y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailCertificate {
    pub c: f64,
    pub eta: f64,
    pub theta: f64,
    pub k: usize,
    /// `p*(s,x,t,y)`.
    pub pstar: f64,
}

impl TailCertificate {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta < 1.0) {
            return Err(Error::param(format!("theta = {} >= 1, the tail bound is unusable", self.theta)));
        }
        if !(self.theta >= 0.0 && self.eta >= 0.0 && self.c >= 1.0 && self.k >= 1 && self.pstar >= 0.0) {
            return Err(Error::param("certificate needs theta, eta >= 0, C >= 1, k >= 1, p* >= 0"));
        }
        Ok(())
    }

    /// Bound for `pₙ`.
    pub fn term_bound(&self, n: usize) -> Result<f64> {
        Ok(lemma2_bound(n, self.k, self.theta, self.c)? * self.pstar)
    }

    /// Bound for `Σ_{n>big_n} pₙ`, infinite when the geometric majorant
    /// does not yet contract.
    pub fn tail_after(&self, big_n: usize) -> Result<f64> {
        let r = self.theta * (big_n + 1 + self.k) as f64 / (big_n + 2) as f64;
        if r >= 1.0 {
            return Ok(f64::INFINITY);
        }
        Ok(self.term_bound(big_n + 1)? / (1.0 - r))
    }
}

#[derive(Debug, Clone)]
struct TimeLayout {
    edges: Vec<f64>,
    cheb: ChebyshevLobatto,
}

impl TimeLayout {
    fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    fn node(&self, p: usize, j: usize) -> f64 {
        let (a, e) = (self.edges[p], self.edges[p + 1]);
        a + 0.5 * (e - a) * (1.0 + self.cheb.nodes[j])
    }

    fn local(&self, p: usize, u: f64) -> f64 {
        let (a, e) = (self.edges[p], self.edges[p + 1]);
        (2.0 * (u - a) / (e - a) - 1.0).clamp(-1.0, 1.0)
    }

    fn locate(&self, u: f64) -> usize {
        let n = self.panels();
        (0..n).find(|&p| u <= self.edges[p + 1]).unwrap_or(n - 1)
    }
}

#[derive(Debug, Clone)]
struct SpaceLayout {
    periodic: PeriodicGrid,
    cheb: ChebyshevLobatto,
    s: f64,
    t: f64,
    x: f64,
    y: f64,
    /// Bridge standard deviation per unit `sin θ`.
    c: f64,
    width: f64,
}

impl SpaceLayout {
    fn half(&self) -> usize {
        self.periodic.len() / 2
    }

    fn index(&self, k: usize, j: usize) -> usize {
        let nw = self.cheb.len();
        let half = self.half();
        if k <= half {
            k * nw + j
        } else {
            (self.periodic.len() - k) * nw + (nw - 1 - j)
        }
    }

    fn time(&self, theta: f64) -> f64 {
        self.s + 0.5 * (self.t - self.s) * (1.0 - theta.cos())
    }

    fn theta(&self, u: f64) -> f64 {
        (1.0 - 2.0 * (u - self.s) / (self.t - self.s)).clamp(-1.0, 1.0).acos()
    }

    fn line(&self, u: f64) -> f64 {
        self.x + (u - self.s) / (self.t - self.s) * (self.y - self.x)
    }

    fn w(&self, u: f64, theta: f64, z: f64) -> f64 {
        let scale = self.c * theta.sin() * self.width;
        if scale > 0.0 {
            ((z - self.line(u)) / scale).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }

    fn point(&self, k: usize, j: usize) -> (f64, f64) {
        let theta = self.periodic.node(k);
        let u = self.time(theta);
        (u, self.line(u) + self.c * theta.sin() * self.width * self.cheb.nodes[j])
    }
}

#[derive(Debug, Clone)]
enum Layout {
    Time(TimeLayout),
    Space(SpaceLayout),
}

/// Ratios `rₙ = pₙ/p` on a grid, with the one-step operator assembled once.
#[derive(Debug, Clone)]
pub struct GridEngine {
    kernel: GaussianKernel,
    s: f64,
    t: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    layout: Layout,
    dim: usize,
    op: Vec<f64>,
    ratios: Vec<Vec<f64>>,
}

impl GridEngine {
    /// Builds the engine for paths from `(s,x)` to `(t,y)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kernel: &GaussianKernel,
        q: &Potential,
        s: f64,
        x: &[f64],
        t: f64,
        y: &[f64],
        params: &GridParams,
        hermite_order: usize,
    ) -> Result<Self> {
        params.validate()?;
        if !(s < t) {
            return Err(Error::param("grid engine needs s < t"));
        }
        if q.d != kernel.d || x.len() != kernel.d || y.len() != kernel.d {
            return Err(Error::param("dimension mismatch between kernel, potential and points"));
        }
        if !q.sup_bound(s, t).is_finite() {
            return Err(Error::param(
                "q is unbounded on the time window; the grid engine needs bounded q, use the monte_carlo engine",
            ));
        }
        let gl = gauss_legendre(params.time_order)?;
        let (layout, op, dim) = if q.is_spatially_constant() {
            let layout = time_layout(q, s, t, params.panel_nodes);
            let (op, dim) = time_operator(q, &layout, &gl);
            (Layout::Time(layout), op, dim)
        } else {
            if kernel.d != 1 {
                return Err(Error::param(format!(
                    "grid engine handles spatially varying q only in d = 1 (got d = {}); use the monte_carlo engine",
                    kernel.d
                )));
            }
            let interior = q.time_breakpoints().into_iter().any(|b| b > s && b < t);
            if interior {
                return Err(Error::param(
                    "grid engine needs a time factor that is smooth on (s, t); use the monte_carlo engine",
                ));
            }
            let layout = SpaceLayout {
                periodic: PeriodicGrid::new(params.slices),
                cheb: ChebyshevLobatto::new(params.space_nodes),
                s,
                t,
                x: x[0],
                y: y[0],
                c: ((t - s) / (2.0 * kernel.a)).sqrt(),
                width: params.width,
            };
            let gh = gauss_hermite(hermite_order)?;
            let (op, dim) = space_operator(q, kernel.a, &layout, &gl, &gh);
            (Layout::Space(layout), op, dim)
        };
        Ok(Self { kernel: *kernel, s, t, x: x.to_vec(), y: y.to_vec(), layout, dim, op, ratios: vec![vec![1.0; dim]] })
    }

    fn ensure(&mut self, n: usize) {
        while self.ratios.len() <= n {
            let prev = self.ratios.last().expect("r₀ is always present");
            let dim = self.dim;
            let next: Vec<f64> =
                self.op.par_chunks(dim).map(|row| row.iter().zip(prev).map(|(a, b)| a * b).sum()).collect();
            self.ratios.push(next);
        }
    }

    /// `rₙ(u,z) = pₙ(u,z,t,y)/p(u,z,t,y)` for `s ≤ u ≤ t`.
    pub fn ratio(&mut self, n: usize, u: f64, z: &[f64]) -> f64 {
        self.ensure(n);
        self.ratio_cached(n, u, z)
    }

    fn ratio_cached(&self, n: usize, u: f64, z: &[f64]) -> f64 {
        let values = &self.ratios[n];
        let u = u.clamp(self.s, self.t);
        match &self.layout {
            Layout::Time(l) => {
                let p = l.locate(u);
                let nt = l.cheb.len();
                l.cheb.eval(&values[p * nt..(p + 1) * nt], l.local(p, u))
            }
            Layout::Space(l) => {
                let theta = l.theta(u);
                let w = l.w(u, theta, z[0]);
                let mut tb = vec![0.0; l.periodic.len()];
                let mut bw = vec![0.0; l.cheb.len()];
                l.periodic.basis_into(theta, &mut tb);
                l.cheb.basis_into(w, &mut bw);
                let mut acc = 0.0;
                for (k, &tk) in tb.iter().enumerate() {
                    if tk == 0.0 {
                        continue;
                    }
                    let inner: f64 = bw.iter().enumerate().map(|(j, &bj)| bj * values[l.index(k, j)]).sum();
                    acc += tk * inner;
                }
                acc
            }
        }
    }

    /// `pₙ(s,x,t,y)`.
    pub fn term(&mut self, n: usize) -> f64 {
        let p = self.kernel.eval(self.s, &self.x, self.t, &self.y);
        let x = self.x.clone();
        p * self.ratio(n, self.s, &x)
    }

    /// Time points where the stored ratios may fail to be smooth.
    pub fn time_edges(&self) -> Vec<f64> {
        match &self.layout {
            Layout::Time(l) => l.edges.clone(),
            Layout::Space(_) => vec![self.s, self.t],
        }
    }
}

fn time_layout(q: &Potential, s: f64, t: f64, nodes: usize) -> TimeLayout {
    let tol = 1e-12 * (t - s);
    let mut edges = vec![s, t];
    edges.extend(q.time_breakpoints().into_iter().filter(|&b| b > s + tol && b < t - tol));
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= tol);
    TimeLayout { edges, cheb: ChebyshevLobatto::new(nodes) }
}

fn time_operator(q: &Potential, l: &TimeLayout, gl: &GaussRule) -> (Vec<f64>, usize) {
    let nt = l.cheb.len();
    let panels = l.panels();
    let dim = panels * nt;
    let origin = vec![0.0; q.d];
    let rate = |v: f64| q.eval(v, &origin);
    // Integral of f·(basis) over each whole panel, shared by all earlier rows.
    let full: Vec<Vec<f64>> = (0..panels)
        .map(|p| {
            let mut acc = vec![0.0; nt];
            let mut basis = vec![0.0; nt];
            let (a, e) = (l.edges[p], l.edges[p + 1]);
            for (xi, wi) in gl.iter() {
                let v = a + 0.5 * (e - a) * (1.0 + xi);
                let f = 0.5 * (e - a) * wi * rate(v);
                l.cheb.basis_into(xi, &mut basis);
                acc.iter_mut().zip(&basis).for_each(|(o, b)| *o += f * b);
            }
            acc
        })
        .collect();
    let mut op = vec![0.0; dim * dim];
    let mut basis = vec![0.0; nt];
    for p in 0..panels {
        let e = l.edges[p + 1];
        for j in 0..nt {
            let row = &mut op[(p * nt + j) * dim..(p * nt + j + 1) * dim];
            let u = l.node(p, j);
            if e > u {
                for (xi, wi) in gl.iter() {
                    let v = u + 0.5 * (e - u) * (1.0 + xi);
                    let f = 0.5 * (e - u) * wi * rate(v);
                    l.cheb.basis_into(l.local(p, v), &mut basis);
                    for (jj, b) in basis.iter().enumerate() {
                        row[p * nt + jj] += f * b;
                    }
                }
            }
            for (pp, acc) in full.iter().enumerate().skip(p + 1) {
                row[pp * nt..(pp + 1) * nt].iter_mut().zip(acc).for_each(|(o, a)| *o += a);
            }
        }
    }
    (op, dim)
}

fn space_operator(q: &Potential, b: f64, l: &SpaceLayout, gl: &GaussRule, gh: &GaussRule) -> (Vec<f64>, usize) {
    let nw = l.cheb.len();
    let m = l.periodic.len();
    let half = l.half();
    let dim = (half + 1) * nw;
    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|row_idx| {
            let (k, j) = (row_idx / nw, row_idx % nw);
            let mut row = vec![0.0; dim];
            if k == half {
                return row;
            }
            let theta0 = l.periodic.node(k);
            let (u, z) = l.point(k, j);
            let mut bw = vec![0.0; nw];
            let mut tb = vec![0.0; m];
            let mut acc = vec![0.0; nw];
            for (xi, wl) in gl.iter() {
                let phi = theta0 + 0.5 * (PI - theta0) * (1.0 + xi);
                let v = l.time(phi);
                let dv = wl * 0.5 * (PI - theta0) * 0.5 * (l.t - l.s) * phi.sin();
                if !(v > u && v < l.t) || dv == 0.0 {
                    continue;
                }
                let mean = z + (v - u) / (l.t - u) * (l.y - z);
                let sd = (2.0 * (v - u) * (l.t - v) / (b * (l.t - u))).max(0.0).sqrt();
                acc.iter_mut().for_each(|a| *a = 0.0);
                let mut hit = false;
                for (g, wg) in gh.iter() {
                    let zz = mean + SQRT_2 * sd * g;
                    let qv = q.eval(v, &[zz]);
                    if qv == 0.0 {
                        continue;
                    }
                    hit = true;
                    l.cheb.basis_into(l.w(v, phi, zz), &mut bw);
                    let f = dv * wg / SQRT_PI * qv;
                    acc.iter_mut().zip(&bw).for_each(|(a, bb)| *a += f * bb);
                }
                if !hit {
                    continue;
                }
                l.periodic.basis_into(phi, &mut tb);
                for (kk, &tk) in tb.iter().enumerate() {
                    if tk == 0.0 {
                        continue;
                    }
                    for (jj, &a) in acc.iter().enumerate() {
                        row[l.index(kk, jj)] += tk * a;
                    }
                }
            }
            row
        })
        .collect();
    (rows.concat(), dim)
}

fn engines(req: &SeriesRequest) -> Result<(GridEngine, GridEngine)> {
    let build = |params: &GridParams| {
        GridEngine::new(&req.kernel, &req.q, req.s, &req.x, req.t, &req.y, params, req.cfg.hermite_order)
    };
    Ok((build(&req.grid)?, build(&req.grid.refined())?))
}

/// Clamps round-off negatives to zero, returning the amount removed.
fn nonnegative(v: f64) -> (f64, f64) {
    if v < 0.0 {
        (0.0, -v)
    } else {
        (v, 0.0)
    }
}

/// Terms `p₀ … p_{n_terms}` by the grid recursion. The error estimate is the
/// summed difference against the grid with doubled resolution.
pub fn term_grid(req: &SeriesRequest) -> Result<SeriesResult> {
    req.validate()?;
    if req.engine != Engine::GridRecursion {
        return Err(Error::param("term_grid needs engine = grid_recursion"));
    }
    let (mut coarse, mut fine) = engines(req)?;
    let p = req.kernel.eval(req.s, &req.x, req.t, &req.y);
    let mut terms = Vec::with_capacity(req.n_terms + 1);
    let mut err = 0.0;
    for n in 0..=req.n_terms {
        let f = fine.term(n);
        let (v, clipped) = nonnegative(f);
        err += (f - coarse.term(n)).abs() + clipped;
        terms.push(v);
    }
    let out = SeriesResult::from_terms(Engine::GridRecursion, p, terms, err);
    check_finite(&out)?;
    Ok(out)
}

fn check_finite(r: &SeriesResult) -> Result<()> {
    if r.terms.iter().all(|v| v.is_finite()) && r.value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("series terms"))
    }
}

/// `p̃(s,x,t,y)`. With a certificate, summation stops once the certified
/// tail is below `cfg.rel_tol` times the partial sum and every computed term
/// is checked against its bound. Without one, it stops on relative term
/// decay below 1e-12 and the result is marked non-rigorous. `n_terms` caps
/// the number of terms.
pub fn tilde_p(req: &SeriesRequest, cert: Option<&TailCertificate>) -> Result<SeriesResult> {
    req.validate()?;
    if let Some(c) = cert {
        c.validate()?;
    }
    if req.engine == Engine::MonteCarlo {
        let mut out = feynman_kac_mc(req)?;
        if let Some(c) = cert {
            out.tail_bound = Some(c.tail_after(req.n_terms)?);
        }
        return Ok(out);
    }
    let (mut coarse, mut fine) = engines(req)?;
    let p = req.kernel.eval(req.s, &req.x, req.t, &req.y);
    let mut terms = Vec::new();
    let mut err = 0.0;
    let mut partial = 0.0;
    for n in 0..=req.n_terms.max(1) {
        let f = fine.term(n);
        let (v, clipped) = nonnegative(f);
        err += (f - coarse.term(n)).abs() + clipped;
        terms.push(v);
        partial += v;
        if let Some(c) = cert {
            let bound = c.term_bound(n)?;
            if v > bound * (1.0 + 1e-8) + err {
                return Err(Error::Violation(format!("term p_{n} = {v:e} exceeds its certified bound {bound:e}")));
            }
            let tail = c.tail_after(n)?;
            if tail <= req.cfg.rel_tol * partial || (partial == 0.0 && tail == 0.0) {
                let mut out = SeriesResult::from_terms(Engine::GridRecursion, p, terms, err);
                out.tail_bound = Some(tail);
                out.rigorous = true;
                check_finite(&out)?;
                return Ok(out);
            }
        } else if n >= 1 && v <= DECAY_TOL * partial {
            let out = SeriesResult::from_terms(Engine::GridRecursion, p, terms, err);
            check_finite(&out)?;
            return Ok(out);
        }
    }
    Err(Error::NonConvergence { what: "perturbation series (term cap reached)", value: partial, err_est: err })
}

#[derive(Debug, Clone, Default)]
struct McBlock {
    n: usize,
    sum: f64,
    sum_sq: f64,
    term_sums: Vec<f64>,
    clipped: u64,
    evals: u64,
}

/// `p̃ = p(s,x,t,y)·E[exp(∫_s^t q(u, B_u) du)]` over bridges of the process
/// with transition density `g_b`, sampled at `mc_steps` equispaced times with
/// antithetic increments. The standard error comes from pair averages. For
/// spatially constant `q` the path integral is deterministic and computed
/// exactly.
pub fn feynman_kac_mc(req: &SeriesRequest) -> Result<SeriesResult> {
    req.validate()?;
    let p = req.kernel.eval(req.s, &req.x, req.t, &req.y);
    let n_terms = req.n_terms;
    if let Some(total) = req.q.time_integral(req.s, req.t) {
        let mut terms = Vec::with_capacity(n_terms + 1);
        let mut term = p;
        for n in 0..=n_terms {
            if n > 0 {
                term *= total / n as f64;
            }
            terms.push(term);
        }
        let mut out = SeriesResult::from_terms(Engine::MonteCarlo, p, terms, 0.0);
        out.value = p * total.exp();
        out.mc_std_error = Some(0.0);
        out.clip_fraction = Some(0.0);
        check_finite(&out)?;
        return Ok(out);
    }
    let pairs = req.mc_paths.div_ceil(2);
    let blocks = pairs.div_ceil(MC_BLOCK_PAIRS);
    let results: Vec<McBlock> = (0..blocks)
        .into_par_iter()
        .map(|bi| {
            let count = MC_BLOCK_PAIRS.min(pairs - bi * MC_BLOCK_PAIRS);
            let mut rng = req.rng.substream(bi as u64);
            mc_block(req, count, n_terms, &mut rng)
        })
        .collect();
    let mut total = McBlock { term_sums: vec![0.0; n_terms + 1], ..Default::default() };
    for b in &results {
        total.n += b.n;
        total.sum += b.sum;
        total.sum_sq += b.sum_sq;
        total.clipped += b.clipped;
        total.evals += b.evals;
        total.term_sums.iter_mut().zip(&b.term_sums).for_each(|(a, v)| *a += v);
    }
    let n = total.n as f64;
    let mean = total.sum / n;
    let var = ((total.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let se = (var / n).sqrt();
    if !(se <= mean) || !mean.is_finite() {
        return Err(Error::NonConvergence {
            what: "Feynman-Kac estimator (std error exceeds mean)",
            value: p * mean,
            err_est: p * se,
        });
    }
    let terms = total.term_sums.iter().map(|v| p * v / n).collect();
    let mut out = SeriesResult::from_terms(Engine::MonteCarlo, p, terms, p * se);
    out.value = p * mean;
    out.mc_std_error = Some(p * se);
    out.clip_fraction = Some(total.clipped as f64 / total.evals.max(1) as f64);
    check_finite(&out)?;
    Ok(out)
}

fn mc_block(req: &SeriesRequest, pairs: usize, n_terms: usize, rng: &mut RngStream) -> McBlock {
    let (s, t, b) = (req.s, req.t, req.kernel.a);
    let d = req.kernel.d;
    let steps = req.mc_steps;
    let h = (t - s) / steps as f64;
    let mut out = McBlock { term_sums: vec![0.0; n_terms + 1], ..Default::default() };
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let clip = |v: f64, clipped: &mut u64| {
        if v > Q_CLIP {
            *clipped += 1;
            Q_CLIP
        } else {
            v
        }
    };
    for _ in 0..pairs {
        plus.copy_from_slice(&req.x);
        minus.copy_from_slice(&req.x);
        let q0 = clip(req.q.eval(s, &req.x), &mut out.clipped);
        let q1 = clip(req.q.eval(t, &req.y), &mut out.clipped);
        let ends = 0.5 * (q0 + q1);
        let (mut ip, mut im) = (ends, ends);
        out.evals += 2;
        for k in 0..steps - 1 {
            let uk = s + k as f64 * h;
            let next = s + (k + 1) as f64 * h;
            let frac = h / (t - uk);
            let sd = (2.0 / b * h * (t - next) / (t - uk)).sqrt();
            for i in 0..d {
                let xi = rng.normal();
                plus[i] += frac * (req.y[i] - plus[i]) + sd * xi;
                minus[i] += frac * (req.y[i] - minus[i]) - sd * xi;
            }
            ip += clip(req.q.eval(next, &plus), &mut out.clipped);
            im += clip(req.q.eval(next, &minus), &mut out.clipped);
            out.evals += 2;
        }
        ip *= h;
        im *= h;
        let pair = 0.5 * (ip.exp() + im.exp());
        out.n += 1;
        out.sum += pair;
        out.sum_sq += pair * pair;
        let (mut tp, mut tm) = (1.0, 1.0);
        for (n, acc) in out.term_sums.iter_mut().enumerate() {
            if n > 0 {
                tp *= ip / n as f64;
                tm *= im / n as f64;
            }
            *acc += 0.5 * (tp + tm);
        }
    }
    out
}

fn require_1d(kernel: &GaussianKernel, q: &Potential, x: &[f64], y: &[f64]) -> Result<()> {
    if kernel.d != 1 || q.d != 1 || x.len() != 1 || y.len() != 1 {
        return Err(Error::param("this check is implemented for d = 1"));
    }
    Ok(())
}

/// Bridge of `g_b` from `(s,x)` to `(t,y)` at time `u`: mean and standard deviation.
fn bridge(b: f64, s: f64, x: f64, t: f64, y: f64, u: f64) -> (f64, f64) {
    let mean = x + (u - s) / (t - s) * (y - x);
    let sd = (2.0 * (u - s) * (t - u) / (b * (t - s))).max(0.0).sqrt();
    (mean, sd)
}

/// `|Σ_{m≤n} ∫ pₘ(s,x,u,z) pₙ₋ₘ(u,z,t,y) dz − pₙ(s,x,t,y)|` in `d = 1`.
///
/// The factors `pₘ(s,x,u,·)` come from a second engine run on the reversed
/// time axis with the potential `q(−v, ·)`.
#[allow(clippy::too_many_arguments)]
pub fn term_ck_residual(
    kernel: &GaussianKernel,
    q: &Potential,
    n: usize,
    s: f64,
    u: f64,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    require_1d(kernel, q, x, y)?;
    if n > 3 {
        return Err(Error::param("term_ck_residual supports n <= 3"));
    }
    if !(s < u && u < t) {
        return Err(Error::param(format!("need s < u < t, got {s}, {u}, {t}")));
    }
    let params = GridParams::default();
    let mut fwd = GridEngine::new(kernel, q, s, x, t, y, &params, cfg.hermite_order)?;
    let mut bwd = GridEngine::new(kernel, &q.time_reversed(), -t, y, -s, x, &params, cfg.hermite_order)?;
    fwd.ensure(n);
    bwd.ensure(n);
    let gh = gauss_hermite(cfg.hermite_order)?;
    let (mean, sd) = bridge(kernel.a, s, x[0], t, y[0], u);
    let mut e = 0.0;
    for (g, w) in gh.iter() {
        let z = [mean + SQRT_2 * sd * g];
        let conv: f64 = (0..=n).map(|m| bwd.ratio_cached(m, -u, &z) * fwd.ratio_cached(n - m, u, &z)).sum();
        e += w / SQRT_PI * conv;
    }
    let p = kernel.eval(s, x, t, y);
    Ok(p * (e - fwd.ratio_cached(n, s, x)).abs())
}

/// `|S_N − p − ∫∫ p q S_{N−1}|` at `(s,x,t,y)` in `d = 1`, with
/// `S_N = Σ_{n≤N} pₙ` from the grid engine and the double integral by an
/// independent adaptive quadrature in time and Gauss–Hermite in space.
#[allow(clippy::too_many_arguments)]
pub fn duhamel_residual(
    kernel: &GaussianKernel,
    q: &Potential,
    big_n: usize,
    s: f64,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    require_1d(kernel, q, x, y)?;
    if big_n > 6 {
        return Err(Error::param("duhamel_residual supports N <= 6"));
    }
    if !(s < t) {
        return Err(Error::param("need s < t"));
    }
    let mut eng = GridEngine::new(kernel, q, s, x, t, y, &GridParams::default(), cfg.hermite_order)?;
    eng.ensure(big_n);
    let gh = gauss_hermite(cfg.hermite_order)?;
    let sum_n: f64 = (0..=big_n).map(|n| eng.ratio_cached(n, s, x)).sum();
    let mut integral = 0.0;
    if big_n >= 1 {
        let qcfg = cfg.with_tolerances(1e-14, 1e-11);
        let integrand = |u: f64| {
            let (mean, sd) = bridge(kernel.a, s, x[0], t, y[0], u);
            gh.iter()
                .map(|(g, w)| {
                    let z = [mean + SQRT_2 * sd * g];
                    let qv = q.eval(u, &z);
                    if qv == 0.0 {
                        return 0.0;
                    }
                    let r: f64 = (0..big_n).map(|n| eng.ratio_cached(n, u, &z)).sum();
                    w / SQRT_PI * qv * r
                })
                .sum::<f64>()
        };
        for pair in eng.time_edges().windows(2) {
            integral += integrate_1d(&integrand, pair[0], pair[1], &qcfg)?.value;
        }
    }
    let p = kernel.eval(s, x, t, y);
    Ok(p * (sum_n - 1.0 - integral).abs())
}

/// `φ(u,z) = amp · ψ((2u − t0 − t1)/(t1 − t0)) · exp(−(z − z0)²/width²)` with
/// the bump `ψ(v) = exp(−1/(1 − v²))` on `(−1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub t0: f64,
    pub t1: f64,
    pub z0: f64,
    pub width: f64,
    pub amp: f64,
}

impl TestFunction {
    pub fn zero() -> Self {
        Self { t0: 0.0, t1: 1.0, z0: 0.0, width: 1.0, amp: 0.0 }
    }

    /// Three bumps around `(s,x)`: one strictly after `s`, two straddling it.
    pub fn catalog(s: f64, x: f64) -> [TestFunction; 3] {
        [
            Self { t0: s + 1.0, t1: s + 2.0, z0: x + 0.3, width: 0.8, amp: 1.0 },
            Self { t0: s - 0.5, t1: s + 1.5, z0: x, width: 1.0, amp: 1.0 },
            Self { t0: s - 1.0, t1: s + 0.7, z0: x - 0.5, width: 0.4, amp: 1.0 },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 < self.t1 && self.width > 0.0 && self.amp.is_finite()) {
            return Err(Error::param("test function needs t0 < t1 and width > 0"));
        }
        Ok(())
    }

    fn bump(&self, u: f64) -> (f64, f64) {
        let v = (2.0 * u - self.t0 - self.t1) / (self.t1 - self.t0);
        if v.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let one = 1.0 - v * v;
        let psi = (-1.0 / one).exp();
        (psi, psi * (-2.0 * v / (one * one)) * 2.0 / (self.t1 - self.t0))
    }

    fn space(&self, z: f64) -> (f64, f64) {
        let w2 = self.width * self.width;
        let dz = z - self.z0;
        let g = (-dz * dz / w2).exp();
        (g, g * (4.0 * dz * dz / (w2 * w2) - 2.0 / w2))
    }

    pub fn value(&self, u: f64, z: f64) -> f64 {
        self.amp * self.bump(u).0 * self.space(z).0
    }

    /// `∂_u φ + (1/b) ∂_zz φ`.
    pub fn generator(&self, b: f64, u: f64, z: f64) -> f64 {
        let (psi, dpsi) = self.bump(u);
        if psi == 0.0 {
            return 0.0;
        }
        let (g, g2) = self.space(z);
        self.amp * (dpsi * g + psi * g2 / b)
    }
}

/// `|∫∫ p(s,x,u,z)[∂_u φ + (1/b)∂_zz φ] dz du + φ(s,x)|` in `d = 1` with
/// `p = g_b`, or with `p = g_b + 2u + b z²` when `alternative` is set. The
/// added quadratic is integrated over the whole time support of `φ`.
pub fn left_inverse_residual(
    b: f64,
    s: f64,
    x: f64,
    phi: &TestFunction,
    alternative: bool,
    cfg: &QuadConfig,
) -> Result<f64> {
    phi.validate()?;
    if !(b > 0.0) {
        return Err(Error::param("b must be positive"));
    }
    if phi.amp == 0.0 {
        return Ok(0.0);
    }
    let kernel = GaussianKernel::new(b, 1)?;
    let span = 15.0;
    let inner = |u: f64| -> Result<f64> {
        let v = 2.0 * (u - s) / b;
        if v <= 0.0 {
            return Ok(phi.generator(b, u, x));
        }
        let w2 = phi.width * phi.width;
        let prec = 1.0 / v + 2.0 / w2;
        let centre = (x / v + 2.0 * phi.z0 / w2) / prec;
        let sd = prec.powf(-0.5);
        let r = integrate_1d(
            |z| kernel.one_dim(u - s, z - x) * phi.generator(b, u, z),
            centre - span * sd,
            centre + span * sd,
            cfg,
        )?;
        Ok(r.value)
    };
    let mut total = phi.value(s, x);
    let lo = s.max(phi.t0);
    if lo < phi.t1 {
        total += nested(inner, lo, phi.t1, cfg)?;
    }
    if alternative {
        let extra = |u: f64| -> Result<f64> {
            let r = integrate_1d(
                |z| (2.0 * u + b * z * z) * phi.generator(b, u, z),
                phi.z0 - span * phi.width,
                phi.z0 + span * phi.width,
                cfg,
            )?;
            Ok(r.value)
        };
        total += nested(extra, phi.t0, phi.t1, cfg)?;
    }
    Ok(total.abs())
}

/// Outer adaptive integral of a fallible inner integral.
fn nested<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<f64> {
    let mut first_err = None;
    let r = integrate_1d(
        |u| match f(u) {
            Ok(v) => v,
            Err(e) => {
                first_err.get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        cfg,
    )?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kato::{PotentialKind, Profile};

    fn k1(b: f64) -> GaussianKernel {
        GaussianKernel::new(b, 1).unwrap()
    }

    fn bump_1d() -> Potential {
        Potential::new(
            1,
            PotentialKind::Separable {
                f: Profile::Constant { value: 1.0 },
                window: None,
                u: Profile::Gaussian { coef: 1.0, width: 1.0 },
                cutoff: None,
            },
        )
        .unwrap()
    }

    fn time_linear() -> Potential {
        Potential::new(
            1,
            PotentialKind::TimeOnly { f: Profile::Power { coef: 1.0, exponent: 1.0 }, window: Some([0.0, 1.0]) },
        )
        .unwrap()
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn zero_potential_has_only_the_first_term() {
        let mut req = SeriesRequest::new(k1(1.0), Potential::zero(1), 0.0, vec![0.2], 1.0, vec![-0.4]);
        req.n_terms = 4;
        let r = term_grid(&req).unwrap();
        assert_eq!(r.terms[0], req.kernel.eval(0.0, &[0.2], 1.0, &[-0.4]));
        assert!(r.terms[1..].iter().all(|&v| v == 0.0));
        let tp = tilde_p(&req, None).unwrap();
        assert_eq!(tp.value, r.terms[0]);
    }

    #[test]
    fn constant_potential_closed_form() {
        let q0 = 0.7;
        let mut req = SeriesRequest::new(k1(1.3), Potential::constant(1, q0).unwrap(), 0.5, vec![0.1], 2.0, vec![1.0]);
        req.n_terms = 6;
        let r = term_grid(&req).unwrap();
        for (n, v) in r.terms.iter().enumerate() {
            let exact = (q0 * 1.5).powi(n as i32) / factorial(n) * r.p;
            assert!((v / exact - 1.0).abs() < 1e-10, "n={n}: {v} vs {exact}");
        }
        req.n_terms = 40;
        let tp = tilde_p(&req, None).unwrap();
        assert!((tp.value / (r.p * (q0 * 1.5).exp()) - 1.0).abs() < 1e-10);
        assert!(!tp.rigorous);
    }

    #[test]
    fn time_linear_closed_form() {
        let mut req = SeriesRequest::new(k1(1.0), time_linear(), 0.0, vec![0.0], 1.0, vec![0.5]);
        req.n_terms = 6;
        let r = term_grid(&req).unwrap();
        for (n, v) in r.terms.iter().enumerate() {
            let exact = 0.5f64.powi(n as i32) / factorial(n) * r.p;
            assert!((v / exact - 1.0).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn windowed_time_potential_uses_panels() {
        let q = Potential::new(
            2,
            PotentialKind::TimeOnly { f: Profile::Constant { value: 2.0 }, window: Some([0.3, 0.8]) },
        )
        .unwrap();
        let k = GaussianKernel::new(1.0, 2).unwrap();
        let mut req = SeriesRequest::new(k, q, 0.0, vec![0.0, 0.0], 1.0, vec![0.3, 0.1]);
        req.n_terms = 5;
        let r = term_grid(&req).unwrap();
        for (n, v) in r.terms.iter().enumerate() {
            let exact = 1.0f64.powi(n as i32) / factorial(n) * r.p;
            assert!((v / exact - 1.0).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn bump_grid_converges() {
        let mut req = SeriesRequest::new(k1(1.0), bump_1d(), 0.0, vec![0.3], 1.5, vec![-0.2]);
        req.n_terms = 6;
        let r = term_grid(&req).unwrap();
        assert!(r.err_est < 1e-9 * r.partial_sum, "err {}", r.err_est);
        assert!(r.terms.iter().all(|&v| v >= 0.0));
        assert!(r.partial_sums.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn bump_first_term_matches_direct_quadrature() {
        let (s, t, x, y, b) = (0.0, 1.2, 0.4, -0.3, 1.5);
        let k = k1(b);
        let q = bump_1d();
        let mut req = SeriesRequest::new(k, q.clone(), s, vec![x], t, vec![y]);
        req.n_terms = 1;
        let r = term_grid(&req).unwrap();
        let cfg = QuadConfig::default();
        let direct = nested(
            |u| {
                let (mean, sd) = bridge(b, s, x, t, y, u);
                let v = integrate_1d(
                    |z| k.one_dim(u - s, z - x) * q.eval(u, &[z]) * k.one_dim(t - u, y - z),
                    mean - 30.0 * sd,
                    mean + 30.0 * sd,
                    &cfg,
                )?;
                Ok(v.value)
            },
            s,
            t,
            &cfg,
        )
        .unwrap();
        assert!((r.terms[1] / direct - 1.0).abs() < 1e-9, "{} vs {direct}", r.terms[1]);
    }

    #[test]
    fn grid_and_monte_carlo_agree() {
        let mut req = SeriesRequest::new(k1(1.0), bump_1d(), 0.0, vec![0.5], 1.0, vec![-0.5]);
        req.mc_paths = 20_000;
        req.rng = RngStream::new(7, 0);
        let grid = tilde_p(&req, None).unwrap();
        req.engine = Engine::MonteCarlo;
        let mc = feynman_kac_mc(&req).unwrap();
        let se = mc.mc_std_error.unwrap();
        assert!((grid.value - mc.value).abs() < 4.0 * se, "{} vs {} ± {se}", grid.value, mc.value);
    }

    #[test]
    fn monte_carlo_is_exact_for_time_only() {
        let mut req = SeriesRequest::new(k1(1.0), time_linear(), 0.0, vec![0.0], 1.0, vec![0.5]);
        req.engine = Engine::MonteCarlo;
        req.n_terms = 3;
        let r = feynman_kac_mc(&req).unwrap();
        assert_eq!(r.mc_std_error, Some(0.0));
        assert!((r.value / (r.p * 0.5f64.exp()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let mut req = SeriesRequest::new(k1(1.0), bump_1d(), 0.0, vec![0.0], 1.0, vec![0.0]);
        req.engine = Engine::MonteCarlo;
        req.mc_paths = 2000;
        req.rng = RngStream::new(11, 3);
        assert_eq!(feynman_kac_mc(&req).unwrap(), feynman_kac_mc(&req).unwrap());
    }

    #[test]
    fn unbounded_potential_rejected_by_grid() {
        let q = Potential::indicator_sum(3, 10).unwrap();
        let k = GaussianKernel::new(1.0, 3).unwrap();
        let req = SeriesRequest::new(k, q, 0.0, vec![0.0; 3], 1.0, vec![2.0, 0.0, 0.0]);
        let err = term_grid(&req).unwrap_err();
        assert!(err.to_string().contains("monte_carlo"));
    }

    #[test]
    fn certificate_tail_and_domination() {
        let q0 = 0.4;
        let mut req = SeriesRequest::new(k1(1.0), Potential::constant(1, q0).unwrap(), 0.0, vec![0.0], 1.0, vec![0.3]);
        req.n_terms = 80;
        let p = req.kernel.eval(0.0, &[0.0], 1.0, &[0.3]);
        // q ∈ N(p, p, 1, 0, Q) with Q(s,t) = q₀(t−s); k = 1 pieces give θ = q₀.
        let cert = TailCertificate { c: 1.0, eta: 0.0, theta: q0, k: 1, pstar: p };
        let r = tilde_p(&req, Some(&cert)).unwrap();
        assert!(r.rigorous);
        assert!(r.tail_bound.unwrap() <= req.cfg.rel_tol * r.partial_sum);
        assert!((r.value / (p * q0.exp()) - 1.0).abs() < 1e-10);
        let bad = TailCertificate { theta: 1.0, ..cert };
        assert!(tilde_p(&req, Some(&bad)).is_err());
    }

    #[test]
    fn ck_residual_of_terms() {
        let k = k1(1.0);
        let one = Potential::constant(1, 1.0).unwrap();
        let cfg = QuadConfig::default();
        let r0 = term_ck_residual(&k, &one, 0, 0.0, 0.4, 1.0, &[0.1], &[0.6], &cfg).unwrap();
        let kr = crate::kernels::ck_residual(&k, 0.0, 0.4, 1.0, &[0.1], &[0.6], &cfg).unwrap();
        assert!(r0 < 1e-12 && kr < 1e-10);
        assert!(term_ck_residual(&k, &one, 1, 0.0, 0.4, 1.0, &[0.1], &[0.6], &cfg).unwrap() < 1e-8);
        for n in 1..=3 {
            let r = term_ck_residual(&k, &bump_1d(), n, 0.0, 0.35, 1.0, &[0.1], &[0.6], &cfg).unwrap();
            assert!(r < 1e-6, "n={n}: {r}");
        }
        let tl = Potential::new(
            1,
            PotentialKind::Separable {
                f: Profile::Exponential { coef: 1.0, rate: 0.5 },
                window: None,
                u: Profile::Gaussian { coef: 1.0, width: 0.7 },
                cutoff: None,
            },
        )
        .unwrap();
        assert!(term_ck_residual(&k, &tl, 2, 0.0, 0.6, 1.0, &[0.1], &[-0.4], &cfg).unwrap() < 1e-6);
    }

    #[test]
    fn duhamel_residuals() {
        let k = k1(1.0);
        let cfg = QuadConfig::default();
        let zero = duhamel_residual(&k, &Potential::zero(1), 3, 0.0, 1.0, &[0.0], &[0.5], &cfg).unwrap();
        assert_eq!(zero, 0.0);
        let one = Potential::constant(1, 1.0).unwrap();
        assert!(duhamel_residual(&k, &one, 4, 0.0, 1.0, &[0.0], &[0.5], &cfg).unwrap() < 1e-8);
        assert!(duhamel_residual(&k, &bump_1d(), 3, 0.0, 1.0, &[0.0], &[0.5], &cfg).unwrap() < 1e-6);
    }

    #[test]
    fn left_inverse_identity() {
        let cfg = QuadConfig::default();
        for b in [1.0, 2.0] {
            for phi in TestFunction::catalog(0.0, 0.2) {
                let r = left_inverse_residual(b, 0.0, 0.2, &phi, false, &cfg).unwrap();
                assert!(r < 1e-6, "b={b} {phi:?}: {r}");
                let alt = left_inverse_residual(b, 0.0, 0.2, &phi, true, &cfg).unwrap();
                assert!(alt < 1e-6, "alternative b={b} {phi:?}: {alt}");
            }
        }
        assert_eq!(left_inverse_residual(1.0, 0.0, 0.0, &TestFunction::zero(), false, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn lemma_bound_values() {
        assert!((lemma2_bound(3, 2, 0.5, 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((lemma2_bound(0, 3, 0.5, 2.0).unwrap() - 8.0).abs() < 1e-13);
    }
}
