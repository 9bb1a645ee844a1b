//! Gaussian quadrature rules, computed by Newton iteration on the three-term
//! recurrences and cached per order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of a Gaussian rule, nodes in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

type Cache = Mutex<HashMap<usize, Arc<GaussRule>>>;

fn cached(cache: &'static OnceLock<Cache>, n: usize, build: fn(usize) -> GaussRule) -> Arc<GaussRule> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap_or_else(|e| e.into_inner());
    guard.entry(n).or_insert_with(|| Arc::new(build(n))).clone()
}

pub const MAX_HERMITE_ORDER: usize = 200;

/// Gauss–Hermite rule for the weight `e^{-x²}` on the real line.
pub fn gauss_hermite(n: usize) -> Result<Arc<GaussRule>> {
    if !(2..=MAX_HERMITE_ORDER).contains(&n) {
        return Err(Error::param(format!("Gauss-Hermite order {n} outside [2, {MAX_HERMITE_ORDER}]")));
    }
    static CACHE: OnceLock<Cache> = OnceLock::new();
    Ok(cached(&CACHE, n, build_hermite))
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<Arc<GaussRule>> {
    if !(1..=1000).contains(&n) {
        return Err(Error::param(format!("Gauss-Legendre order {n} outside [1, 1000]")));
    }
    static CACHE: OnceLock<Cache> = OnceLock::new();
    Ok(cached(&CACHE, n, build_legendre))
}

fn build_hermite(n: usize) -> GaussRule {
    let nf = n as f64;
    let m = n.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    // Roots in descending order, largest first.
    let mut roots = vec![0.0; m];
    let mut wts = vec![0.0; m];
    let mut z: f64 = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots[0],
            3 => 1.91 * z - 0.91 * roots[1],
            _ => 2.0 * z - roots[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            if p1 == 0.0 {
                break;
            }
            // Newton on p / Π(z − found roots), so converged roots repel.
            let deflate: f64 = roots[..i].iter().map(|r| 1.0 / (z - r)).sum();
            let mut next = z - 1.0 / (pp / p1 - deflate);
            if i > 0 && next >= roots[i - 1] {
                next = 0.5 * (z + roots[i - 1]);
            }
            let dz = z - next;
            z = next;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        roots[i] = z;
        wts[i] = 2.0 / (pp * pp);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..m {
        nodes[i] = -roots[i];
        weights[i] = wts[i];
        nodes[n - 1 - i] = roots[i];
        weights[n - 1 - i] = wts[i];
    }
    if n % 2 == 1 {
        nodes[m - 1] = 0.0;
    }
    GaussRule { nodes, weights }
}

fn build_legendre(n: usize) -> GaussRule {
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[m - 1] = 0.0;
    }
    GaussRule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::ln_gamma;

    #[test]
    fn hermite_two_points() {
        let r = gauss_hermite(2).unwrap();
        let s = 0.5f64.sqrt();
        assert!((r.nodes[0] + s).abs() < 1e-15 && (r.nodes[1] - s).abs() < 1e-15);
        let half = PI.sqrt() / 2.0;
        assert!((r.weights[0] - half).abs() < 1e-15 && (r.weights[1] - half).abs() < 1e-15);
    }

    #[test]
    fn hermite_second_moment() {
        let r = gauss_hermite(3).unwrap();
        let m2: f64 = r.iter().map(|(x, w)| w * x * x).sum();
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_high_moment_n20() {
        // ∫ x^38 e^{-x²} dx = Γ(39/2)
        let r = gauss_hermite(20).unwrap();
        let m: f64 = r.iter().map(|(x, w)| w * x.powi(38)).sum();
        let exact = ln_gamma(19.5).unwrap().exp();
        assert!(((m - exact) / exact).abs() < 1e-9, "{m} vs {exact}");
    }

    #[test]
    fn hermite_weight_sum_and_symmetry() {
        for n in [2, 5, 17, 40, 100, 200] {
            let r = gauss_hermite(n).unwrap();
            let total: f64 = r.weights.iter().sum();
            assert!((total - PI.sqrt()).abs() < 1e-12, "n={n}: {total}");
            for i in 0..n {
                assert!((r.nodes[i] + r.nodes[n - 1 - i]).abs() < 1e-12);
            }
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn hermite_order_range() {
        assert!(gauss_hermite(1).is_err());
        assert!(gauss_hermite(201).is_err());
    }

    #[test]
    fn legendre_exact_for_polynomials() {
        let r = gauss_legendre(12).unwrap();
        for k in 0..24 {
            let q: f64 = r.iter().map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-14, "k={k}");
        }
    }
}
