//! Barycentric interpolation on Chebyshev–Lobatto points and on equispaced
//! periodic grids.

use std::f64::consts::PI;

/// Chebyshev–Lobatto points `cos(jπ/(n-1))` on `[-1, 1]`, descending, with
/// their barycentric weights.
#[derive(Debug, Clone)]
pub struct ChebyshevLobatto {
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebyshevLobatto {
    /// `n == 1` yields the single node 0 (constant interpolation).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "at least one node");
        if n == 1 {
            return Self { nodes: vec![0.0], weights: vec![1.0] };
        }
        let last = n - 1;
        let nodes = (0..n)
            .map(|j| {
                // Symmetric evaluation keeps x_j = -x_{n-1-j} exactly.
                let k = last as isize - 2 * j as isize;
                (PI * k as f64 / (2 * last) as f64).sin()
            })
            .collect();
        let weights = (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == last {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Coefficients `ℓ_j(x)` such that the interpolant is `Σ ℓ_j(x) f_j`.
    pub fn basis_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[j] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for ((o, &xj), &wj) in out.iter_mut().zip(&self.nodes).zip(&self.weights) {
            let c = wj / (x - xj);
            *o = c;
            denom += c;
        }
        out.iter_mut().for_each(|o| *o /= denom);
    }

    pub fn eval(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let mut num = 0.0;
        let mut denom = 0.0;
        for ((&xj, &wj), &fj) in self.nodes.iter().zip(&self.weights).zip(values) {
            let dx = x - xj;
            if dx == 0.0 {
                return fj;
            }
            let c = wj / dx;
            num += c * fj;
            denom += c;
        }
        num / denom
    }
}

/// Trigonometric interpolation through `m` (even) equispaced samples
/// `θ_k = 2πk/m` of a `2π`-periodic function.
#[derive(Debug, Clone)]
pub struct PeriodicGrid {
    m: usize,
}

impl PeriodicGrid {
    pub fn new(m: usize) -> Self {
        assert!(m >= 2 && m.is_multiple_of(2), "periodic grid needs an even number of points");
        Self { m }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.m as f64
    }

    /// Basis coefficients at `theta`; the interpolant is `Σ ℓ_k(θ) f_k`.
    pub fn basis_into(&self, theta: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m);
        let mut denom = 0.0;
        for (k, o) in out.iter_mut().enumerate() {
            let half = 0.5 * (theta - self.node(k));
            let s = half.sin();
            if s.abs() < 1e-15 {
                out.iter_mut().for_each(|o| *o = 0.0);
                out[k] = 1.0;
                return;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let c = sign * half.cos() / s;
            *o = c;
            denom += c;
        }
        out.iter_mut().for_each(|o| *o /= denom);
    }
}
