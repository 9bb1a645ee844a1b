//! Scalar maximization: a dense grid scan followed by golden-section
//! refinement around the best grid sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_ARG_TOL: f64 = 1e-10;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub argmax: f64,
    pub value: f64,
    pub bracket: (f64, f64),
    /// Width of the final golden-section interval.
    pub tolerance_achieved: f64,
    /// Index of the best grid sample.
    pub grid_index: usize,
}

fn checked<F: FnMut(f64) -> f64>(f: &mut F, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_nan() || v == f64::INFINITY {
        Err(Error::NonFinite("maximize_scalar objective"))
    } else {
        Ok(v)
    }
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
///
/// Returns `(argmax, value, final_width)`. Values of `-inf` are accepted and
/// treated as very poor.
pub fn golden_section_max<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64, f64)> {
    if !(lo <= hi) {
        return Err(Error::param(format!("golden section bracket [{lo}, {hi}] is empty")));
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = checked(&mut f, x1)?;
    let mut f2 = checked(&mut f, x2)?;
    let mut iters = 0;
    while hi - lo > tol && iters < 200 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = checked(&mut f, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = checked(&mut f, x2)?;
        }
        iters += 1;
    }
    let (x, v) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok((x, v, hi - lo))
}

/// Maximize `f` on `[lo, hi]`: evaluate on `grid` equispaced points, then
/// refine by golden section between the neighbours of the best sample.
///
/// The returned value is never below the best grid value.
pub fn maximize_scalar<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> Result<OptResult> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param(format!("maximize_scalar needs lo < hi, got [{lo}, {hi}]")));
    }
    if grid < 8 {
        return Err(Error::param(format!("maximize_scalar grid {grid} < 8")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("maximize_scalar tolerance must be positive"));
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let node = |i: usize| if i == grid - 1 { hi } else { lo + step * i as f64 };
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..grid {
        let v = checked(&mut f, node(i))?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let (j, grid_val) = best;
    let bl = node(j.saturating_sub(1));
    let br = node((j + 1).min(grid - 1));
    let (x, v, width) = golden_section_max(&mut f, bl, br, tol)?;
    let (argmax, value) = if v >= grid_val { (x, v) } else { (node(j), grid_val) };
    Ok(OptResult { argmax, value, bracket: (bl, br), tolerance_achieved: width, grid_index: j })
}

/// Minimization counterpart of [`maximize_scalar`]; `value` holds the minimum.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> Result<OptResult> {
    let mut r = maximize_scalar(|x| -f(x), lo, hi, grid, tol)?;
    r.value = -r.value;
    Ok(r)
}

/// Nelder–Mead maximization from `x0` with initial simplex steps `step`.
///
/// Stops when the spread of simplex values falls below `ftol` and the
/// simplex diameter below `xtol`, or after `max_iter` iterations. Returns the
/// best vertex and its value.
pub fn nelder_mead_max<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let v = eval(&x);
        simplex.push((x, v));
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect() };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let spread = simplex[0].1 - simplex[n].1;
        let diam = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max);
        if spread.abs() <= ftol && diam <= xtol {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = lerp(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected);
        if fr > simplex[0].1 {
            let expanded = lerp(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded);
            simplex[n] = if fe > fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (toward, ft) = if fr > worst.1 { (&reflected, fr) } else { (&worst.0, worst.1) };
            let contracted = lerp(&centroid, toward, 0.5);
            let fc = eval(&contracted);
            if fc > ft {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = lerp(&best, &vertex.0, 0.5);
                    let v = eval(&x);
                    *vertex = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v)
}
