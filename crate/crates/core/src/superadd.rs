//! Superadditive functions `Q(s,t)` of the form
//! `β(t−s) + ∫_s^t density + Σ atoms`, their regularization
//! `Q⁻(s,t) = lim_{h→0⁺} Q(s+h, t−h)` and the splitting of `[s,t]` into
//! pieces with `Q(s_{i−1}, s_i) ≤ θ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Which atoms an interval `(s,t)` charges: open `(s,t)` or `[s,t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalConvention {
    #[default]
    Open,
    HalfOpenLeftClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Piecewise constant density: `values[i]` on `[breaks[i], breaks[i+1])`,
/// zero outside `[breaks[0], breaks[last])`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDensity {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepDensity {
    pub fn validate(&self) -> Result<()> {
        if self.breaks.is_empty() && self.values.is_empty() {
            return Ok(());
        }
        if self.breaks.len() != self.values.len() + 1 {
            return Err(Error::param("step density needs one more break than values"));
        }
        if !self.breaks.windows(2).all(|w| w[0] < w[1]) || !self.breaks.iter().all(|b| b.is_finite()) {
            return Err(Error::param("step density breaks must be finite and increasing"));
        }
        if !self.values.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(Error::param("step density values must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn integral(&self, s: f64, t: f64) -> f64 {
        if s >= t {
            return 0.0;
        }
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let lo = self.breaks[i].max(s);
                let hi = self.breaks[i + 1].min(t);
                if hi > lo {
                    v * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn value_at(&self, u: f64) -> f64 {
        match self.breaks.iter().rposition(|b| *b <= u) {
            Some(i) if i < self.values.len() => self.values[i],
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuperadditiveQ {
    Linear {
        beta: f64,
    },
    Measure {
        #[serde(default)]
        atoms: Vec<Atom>,
        #[serde(default)]
        density: StepDensity,
        #[serde(default)]
        convention: IntervalConvention,
    },
    Composite {
        parts: Vec<SuperadditiveQ>,
    },
}

/// Anything that can be evaluated as `Q(s,t)`; used by the checks.
pub trait SuperadditiveFn {
    fn q(&self, s: f64, t: f64) -> f64;

    /// Points where one-sided behaviour matters, sampled preferentially.
    fn special_points(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Wraps an arbitrary function of `(s,t)` for use with the checks only.
pub struct Opaque<F: Fn(f64, f64) -> f64>(pub F);

impl<F: Fn(f64, f64) -> f64> SuperadditiveFn for Opaque<F> {
    fn q(&self, s: f64, t: f64) -> f64 {
        if s >= t {
            0.0
        } else {
            (self.0)(s, t)
        }
    }
}

impl SuperadditiveFn for SuperadditiveQ {
    fn q(&self, s: f64, t: f64) -> f64 {
        self.eval(s, t)
    }

    fn special_points(&self) -> Vec<f64> {
        let flat = self.flatten();
        let mut pts: Vec<f64> = flat.atoms.iter().map(|(a, _)| a.location).collect();
        for d in &flat.densities {
            pts.extend(d.breaks.iter().copied());
        }
        pts
    }
}

/// All parts merged: total slope, atoms tagged with their convention, and
/// the step densities.
struct Flat {
    beta: f64,
    atoms: Vec<(Atom, IntervalConvention)>,
    densities: Vec<StepDensity>,
}

impl SuperadditiveQ {
    pub fn linear(beta: f64) -> Self {
        SuperadditiveQ::Linear { beta }
    }

    pub fn atoms(atoms: &[(f64, f64)], convention: IntervalConvention) -> Self {
        SuperadditiveQ::Measure {
            atoms: atoms.iter().map(|&(location, mass)| Atom { location, mass }).collect(),
            density: StepDensity::default(),
            convention,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SuperadditiveQ::Linear { beta } => {
                if !(*beta >= 0.0) || !beta.is_finite() {
                    return Err(Error::param(format!("linear slope must be finite and nonnegative, got {beta}")));
                }
            }
            SuperadditiveQ::Measure { atoms, density, .. } => {
                for a in atoms {
                    if !(a.mass > 0.0) || !a.mass.is_finite() || !a.location.is_finite() {
                        return Err(Error::param("atoms need finite locations and positive finite masses"));
                    }
                }
                density.validate()?;
            }
            SuperadditiveQ::Composite { parts } => {
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        if s >= t {
            return 0.0;
        }
        match self {
            SuperadditiveQ::Linear { beta } => beta * (t - s),
            SuperadditiveQ::Measure { atoms, density, convention } => {
                let charged = |x: f64| match convention {
                    IntervalConvention::Open => s < x && x < t,
                    IntervalConvention::HalfOpenLeftClosed => s <= x && x < t,
                };
                let mass: f64 = atoms.iter().filter(|a| charged(a.location)).map(|a| a.mass).sum();
                mass + density.integral(s, t)
            }
            SuperadditiveQ::Composite { parts } => parts.iter().map(|p| p.eval(s, t)).sum(),
        }
    }

    /// The representation of `Q⁻`: measure parts switch to the open convention.
    pub fn regularize(&self) -> Self {
        match self {
            SuperadditiveQ::Linear { .. } => self.clone(),
            SuperadditiveQ::Measure { atoms, density, .. } => SuperadditiveQ::Measure {
                atoms: atoms.clone(),
                density: density.clone(),
                convention: IntervalConvention::Open,
            },
            SuperadditiveQ::Composite { parts } => {
                SuperadditiveQ::Composite { parts: parts.iter().map(Self::regularize).collect() }
            }
        }
    }

    /// True when every measure part uses the open convention, so that `Q⁻ = Q`.
    pub fn is_regular(&self) -> bool {
        match self {
            SuperadditiveQ::Linear { .. } => true,
            SuperadditiveQ::Measure { convention, .. } => *convention == IntervalConvention::Open,
            SuperadditiveQ::Composite { parts } => parts.iter().all(Self::is_regular),
        }
    }

    fn flatten(&self) -> Flat {
        let mut flat = Flat { beta: 0.0, atoms: Vec::new(), densities: Vec::new() };
        fn walk(q: &SuperadditiveQ, flat: &mut Flat) {
            match q {
                SuperadditiveQ::Linear { beta } => flat.beta += beta,
                SuperadditiveQ::Measure { atoms, density, convention } => {
                    flat.atoms.extend(atoms.iter().map(|a| (*a, *convention)));
                    if !density.values.is_empty() {
                        flat.densities.push(density.clone());
                    }
                }
                SuperadditiveQ::Composite { parts } => parts.iter().for_each(|p| walk(p, flat)),
            }
        }
        walk(self, &mut flat);
        flat
    }

    /// `inf{u ∈ (s,t] : Q(s,u) ≥ level}` for a regular `Q`, or `t` if the
    /// level is never reached.
    ///
    /// With open intervals `u ↦ Q(s,u)` is left-continuous and jumps right
    /// after each atom, and it is linear between atoms and density breaks,
    /// so the infimum is found exactly by walking those events in order.
    fn generalized_inverse(&self, flat: &Flat, s: f64, t: f64, level: f64) -> f64 {
        let mut events: Vec<f64> = flat
            .atoms
            .iter()
            .map(|(a, _)| a.location)
            .chain(flat.densities.iter().flat_map(|d| d.breaks.iter().copied()))
            .filter(|&x| s < x && x < t)
            .collect();
        events.push(t);
        events.sort_by(f64::total_cmp);
        events.dedup();
        let mut left = s;
        let mut value_right = 0.0; // Q(s, left+)
        for &right in &events {
            let mid = 0.5 * (left + right);
            let slope = flat.beta + flat.densities.iter().map(|d| d.value_at(mid)).sum::<f64>();
            let value_end = value_right + slope * (right - left);
            if value_right >= level {
                return left;
            }
            if value_end >= level {
                let u = left + (level - value_right) / slope;
                return u.clamp(left, right);
            }
            let jump: f64 = flat.atoms.iter().filter(|(a, _)| a.location == right).map(|(a, _)| a.mass).sum();
            value_right = value_end + jump;
            left = right;
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    pub breakpoints: Vec<f64>,
    pub theta: f64,
    /// `Q(s_{i−1}, s_i)` for each piece.
    pub piece_values: Vec<f64>,
}

impl Splitting {
    pub fn k(&self) -> usize {
        self.breakpoints.len() - 1
    }
}

/// Splits `[s,t]` into `k = ⌈Q(s,t)/θ⌉` pieces (one if `Q(s,t) = 0`) with
/// `s_i = inf{u : Q(s,u) ≥ iθ}`, so that `Q(s_{i−1}, s_i) ≤ θ`.
///
/// `Q` must be regular; a half-open representation is rejected with a
/// request to regularize first. The piece bound is verified before return.
pub fn split(q: &SuperadditiveQ, s: f64, t: f64, theta: f64) -> Result<Splitting> {
    q.validate()?;
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::param(format!("theta must be positive, got {theta}")));
    }
    if !(s <= t) {
        return Err(Error::param(format!("need s <= t, got {s}, {t}")));
    }
    if !q.is_regular() {
        return Err(Error::param("split needs a regular Q; apply regularize() first"));
    }
    let total = q.eval(s, t);
    let k = if total == 0.0 { 1 } else { (total / theta).ceil().max(1.0) as usize };
    let flat = q.flatten();
    let mut breakpoints = Vec::with_capacity(k + 1);
    breakpoints.push(s);
    for i in 1..k {
        let u = q.generalized_inverse(&flat, s, t, i as f64 * theta);
        let prev = *breakpoints.last().unwrap();
        breakpoints.push(u.max(prev));
    }
    breakpoints.push(t);
    let piece_values: Vec<f64> = breakpoints.windows(2).map(|w| q.eval(w[0], w[1])).collect();
    if let Some((i, v)) = piece_values.iter().enumerate().find(|(_, v)| **v > theta * (1.0 + 1e-12)) {
        return Err(Error::Violation(format!("piece {} of the splitting has Q = {v} > theta = {theta}", i + 1)));
    }
    Ok(Splitting { breakpoints, theta, piece_values })
}

/// Largest sampled `Q(s,u) + Q(u,t) − Q(s,t)` over `lo ≤ s < u < t ≤ hi`.
///
/// A quarter of the middle points are drawn from `special_points`.
pub fn check_superadditive<Q: SuperadditiveFn + ?Sized>(
    q: &Q,
    lo: f64,
    hi: f64,
    samples: usize,
    rng: &mut RngStream,
) -> f64 {
    let specials: Vec<f64> = q.special_points().into_iter().filter(|p| lo < *p && *p < hi).collect();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..samples {
        let u =
            if !specials.is_empty() && i % 4 == 0 { specials[rng.index(specials.len())] } else { rng.uniform(lo, hi) };
        let s = rng.uniform(lo, u);
        let t = rng.uniform(u, hi);
        if !(s < u && u < t) {
            continue;
        }
        worst = worst.max(q.q(s, u) + q.q(u, t) - q.q(s, t));
    }
    worst
}

/// Checks that `t ↦ Q(s,t)` is non-decreasing and `s ↦ Q(s,t)` non-increasing
/// on a grid of `n` points in `[lo, hi]`.
pub fn check_monotone<Q: SuperadditiveFn + ?Sized>(q: &Q, lo: f64, hi: f64, n: usize) -> bool {
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    for &s in &grid {
        let mut prev = 0.0;
        for &t in grid.iter().filter(|&&t| t > s) {
            let v = q.q(s, t);
            if v < prev {
                return false;
            }
            prev = v;
        }
    }
    for &t in &grid {
        let mut prev = f64::INFINITY;
        for &s in grid.iter().filter(|&&s| s < t) {
            let v = q.q(s, t);
            if v > prev {
                return false;
            }
            prev = v;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(SuperadditiveQ::linear(2.0).eval(0.0, 3.0), 6.0);
        let d = SuperadditiveQ::atoms(&[(0.5, 1.0)], IntervalConvention::Open);
        assert_eq!(d.eval(0.0, 1.0), 1.0);
        assert_eq!(d.eval(0.5, 1.0), 0.0);
        assert_eq!(d.eval(1.0, 0.0), 0.0);
        let c = SuperadditiveQ::Composite { parts: vec![SuperadditiveQ::linear(1.0), d] };
        assert_eq!(c.eval(0.0, 1.0), 2.0);
    }

    #[test]
    fn regularize_examples() {
        let half = SuperadditiveQ::atoms(&[(0.5, 1.0)], IntervalConvention::HalfOpenLeftClosed);
        assert_eq!(half.eval(0.5, 1.0), 1.0);
        let reg = half.regularize();
        assert_eq!(reg.eval(0.5, 1.0), 0.0);
        assert_eq!(reg.regularize(), reg);
        let lin = SuperadditiveQ::linear(3.0);
        assert_eq!(lin.regularize(), lin);
        // Q⁻(s,t) = lim Q(s+h, t−h)
        for h in [1e-3, 1e-6, 1e-9] {
            assert_eq!(half.eval(0.5 + h, 1.0 - h), reg.eval(0.5, 1.0));
        }
    }

    #[test]
    fn split_examples() {
        let sp = split(&SuperadditiveQ::linear(1.0), 0.0, 1.0, 0.25).unwrap();
        assert_eq!(sp.breakpoints, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let two = SuperadditiveQ::atoms(&[(1.0 / 3.0, 1.0), (2.0 / 3.0, 1.0)], IntervalConvention::Open);
        let sp = split(&two, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(sp.breakpoints, vec![0.0, 1.0 / 3.0, 1.0]);
        assert_eq!(sp.piece_values, vec![0.0, 1.0]);
        let zero = SuperadditiveQ::atoms(&[(5.0, 1.0)], IntervalConvention::Open);
        assert_eq!(split(&zero, 0.0, 1.0, 0.1).unwrap().breakpoints, vec![0.0, 1.0]);
        let half = SuperadditiveQ::atoms(&[(0.5, 1.0)], IntervalConvention::HalfOpenLeftClosed);
        assert!(split(&half, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn heavy_atom_repeats_breakpoint() {
        let q = SuperadditiveQ::atoms(&[(0.5, 3.0)], IntervalConvention::Open);
        let sp = split(&q, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(sp.breakpoints, vec![0.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn superadditivity_checks() {
        let mut rng = RngStream::new(1, 0);
        assert!(check_superadditive(&SuperadditiveQ::linear(2.0), 0.0, 1.0, 1000, &mut rng) <= 1e-14);
        let atoms = SuperadditiveQ::atoms(&[(0.3, 1.0), (0.6, 0.5)], IntervalConvention::Open);
        let v = check_superadditive(&atoms, 0.0, 1.0, 1000, &mut rng);
        assert!(v <= 0.0);
        // An atom at the sampled u is dropped by both open pieces.
        assert_eq!(atoms.eval(0.0, 0.3) + atoms.eval(0.3, 1.0) - atoms.eval(0.0, 1.0), -1.0);
        let sqrt = Opaque(|s: f64, t: f64| (t - s).sqrt());
        assert!(check_superadditive(&sqrt, 0.0, 1.0, 1000, &mut rng) > 0.0);
    }

    #[test]
    fn linear_subadditivity_analogue() {
        let q = SuperadditiveQ::linear(0.7);
        for (t, h) in [(3.0, 1.0), (0.5, 2.0), (10.0, 0.1)] {
            assert!(q.eval(0.0, t) <= q.eval(0.0, h) * (1.0 + t / h) + 1e-12);
        }
    }

    #[test]
    fn serde_round_trip() {
        let q = SuperadditiveQ::Composite {
            parts: vec![
                SuperadditiveQ::linear(0.5),
                SuperadditiveQ::Measure {
                    atoms: vec![Atom { location: 0.2, mass: 1.5 }],
                    density: StepDensity { breaks: vec![0.0, 0.5, 1.0], values: vec![1.0, 2.0] },
                    convention: IntervalConvention::HalfOpenLeftClosed,
                },
            ],
        };
        let json = serde_json::to_string(&q).unwrap();
        assert!(json.contains("\"variant\":\"composite\""));
        let back: SuperadditiveQ = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<SuperadditiveQ>(r#"{"variant":"linear","beta":1,"gamma":2}"#).is_err());
    }

    fn arb_q() -> impl Strategy<Value = SuperadditiveQ> {
        let linear = (0.0f64..3.0).prop_map(SuperadditiveQ::linear);
        let atomic = prop::collection::vec((0.0f64..1.0, 0.01f64..2.0), 1..6)
            .prop_map(|a| SuperadditiveQ::atoms(&a, IntervalConvention::Open));
        let density = (prop::collection::vec(0.0f64..3.0, 1..5), 0.0f64..0.3).prop_map(|(values, start)| {
            let n = values.len();
            SuperadditiveQ::Measure {
                atoms: vec![],
                density: StepDensity { breaks: (0..=n).map(|i| start + i as f64 * 0.7 / n as f64).collect(), values },
                convention: IntervalConvention::Open,
            }
        });
        let leaf = prop_oneof![linear, atomic, density];
        prop::collection::vec(leaf, 1..4).prop_map(|parts| {
            if parts.len() == 1 {
                parts.into_iter().next().unwrap()
            } else {
                SuperadditiveQ::Composite { parts }
            }
        })
    }

    proptest! {
        #[test]
        fn split_contract(q in arb_q(), s in -0.2f64..0.5, len in 0.01f64..1.5, theta in 0.05f64..2.0) {
            let t = s + len;
            let sp = split(&q, s, t, theta).unwrap();
            prop_assert_eq!(sp.breakpoints[0], s);
            prop_assert_eq!(*sp.breakpoints.last().unwrap(), t);
            prop_assert!(sp.breakpoints.windows(2).all(|w| w[0] <= w[1]));
            for w in sp.breakpoints.windows(2) {
                prop_assert!(q.eval(w[0], w[1]) <= theta * (1.0 + 1e-12));
            }
            let total = q.eval(s, t);
            let k = if total == 0.0 { 1 } else { (total / theta).ceil() as usize };
            prop_assert_eq!(sp.k(), k);
        }

        #[test]
        fn regularized_is_below_and_superadditive(q in arb_q(), half in any::<bool>(), seed: u64) {
            let q = if half {
                match q {
                    SuperadditiveQ::Measure { atoms, density, .. } => SuperadditiveQ::Measure {
                        atoms, density, convention: IntervalConvention::HalfOpenLeftClosed,
                    },
                    other => other,
                }
            } else { q };
            let reg = q.regularize();
            prop_assert_eq!(reg.regularize(), reg.clone());
            let mut rng = RngStream::new(seed, 0);
            for _ in 0..200 {
                let s = rng.uniform(-0.5, 1.5);
                let t = rng.uniform(s, 1.6);
                prop_assert!(reg.eval(s, t) <= q.eval(s, t) + 1e-12);
            }
            prop_assert!(check_superadditive(&reg, -0.5, 1.5, 500, &mut rng) <= 1e-12);
            prop_assert!(check_superadditive(&q, -0.5, 1.5, 500, &mut rng) <= 1e-12);
            prop_assert!(check_monotone(&reg, -0.5, 1.5, 40));
        }
    }
}
