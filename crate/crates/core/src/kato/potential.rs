//! Catalog of nonnegative potentials `q(u, z)` on space-time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nonnegative scalar function of one real variable (a time `u` or a radius
/// `r = |z|`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `coef·|x|^exponent`
    Power {
        coef: f64,
        exponent: f64,
    },
    /// `coef·exp(−(x/width)²)`
    Gaussian {
        coef: f64,
        width: f64,
    },
    /// `coef·exp(rate·x)`
    Exponential {
        coef: f64,
        rate: f64,
    },
    /// `values[i]` on `[breaks[i], breaks[i+1])`, zero elsewhere.
    Step {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Profile::Constant { value } => *value >= 0.0 && value.is_finite(),
            Profile::Power { coef, exponent } => *coef >= 0.0 && coef.is_finite() && exponent.is_finite(),
            Profile::Gaussian { coef, width } => *coef >= 0.0 && coef.is_finite() && *width > 0.0,
            Profile::Exponential { coef, rate } => *coef >= 0.0 && coef.is_finite() && rate.is_finite(),
            Profile::Step { breaks, values } => {
                breaks.len() == values.len() + 1
                    && breaks.windows(2).all(|w| w[0] < w[1])
                    && breaks.iter().all(|b| b.is_finite())
                    && values.iter().all(|v| *v >= 0.0 && v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid profile {self:?}")))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Power { coef, exponent } => {
                if *coef == 0.0 {
                    0.0
                } else {
                    coef * x.abs().powf(*exponent)
                }
            }
            Profile::Gaussian { coef, width } => coef * (-(x / width).powi(2)).exp(),
            Profile::Exponential { coef, rate } => coef * (rate * x).exp(),
            Profile::Step { breaks, values } => match breaks.iter().rposition(|b| *b <= x) {
                Some(i) if i < values.len() => values[i],
                _ => 0.0,
            },
        }
    }

    /// `∫_lo^hi` in closed form (may be `+∞` for non-integrable powers).
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        match self {
            Profile::Constant { value } => value * (hi - lo),
            Profile::Power { coef, exponent } => {
                if *coef == 0.0 {
                    return 0.0;
                }
                let p1 = exponent + 1.0;
                let prim = |x: f64| -> f64 {
                    if p1 <= 0.0 {
                        f64::INFINITY
                    } else {
                        x.powf(p1) / p1
                    }
                };
                let part = |a: f64, b: f64| -> f64 {
                    if b <= a {
                        0.0
                    } else if a == 0.0 {
                        prim(b)
                    } else if p1 == 0.0 {
                        (b / a).ln()
                    } else {
                        (b.powf(p1) - a.powf(p1)) / p1
                    }
                };
                let v = if lo >= 0.0 {
                    part(lo, hi)
                } else if hi <= 0.0 {
                    part(-hi, -lo)
                } else {
                    part(0.0, -lo) + part(0.0, hi)
                };
                coef * v
            }
            Profile::Gaussian { coef, width } => {
                coef * width * std::f64::consts::PI.sqrt() * 0.5 * (libm::erf(hi / width) - libm::erf(lo / width))
            }
            Profile::Exponential { coef, rate } => {
                if *rate == 0.0 {
                    coef * (hi - lo)
                } else {
                    coef * ((rate * hi).exp() - (rate * lo).exp()) / rate
                }
            }
            Profile::Step { breaks, values } => values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let a = breaks[i].max(lo);
                    let b = breaks[i + 1].min(hi);
                    if b > a {
                        v * (b - a)
                    } else {
                        0.0
                    }
                })
                .sum(),
        }
    }

    /// `sup_{lo ≤ x ≤ hi}`, possibly `+∞`.
    pub fn sup_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Power { coef, exponent } => {
                if *coef == 0.0 {
                    return 0.0;
                }
                let amax = lo.abs().max(hi.abs());
                let amin = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
                if *exponent >= 0.0 {
                    coef * amax.powf(*exponent)
                } else {
                    coef * amin.powf(*exponent)
                }
            }
            Profile::Gaussian { coef, .. } => {
                if lo <= 0.0 && hi >= 0.0 {
                    *coef
                } else {
                    self.eval(lo).max(self.eval(hi))
                }
            }
            Profile::Exponential { .. } => self.eval(lo).max(self.eval(hi)),
            Profile::Step { breaks, values } => values
                .iter()
                .enumerate()
                .filter(|(i, _)| breaks[*i] <= hi && breaks[i + 1] > lo)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max),
        }
    }

    /// Whether `r ↦ f(r)` is non-increasing on `[0, ∞)`.
    pub fn is_radially_nonincreasing(&self) -> bool {
        match self {
            Profile::Constant { .. } | Profile::Gaussian { .. } => true,
            Profile::Power { coef, exponent } => *coef == 0.0 || *exponent <= 0.0,
            Profile::Exponential { coef, rate } => *coef == 0.0 || *rate <= 0.0,
            Profile::Step { breaks, values } => {
                (breaks[0] <= 0.0 || values.iter().all(|v| *v == 0.0)) && values.windows(2).all(|w| w[0] >= w[1])
            }
        }
    }

    /// The profile `x ↦ f(−x)`.
    pub fn reflected(&self) -> Profile {
        match self {
            Profile::Exponential { coef, rate } => Profile::Exponential { coef: *coef, rate: -rate },
            Profile::Step { breaks, values } => Profile::Step {
                breaks: breaks.iter().rev().map(|b| -b).collect(),
                values: values.iter().rev().copied().collect(),
            },
            other => other.clone(),
        }
    }

    /// Support as a closed interval, when bounded.
    fn support(&self) -> Option<(f64, f64)> {
        match self {
            Profile::Step { breaks, .. } => Some((breaks[0], *breaks.last().unwrap())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    Constant {
        q0: f64,
    },
    /// `f(u)` on the optional time window, zero outside it.
    TimeOnly {
        f: Profile,
        #[serde(default)]
        window: Option<[f64; 2]>,
    },
    /// `U(|z|)` for `|z| < cutoff`.
    Radial {
        u: Profile,
        #[serde(default)]
        cutoff: Option<f64>,
    },
    /// `f(u)·U(|z|)`.
    Separable {
        f: Profile,
        #[serde(default)]
        window: Option<[f64; 2]>,
        u: Profile,
        #[serde(default)]
        cutoff: Option<f64>,
    },
    /// `Σ_{n=2}^{n_max} n|z − n z₁|^{−1} 1_{B(n z₁, 1/n)}(z)` with `z₁ = direction`.
    IndicatorSum {
        direction: Vec<f64>,
        n_max: usize,
    },
}

/// A potential together with the space dimension it lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub d: usize,
    #[serde(flatten)]
    pub kind: PotentialKind,
}

impl Potential {
    pub fn new(d: usize, kind: PotentialKind) -> Result<Self> {
        let p = Potential { d, kind };
        p.validate()?;
        Ok(p)
    }

    pub fn zero(d: usize) -> Self {
        Potential { d, kind: PotentialKind::Zero }
    }

    pub fn constant(d: usize, q0: f64) -> Result<Self> {
        Self::new(d, PotentialKind::Constant { q0 })
    }

    pub fn indicator_sum(d: usize, n_max: usize) -> Result<Self> {
        let mut direction = vec![0.0; d];
        if d > 0 {
            direction[0] = 1.0;
        }
        Self::new(d, PotentialKind::IndicatorSum { direction, n_max })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        let check_cut = |c: &Option<f64>| match c {
            Some(c) if !(*c > 0.0) => Err(Error::param("cutoff must be positive")),
            _ => Ok(()),
        };
        let check_window = |w: &Option<[f64; 2]>| match w {
            Some([a, b]) if !(a < b) => Err(Error::param("time window must be increasing")),
            _ => Ok(()),
        };
        match &self.kind {
            PotentialKind::Zero => Ok(()),
            PotentialKind::Constant { q0 } => {
                if *q0 >= 0.0 && q0.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("constant potential must be finite and nonnegative"))
                }
            }
            PotentialKind::TimeOnly { f, window } => {
                check_window(window)?;
                f.validate()
            }
            PotentialKind::Radial { u, cutoff } => {
                check_cut(cutoff)?;
                u.validate()
            }
            PotentialKind::Separable { f, window, u, cutoff } => {
                check_window(window)?;
                check_cut(cutoff)?;
                f.validate()?;
                u.validate()
            }
            PotentialKind::IndicatorSum { direction, n_max } => {
                if direction.len() != self.d {
                    return Err(Error::param("direction length must equal d"));
                }
                let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::param("direction must be a unit vector"));
                }
                if *n_max < 2 {
                    return Err(Error::param("indicator_sum needs n_max >= 2"));
                }
                Ok(())
            }
        }
    }

    pub fn is_time_independent(&self) -> bool {
        !matches!(self.kind, PotentialKind::TimeOnly { .. } | PotentialKind::Separable { .. })
    }

    /// Time factor `f(u)` (1 for time-independent variants).
    pub fn time_factor(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::TimeOnly { f, window } | PotentialKind::Separable { f, window, .. } => match window {
                Some([a, b]) if u < *a || u >= *b => 0.0,
                _ => f.eval(u),
            },
            _ => 1.0,
        }
    }

    /// Radial factor `U(r)` for the variants that have one.
    pub fn radial_factor(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Radial { u, cutoff } | PotentialKind::Separable { u, cutoff, .. } => match cutoff {
                Some(c) if r >= *c => 0.0,
                _ => u.eval(r),
            },
            _ => 1.0,
        }
    }

    pub fn space_factor(&self, z: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant { q0 } => *q0,
            PotentialKind::TimeOnly { .. } => 1.0,
            PotentialKind::Radial { .. } | PotentialKind::Separable { .. } => {
                self.radial_factor(z.iter().map(|v| v * v).sum::<f64>().sqrt())
            }
            PotentialKind::IndicatorSum { direction, n_max } => {
                let along: f64 = z.iter().zip(direction).map(|(a, b)| a * b).sum();
                let n = along.round();
                if n < 2.0 || n > *n_max as f64 {
                    return 0.0;
                }
                let r = z.iter().zip(direction).map(|(a, b)| (a - n * b).powi(2)).sum::<f64>().sqrt();
                if r < 1.0 / n {
                    n / r
                } else {
                    0.0
                }
            }
        }
    }

    pub fn eval(&self, u: f64, z: &[f64]) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            _ => self.time_factor(u) * self.space_factor(z),
        }
    }

    /// Upper bound for `q` on `[s,t] × ℝ^d`, `+∞` when unbounded.
    pub fn sup_bound(&self, s: f64, t: f64) -> f64 {
        let time_sup = |f: &Profile, window: &Option<[f64; 2]>| match window {
            Some([a, b]) => {
                let (lo, hi) = (s.max(*a), t.min(*b));
                if lo > hi {
                    0.0
                } else {
                    f.sup_on(lo, hi)
                }
            }
            None => f.sup_on(s, t),
        };
        let radial_sup = |u: &Profile, cutoff: &Option<f64>| u.sup_on(0.0, cutoff.unwrap_or(f64::INFINITY));
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant { q0 } => *q0,
            PotentialKind::TimeOnly { f, window } => time_sup(f, window),
            PotentialKind::Radial { u, cutoff } => radial_sup(u, cutoff),
            PotentialKind::Separable { f, window, u, cutoff } => {
                let ts = time_sup(f, window);
                if ts == 0.0 {
                    0.0
                } else {
                    ts * radial_sup(u, cutoff)
                }
            }
            PotentialKind::IndicatorSum { .. } => f64::INFINITY,
        }
    }

    /// `∫_s^t f(u) du` for potentials that do not depend on space.
    pub fn time_integral(&self, s: f64, t: f64) -> Option<f64> {
        match &self.kind {
            PotentialKind::Zero => Some(0.0),
            PotentialKind::Constant { q0 } => Some(q0 * (t - s).max(0.0)),
            PotentialKind::TimeOnly { f, window } => {
                let (lo, hi) = match window {
                    Some([a, b]) => (s.max(*a), t.min(*b)),
                    None => (s, t),
                };
                Some(f.integral(lo, hi))
            }
            _ => None,
        }
    }

    /// The potential `(u, z) ↦ q(−u, z)`.
    pub fn time_reversed(&self) -> Potential {
        let flip = |w: &Option<[f64; 2]>| w.map(|[a, b]| [-b, -a]);
        let kind = match &self.kind {
            PotentialKind::TimeOnly { f, window } => PotentialKind::TimeOnly { f: f.reflected(), window: flip(window) },
            PotentialKind::Separable { f, window, u, cutoff } => {
                PotentialKind::Separable { f: f.reflected(), window: flip(window), u: u.clone(), cutoff: *cutoff }
            }
            other => other.clone(),
        };
        Potential { d: self.d, kind }
    }

    /// Whether `q(u, z)` does not depend on `z`.
    pub fn is_spatially_constant(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero | PotentialKind::Constant { .. } | PotentialKind::TimeOnly { .. })
    }

    /// Time points where the time factor may fail to be smooth.
    pub(crate) fn time_breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let PotentialKind::TimeOnly { f, window } | PotentialKind::Separable { f, window, .. } = &self.kind {
            if let Some([a, b]) = window {
                out.extend([*a, *b]);
            }
            match f {
                Profile::Step { breaks, .. } => out.extend(breaks.iter().copied()),
                Profile::Power { .. } => out.push(0.0),
                _ => {}
            }
        }
        out
    }

    /// Time interval outside which the time factor vanishes, when bounded.
    pub(crate) fn time_support(&self) -> Option<(f64, f64)> {
        match &self.kind {
            PotentialKind::TimeOnly { f, window } | PotentialKind::Separable { f, window, .. } => {
                match (window, f.support()) {
                    (Some([a, b]), Some((c, e))) => Some((a.max(c), b.min(e))),
                    (Some([a, b]), None) => Some((*a, *b)),
                    (None, s) => s,
                }
            }
            _ => None,
        }
    }
}
