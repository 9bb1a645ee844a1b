//! Short textual forms of potentials and superadditive functions.

use gausspert_core::superadd::IntervalConvention;
use gausspert_core::{Error, Potential, PotentialKind, Profile, Result, SuperadditiveQ};

fn numbers(body: &str, what: &str) -> Result<Vec<f64>> {
    body.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number {v:?} in {what}"))))
        .collect()
}

pub fn potential(spec: &str, d: usize) -> Result<Potential> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        let p: Potential =
            serde_json::from_str(spec).map_err(|e| Error::InvalidParameter(format!("potential JSON: {e}")))?;
        p.validate()?;
        return Ok(p);
    }
    let (head, body) = spec.split_once(':').unwrap_or((spec, ""));
    match (head, numbers(body, spec).ok().as_deref()) {
        ("zero", _) => Ok(Potential::zero(d)),
        ("constant", Some(&[q0])) => Potential::constant(d, q0),
        ("gaussian", Some(&[coef, width])) => {
            Potential::new(d, PotentialKind::Radial { u: Profile::Gaussian { coef, width }, cutoff: None })
        }
        ("indicator", Some(&[n])) if n >= 2.0 && n.fract() == 0.0 => Potential::indicator_sum(d, n as usize),
        _ => Err(Error::InvalidParameter(format!(
            "unknown potential {spec:?}; use zero, constant:Q0, gaussian:COEF,WIDTH, indicator:NMAX or a JSON object"
        ))),
    }
}

pub fn superadditive(spec: &str, convention: IntervalConvention) -> Result<SuperadditiveQ> {
    let spec = spec.trim();
    let q = if spec.starts_with('{') {
        serde_json::from_str(spec).map_err(|e| Error::InvalidParameter(format!("Q JSON: {e}")))?
    } else if let Some(body) = spec.strip_prefix("linear:") {
        match numbers(body, spec)?.as_slice() {
            &[beta] => SuperadditiveQ::linear(beta),
            _ => return Err(Error::InvalidParameter(format!("linear needs one slope, got {spec:?}"))),
        }
    } else if let Some(body) = spec.strip_prefix("atoms:") {
        let atoms = body
            .split(';')
            .map(|a| {
                let (loc, mass) =
                    a.split_once('@').ok_or_else(|| Error::InvalidParameter(format!("atom {a:?} is not LOC@MASS")))?;
                Ok((numbers(loc, spec)?[0], numbers(mass, spec)?[0]))
            })
            .collect::<Result<Vec<_>>>()?;
        SuperadditiveQ::atoms(&atoms, convention)
    } else {
        return Err(Error::InvalidParameter(format!(
            "unknown Q {spec:?}; use linear:BETA, atoms:LOC@MASS;… or a JSON object"
        )));
    };
    q.validate()?;
    Ok(q)
}

/// `Q / Λ`.
pub fn scale(q: &SuperadditiveQ, by: f64) -> SuperadditiveQ {
    match q {
        SuperadditiveQ::Linear { beta } => SuperadditiveQ::Linear { beta: beta * by },
        SuperadditiveQ::Measure { atoms, density, convention } => {
            let mut atoms = atoms.clone();
            atoms.iter_mut().for_each(|a| a.mass *= by);
            let mut density = density.clone();
            density.values.iter_mut().for_each(|v| *v *= by);
            SuperadditiveQ::Measure { atoms, density, convention: *convention }
        }
        SuperadditiveQ::Composite { parts } => {
            SuperadditiveQ::Composite { parts: parts.iter().map(|p| scale(p, by)).collect() }
        }
    }
}
