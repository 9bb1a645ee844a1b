use gausspert_core::bounds::{sample_design, thm_new_pipeline, verify_membership};
use gausspert_core::fourg::{
    compute_l, compute_m, four_g_sides, gap_sup_search, sampling_suite, tightness_witness, witness_to_config,
};
use gausspert_core::kato::{c1, heat_potential, heat_potential_closed, kato_i, lhs_psup};
use gausspert_core::kernels::{ck_integral, normalization_quadrature, three_g_failure, three_g_radius};
use gausspert_core::series::{feynman_kac_mc, tilde_p};
use gausspert_core::superadd::{split, IntervalConvention};
use gausspert_core::{Engine, Error, GaussianKernel, Result, RngStream, SeriesRequest, SeriesResult};
use serde_json::{json, Value};

use crate::args::{BoundArgs, EngineChoice, FourgArgs, KatoArgs, KernelArgs, SeriesArgs, SplitArgs, VerifyArgs};
use crate::report::{join, Report, Settings, Table};
use crate::specs;

fn point(v: &[f64], d: usize, name: &str) -> Result<Vec<f64>> {
    match v.len() {
        0 => Ok(vec![0.0; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(Error::InvalidParameter(format!("--{name} has {n} coordinates, expected {d}"))),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn l_source(alpha: f64) -> &'static str {
    if alpha >= 0.5f64.exp() {
        "closed form ln(1+alpha)"
    } else {
        "numerical minimisation over tau"
    }
}

pub fn fourg(args: &FourgArgs, st: &Settings) -> Result<Report> {
    let mut rng = RngStream::new(st.seed, 1);
    if let Some(alpha) = args.alpha {
        let l = compute_l(alpha)?;
        let witness = tightness_witness(alpha)?;
        let sup = gap_sup_search(alpha, l.l, args.starts, &mut rng);
        return Ok(Report::new(json!({ "L": l, "witness": witness, "sup_search": sup })).source("L", l_source(alpha)));
    }
    let (Some(a), Some(b), Some(d)) = (args.a, args.b, args.d) else {
        return Err(Error::InvalidParameter("give --alpha or all of --a, --b, --d".into()));
    };
    let c = compute_m(a, b, d)?;
    let witness = tightness_witness(c.alpha)?;
    let sup = gap_sup_search(c.alpha, c.l, args.starts, &mut rng);
    let cfg = witness_to_config(a, d, &witness.point, 1.0);
    let at_m = four_g_sides(a, b, b - a, d, c.m, &cfg)?;
    let at_scaled = four_g_sides(a, b, b - a, d, 0.99 * c.m, &cfg)?;
    let sampling =
        if args.samples > 0 { Some(sampling_suite(a, b, d, c.m, args.samples, &rng.substream(1))?) } else { None };
    let result = json!({
        "constants": c,
        "witness": witness,
        "sup_search": sup,
        "optimality": {
            "config": cfg,
            "log_ratio_at_M": at_m.log_ratio(),
            "holds_at_M": at_m.holds,
            "log_ratio_at_0.99M": at_scaled.log_ratio(),
            "holds_at_0.99M": at_scaled.holds,
        },
        "sampling": sampling,
    });
    let m_source = if c.simple_formula.is_some() { "closed form (1-a/b)^-d" } else { "computed from L(alpha)" };
    Ok(Report::new(result).source("L", l_source(c.alpha)).source("M", m_source))
}

pub fn kernel(args: &KernelArgs, st: &Settings) -> Result<Report> {
    let k = GaussianKernel::new(args.a, args.d)?;
    let x = point(&args.x, args.d, "x")?;
    let y = point(&args.y, args.d, "y")?;
    if !(args.s < args.t) {
        return Err(Error::InvalidParameter("need s < t".into()));
    }
    let u = args.u.unwrap_or(0.5 * (args.s + args.t));
    let density = k.eval(args.s, &x, args.t, &y);
    let ck = ck_integral(&k, args.s, u, args.t, &x, &y, &st.quad)?;
    let norm = normalization_quadrature(&k, args.s, &x, args.t, &st.quad)?;
    let three_g = if args.three_g {
        let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let ratio = three_g_failure(args.a, args.d, args.t - args.s, &diff)?;
        let radius = three_g_radius(args.a, args.d, args.t - args.s, args.level);
        Some(json!({ "ratio": ratio, "level": args.level, "radius_at_level": radius }))
    } else {
        None
    };
    let result = json!({
        "density": density,
        "normalization": norm,
        "chapman_kolmogorov": { "u": u, "integral": ck, "residual": (ck - density).abs() },
        "three_g": three_g,
    });
    Ok(Report::new(result).source("density", "closed form").source("normalization", "adaptive quadrature"))
}

pub fn kato(args: &KatoArgs, st: &Settings) -> Result<Report> {
    let rng = RngStream::new(st.seed, 2);
    if args.heat_potential {
        let mut x = point(&args.x, args.d, "x")?;
        if args.x.is_empty() {
            x[args.d - 1] = args.r;
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let quad = heat_potential(args.c, args.d, &x, &st.quad)?;
        let closed = heat_potential_closed(args.c, args.d, r)?;
        let result = json!({
            "x": x,
            "quadrature": quad,
            "closed_form": closed,
            "relative_error": (quad - closed).abs() / closed,
        });
        return Ok(Report::new(result)
            .source("closed_form", "c c0(d) |x|^(2-d)")
            .source("quadrature", "adaptive quadrature in time"));
    }
    let spec = args
        .potential
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("give --heat-potential or --potential".into()))?;
    let pot = specs::potential(spec, args.d)?;
    let mut out = serde_json::Map::new();
    if let Some(delta) = args.delta {
        out.insert("kato_i".into(), to_value(&kato_i(&pot, delta, &st.quad, &rng)?));
    }
    if let Some(h) = args.h {
        let i = kato_i(&pot, h.sqrt(), &st.quad, &rng.substream(1))?;
        let lhs = lhs_psup(&pot, args.c, h, &st.quad, &rng.substream(2))?;
        let c1 = c1(pot.d, args.c)?;
        out.insert(
            "kato_bound".into(),
            json!({ "h": h, "lhs_psup": lhs, "C1": c1, "I_sqrt_h": i, "rhs": c1 * i.value, "holds": lhs <= c1 * i.value }),
        );
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("give --delta and/or --h with --potential".into()));
    }
    Ok(Report::new(Value::Object(out)).source("C1", "closed form").source("I", "quadrature over candidate centres"))
}

fn series_rows(label: &str, r: &SeriesResult, rows: &mut Vec<Vec<String>>) {
    for (n, (term, sum)) in r.terms.iter().zip(&r.partial_sums).enumerate() {
        rows.push(vec![label.to_string(), n.to_string(), term.to_string(), sum.to_string()]);
    }
}

pub fn series(args: &SeriesArgs, st: &Settings) -> Result<Report> {
    let q = specs::potential(&args.potential, args.d)?;
    let d = q.d;
    let k = GaussianKernel::new(args.b, d)?;
    let mut req = SeriesRequest::new(k, q, args.s, point(&args.x, d, "x")?, args.t, point(&args.y, d, "y")?);
    req.n_terms = args.n_terms;
    req.cfg = st.quad;
    req.grid = st.grid;
    req.mc_paths = args.paths;
    req.mc_steps = args.steps;
    req.rng = RngStream::new(st.seed, 3);
    let mut rows = Vec::new();
    let grid = if args.engine != EngineChoice::MonteCarlo {
        req.engine = Engine::GridRecursion;
        let r = tilde_p(&req, None)?;
        series_rows("grid_recursion", &r, &mut rows);
        Some(r)
    } else {
        None
    };
    let mc = if args.engine != EngineChoice::GridRecursion {
        req.engine = Engine::MonteCarlo;
        let r = feynman_kac_mc(&req)?;
        series_rows("monte_carlo", &r, &mut rows);
        Some(r)
    } else {
        None
    };
    let agreement = match (&grid, &mc) {
        (Some(g), Some(m)) => m.mc_std_error.map(|se| (g.value - m.value).abs() / se),
        _ => None,
    };
    let result = json!({ "grid_recursion": grid, "monte_carlo": mc, "difference_in_std_errors": agreement });
    Ok(Report::new(result)
        .source("p", "closed form")
        .source("terms", "computed")
        .with_table(Table { header: vec!["engine", "n", "term", "partial_sum"], rows }))
}

pub fn bound(args: &BoundArgs, st: &Settings) -> Result<Report> {
    let rng = RngStream::new(st.seed, 4);
    let pot = args.potential.as_deref().map(|p| specs::potential(p, args.d)).transpose()?;
    let (i, i_source) = match (args.i, &pot) {
        (Some(i), _) => (i, "supplied"),
        (None, Some(pot)) => (kato_i(pot, args.h.sqrt(), &st.quad, &rng)?.value, "computed from the potential"),
        (None, None) => return Err(Error::InvalidParameter("give --i or --potential".into())),
    };
    let cert = thm_new_pipeline(args.lambda_cap, args.lambda, args.b, args.a, args.h, args.d, i, args.horizon)?;
    let mut report = Report::new(json!({ "I_sqrt_h": i, "certificate": cert }))
        .source("I_sqrt_h", i_source)
        .source("C", "closed form Lambda (b/a)^(d/2)")
        .source("eta", "closed form Lambda b c0(d) M I")
        .source("eps", "numerical minimisation of the bound factor");
    if !args.compare {
        return Ok(report);
    }
    let pot = pot.ok_or_else(|| Error::InvalidParameter("--compare needs --potential".into()))?;
    let k = GaussianKernel::new(args.b, args.d)?;
    let mut draw = rng.substream(1);
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for pt in sample_design(args.d, args.samples, &mut draw) {
        let mut req = SeriesRequest::new(k, pot.clone(), pt.s, pt.x.clone(), pt.t, pt.y.clone());
        req.cfg = st.quad;
        req.grid = st.grid;
        let tail = cert.tail_certificate(pt.s, &pt.x, pt.t, &pt.y)?;
        let series = tilde_p(&req, Some(&tail))?.value;
        let bound = cert.bound(pt.s, &pt.x, pt.t, &pt.y)?;
        let ratio = bound / series;
        if !(ratio >= 1.0) {
            return Err(Error::Violation(format!(
                "series {series:e} exceeds bound {bound:e} at s={}, x={:?}, t={}, y={:?}",
                pt.s, pt.x, pt.t, pt.y
            )));
        }
        rows.push(vec![
            pt.s.to_string(),
            join(&pt.x),
            pt.t.to_string(),
            join(&pt.y),
            series.to_string(),
            bound.to_string(),
            ratio.to_string(),
        ]);
        table.push(json!({ "point": pt, "series": series, "bound": bound, "ratio": ratio }));
    }
    if let Value::Object(m) = &mut report.result {
        m.insert("comparison".into(), Value::Array(table));
    }
    Ok(report.with_table(Table { header: vec!["s", "x", "t", "y", "series", "bound", "ratio"], rows }))
}

pub fn split_cmd(args: &SplitArgs, _st: &Settings) -> Result<Report> {
    let conv = if args.half_open { IntervalConvention::HalfOpenLeftClosed } else { IntervalConvention::Open };
    let mut q = specs::superadditive(&args.q, conv)?;
    if args.regularize {
        q = q.regularize();
    }
    let sp = split(&q, args.s, args.t, args.theta)?;
    let rows = sp
        .breakpoints
        .windows(2)
        .zip(&sp.piece_values)
        .enumerate()
        .map(|(i, (w, v))| vec![(i + 1).to_string(), w[0].to_string(), w[1].to_string(), v.to_string()])
        .collect();
    let result = json!({ "Q": q, "k": sp.k(), "splitting": sp });
    Ok(Report::new(result)
        .source("breakpoints", "generalised inverse of u -> Q(s,u)")
        .with_table(Table { header: vec!["piece", "lo", "hi", "Q"], rows }))
}

pub fn verify(args: &VerifyArgs, st: &Settings) -> Result<Report> {
    let rng = RngStream::new(st.seed, 5);
    let q = specs::potential(&args.potential, args.d)?;
    let d = q.d;
    let mut big_q = specs::superadditive(&args.big_q, IntervalConvention::Open)?;
    let mut eta = args.eta;
    if let Some(l) = args.lambda_cap {
        if !(l >= 1.0) {
            return Err(Error::InvalidParameter("--lambda-cap must be at least 1".into()));
        }
        eta /= l;
        big_q = specs::scale(&big_q, 1.0 / l);
    }
    let kb = GaussianKernel::new(args.b, d)?;
    let ka = GaussianKernel::new(args.a, d)?;
    let samples = sample_design(d, args.samples, &mut rng.substream(1));
    let m = verify_membership(&kb, &ka, &q, eta, &big_q, &samples, &st.quad, &rng.substream(2))?;
    let rows = m
        .verified_at
        .iter()
        .map(|smp| {
            let p = &smp.point;
            vec![
                p.s.to_string(),
                join(&p.x),
                p.t.to_string(),
                join(&p.y),
                smp.lhs.to_string(),
                smp.lhs_err.to_string(),
                smp.rhs.to_string(),
            ]
        })
        .collect();
    Ok(Report::new(json!({ "rescaled_by": args.lambda_cap, "membership": m }))
        .source("C", "closed form (b/a)^(d/2)")
        .source("lhs", format!("{:?} integration in space, adaptive in time", m.method))
        .with_table(Table { header: vec!["s", "x", "t", "y", "lhs", "lhs_err", "rhs"], rows }))
}
