use std::f64::consts::PI;
use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn gausspert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gausspert")).args(args).env_remove("GAUSSPERT_SEED").output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = gausspert(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn fourg_simple_formula() {
    let r = report(&["fourg", "--a", "0.9", "--b", "1", "--d", "1"]);
    assert_eq!(r["schema"], "gausspert.report/1");
    assert!((num(&r["result"]["constants"]["M"]) - 10.0).abs() < 1e-12);
    assert_eq!(r["result"]["optimality"]["holds_at_0.99M"], false);
    assert_eq!(r["provenance"]["M"], "closed form (1-a/b)^-d");
}

#[test]
fn fourg_alpha() {
    let r = report(&["fourg", "--alpha", "3"]);
    assert!((num(&r["result"]["L"]["l"]) - 4f64.ln()).abs() < 1e-12);
    let r = report(&["fourg", "--alpha", "0.5"]);
    assert!(num(&r["result"]["L"]["l"]) > 1.5f64.ln() + 1e-6);
    assert!(r["result"]["witness"]["point"].is_object());
}

#[test]
fn heat_potential_closed_form() {
    let r = report(&["kato", "--heat-potential", "--d", "3", "--r", "1", "--c", "1"]);
    assert!((num(&r["result"]["quadrature"]) - 1.0 / (4.0 * PI)).abs() < 1e-12);
}

#[test]
fn constant_series_sums_to_exponential() {
    let r = report(&["series", "--potential", "constant:1", "--s", "0", "--t", "1", "--x", "0", "--y", "0"]);
    let g = &r["result"]["grid_recursion"];
    let want = 1f64.exp() / (4.0 * PI).sqrt();
    assert!((num(&g["value"]) - want).abs() < 1e-8 * want);
    assert_eq!(g["rigorous"], false);
}

#[test]
fn zero_series_is_the_kernel() {
    let r = report(&["series", "--potential", "zero"]);
    let g = &r["result"]["grid_recursion"];
    assert!(g["terms"].as_array().unwrap()[1..].iter().all(|v| num(v) == 0.0));
    assert_eq!(g["value"], g["p"]);
}

#[test]
fn both_engines_agree_on_a_bump() {
    let r = report(&["series", "--potential", "gaussian:1,0.7", "--engine", "both", "--paths", "20000", "--seed", "3"]);
    assert!(num(&r["result"]["difference_in_std_errors"]) < 4.0);
}

#[test]
fn series_csv_lists_terms() {
    let out = gausspert(&["series", "--potential", "constant:1", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("engine,n,term,partial_sum"));
    assert!(lines.next().unwrap().starts_with("grid_recursion,0,"));
}

#[test]
fn split_linear_quarters() {
    let r = report(&["split", "--q", "linear:1", "--theta", "0.25"]);
    assert_eq!(r["result"]["splitting"]["breakpoints"].as_array().unwrap().len(), 5);
}

#[test]
fn verify_constant_potential() {
    let slope = (0.5 * (1.0f64 / 0.9).sqrt()).to_string();
    let r =
        report(&["verify", "--potential", "constant:0.5", "--big-q", &format!("linear:{slope}"), "--samples", "30"]);
    assert_eq!(r["result"]["membership"]["verified_at"].as_array().unwrap().len(), 30);
}

#[test]
fn violated_membership_exits_with_three() {
    let out = gausspert(&["verify", "--potential", "constant:0.5", "--big-q", "linear:0.1", "--samples", "30"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("membership fails"));
}

#[test]
fn bound_certificate_and_comparison() {
    let r = report(&["bound", "--d", "3", "--b", "1", "--a", "0.9", "--i", "0.005"]);
    let c = &r["result"]["certificate"];
    assert!((num(&c["eta"]) - 1000.0 * 0.005 / (4.0 * PI)).abs() < 1e-9);
    let r = report(&["bound", "--potential", "constant:0.00005", "--compare", "--samples", "10"]);
    let rows = r["result"]["comparison"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|row| num(&row["ratio"]) >= 1.0));
    assert_eq!(r["provenance"]["I_sqrt_h"], "computed from the potential");
}

#[test]
fn oversized_kato_norm_is_a_parameter_error() {
    let out = gausspert(&["bound", "--d", "3", "--i", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("I_sqrt_h(q) <"));
}

#[test]
fn unsupported_engine_is_a_parameter_error() {
    let out = gausspert(&["series", "--potential", "indicator:5", "--d", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("monte_carlo"));
}

#[test]
fn csv_only_for_tables() {
    let out = gausspert(&["kato", "--heat-potential", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_is_reproducible_across_runs_and_thread_counts() {
    let args =
        ["series", "--potential", "gaussian:1,0.5", "--engine", "monte-carlo", "--paths", "4096", "--seed", "11"];
    let first = gausspert(&args);
    let again = gausspert(&args);
    assert_eq!(first.stdout, again.stdout);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "1"]);
    let one: Value = serde_json::from_slice(&gausspert(&threaded).stdout).unwrap();
    let many: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(one["result"], many["result"]);
}

#[test]
fn seed_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_gausspert"))
        .args(["split", "--q", "linear:1", "--theta", "0.5"])
        .env("GAUSSPERT_SEED", "42")
        .output()
        .unwrap();
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["settings"]["seed"], 42);
}

#[test]
fn config_file_sets_run_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out_path = dir.path().join("report.json");
    fs::write(&cfg, "seed = 9\n[quad]\nhermite_order = 32\n[grid]\nslices = 16\n").unwrap();
    let out = gausspert(&[
        "split",
        "--q",
        "linear:1",
        "--theta",
        "0.5",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["settings"]["seed"], 9);
    assert_eq!(r["settings"]["quad"]["hermite_order"], 32);
    assert_eq!(r["settings"]["grid"]["slices"], 16);
    assert_eq!(r["parameters"]["theta"], 0.5);
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 1\ncolour = \"blue\"\n").unwrap();
    let out = gausspert(&["split", "--q", "linear:1", "--theta", "0.5", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(&cfg, "[quad]\nrel_tolerance = 1e-3\n").unwrap();
    let out = gausspert(&["split", "--q", "linear:1", "--theta", "0.5", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_checks() {
    let r = report(&["kernel", "--a", "2", "--d", "2", "--t", "1.5", "--y", "0.3,-0.2", "--three-g"]);
    assert!(num(&r["result"]["chapman_kolmogorov"]["residual"]) < 1e-10);
    assert!((num(&r["result"]["normalization"]) - 1.0).abs() < 1e-10);
    assert!(num(&r["result"]["three_g"]["radius_at_level"]) > 0.0);
}
