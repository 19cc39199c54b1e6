use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn bspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bspec")).args(args).output().expect("binary runs")
}

fn bspec_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bspec"))
        .args(args)
        .env("BSPEC_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(name: &str) -> String {
    data(name).to_string_lossy().into_owned()
}

#[test]
fn analyze_dirichlet() {
    let out = bspec(&["analyze", &path("dirichlet.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["bspec_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["regularity"]["classification"], "strongly-regular");
    assert_eq!(v["dissipativity"]["verdict"], "self-adjoint");
    assert_eq!(v["regularity"]["theta_forward"]["re"], 1.0);
}

#[test]
fn analyze_exit_codes() {
    let out = bspec(&["analyze", &path("cauchy0.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["regularity"]["classification"], "irregular");

    let out = bspec(&["analyze", &path("periodic.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["regularity"]["classification"], "regular");

    let out = bspec(&["analyze", &path("malformed.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));

    let out = bspec(&["analyze", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ray_sweep_csv_and_refusal() {
    let out = bspec(&["ray-sweep", &path("dirichlet.json"), "--no-resolvent"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# bspec "));
    assert!(lines[1].starts_with("rho_modulus,arg_rho,"));
    assert_eq!(lines.len(), 2 + 5 + 1);
    assert!(lines[7].starts_with("# fitted_order,"));

    let out = bspec(&["ray-sweep", &path("cauchy0.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());

    let out = bspec(&["ray-sweep", &path("dirichlet.json"), "--rho-grid", "50", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert!(v.get("fitted_order").is_none());

    let out = bspec(&["ray-sweep", &path("dirichlet.json"), "--rho-grid", "40,20"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ray_sweep_with_coefficients() {
    let out = bspec(&["ray-sweep", &path("robin_poly.json"), "--rho-grid", "20,40,80", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let devs: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["a_deviation"].as_f64().unwrap()).collect();
    assert!(devs[2] < devs[0]);
}

#[test]
fn eig_lists_dirichlet_eigenvalues() {
    let out = bspec(&["eig", &path("dirichlet.json"), "--r-max", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let eigs = v["eigenvalues"].as_array().unwrap();
    assert_eq!(eigs.len(), 3);
    for (k, e) in eigs.iter().enumerate() {
        let want = ((k + 1) as f64 * std::f64::consts::PI).powi(2);
        assert!((e["lambda"]["re"].as_f64().unwrap() - want).abs() < 1e-8 * want);
        assert_eq!(e["multiplicity"], 1);
    }
}

#[test]
fn green_and_theta_tables() {
    let out = bspec(&["green", &path("dirichlet.json"), "--lambda=-3,-8", "--points", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let values = v["values"].as_array().unwrap();
    assert_eq!(values.len(), 25);
    // G vanishes for x on the boundary.
    for g in values.iter().filter(|g| g["x"] == 0.0 || g["x"] == 1.0) {
        assert!(g["value"]["re"].as_f64().unwrap().abs() < 1e-12);
        assert!(g["value"]["im"].as_f64().unwrap().abs() < 1e-12);
    }

    let out = bspec(&["theta", &path("periodic.json"), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2 + 3);
    assert!(text.lines().nth(3).unwrap().starts_with("1,2.0000000000000000e0,"));
}

#[test]
fn dissip_commands() {
    let out = bspec(&["dissip", "test", &path("cauchy0.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "not-dissipative");

    let args = ["dissip", "sample", "--order", "4", "--samples", "3", "--seed", "9", "--sigma", "0.5"];
    let a = bspec(&args);
    let b = bspec(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    let problems = v["problems"].as_array().unwrap();
    assert_eq!(problems.len(), 3);
    assert_eq!(problems[0]["meta"]["sigma"], 0.5);

    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("sample.json");
    std::fs::write(&doc, serde_json::to_string(&problems[1]).unwrap()).unwrap();
    let out = bspec(&["dissip", "test", doc.to_str().unwrap()]);
    assert_eq!(json(&out)["verdict"], "dissipative");
    let out = bspec(&["analyze", doc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_krein_is_deterministic() {
    let args = ["verify-krein", "--orders", "2,4", "--samples", "40", "--seed", "7"];
    let a = bspec_env(&args, "1");
    let b = bspec_env(&args, "3");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["config"]["seed"], 7);
    for o in v["summary"]["orders"].as_array().unwrap() {
        assert_eq!(o["irregular"], 0);
        assert_eq!(o["samples"], 40);
    }

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("summary.json");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", file.to_str().unwrap()]);
    let c = bspec(&with_out);
    assert_eq!(c.status.code(), Some(0));
    assert!(c.stdout.is_empty());
    assert_eq!(std::fs::read(&file).unwrap(), a.stdout);
}

#[test]
fn verify_krein_modes_and_failures() {
    let out = bspec(&["verify-krein", "--samples", "20", "--mode", "self-adjoint"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["summary"]["mode"], "self-adjoint");

    let out = bspec(&["verify-krein", "--orders", "3"]);
    assert_eq!(out.status.code(), Some(1));

    // A threshold above every normalized margin turns each sample into a
    // reported counterexample.
    let out = bspec(&["verify-krein", "--orders", "2", "--samples", "2", "--tol-theta", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["summary"]["irregular"].as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"conditions\""));

    let out = bspec_env(&["verify-krein", "--samples", "2"], "zero");
    assert_eq!(out.status.code(), Some(1));
}
