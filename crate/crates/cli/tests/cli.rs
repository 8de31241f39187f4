use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn ltrans(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltrans")).args(args).output().expect("binary runs")
}

fn reports(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is a JSON report"))
        .collect()
}

fn without_wall_time(mut v: Value) -> Value {
    v.as_object_mut().expect("object").remove("wall_time");
    v
}

#[test]
fn verify_lambert_eta_is_equal() {
    let out = ltrans(&["verify", "--identity", "lambert_eta", "--order", "200"]);
    assert!(out.status.success());
    let r = reports(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0]["outputs"]["verdict"], "equal");
    assert_eq!(r[0]["outputs"]["order_checked"], 200);
    assert_eq!(r[0]["passed"], true);
}

#[test]
fn verify_all_emits_registry_in_order() {
    let out = ltrans(&["verify", "--identity", "all", "--order", "60"]);
    assert!(out.status.success());
    let names: Vec<String> =
        reports(&out).iter().map(|r| r["outputs"]["name"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["lambert_eta", "weight2_resum", "weight0_resum", "x_algebraic", "x_differential"]);
}

#[test]
fn unknown_identity_is_an_error_report() {
    let out = ltrans(&["verify", "--identity", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let r = reports(&out);
    assert_eq!(r[0]["status"], "error");
    assert_eq!(r[0]["passed"], false);
    assert!(r[0]["error"].as_str().unwrap().contains("nope"));
}

#[test]
fn qexpand_eta_is_single_leading_term() {
    let out = ltrans(&["qexpand", "--quotient", "1:1", "--order", "0"]);
    assert!(out.status.success());
    let r = &reports(&out)[0]["outputs"];
    assert_eq!(r["lead"], "1/24");
    assert_eq!(r["coefficients"], serde_json::json!(["1"]));
}

#[test]
fn qexpand_rejects_malformed_quotient() {
    let out = ltrans(&["qexpand", "--quotient", "4:x", "--order", "5"]);
    assert!(!out.status.success());
    assert_eq!(reports(&out)[0]["status"], "error");
}

#[test]
fn lambert_matches_divisor_count() {
    // a = 1, b = 1, k = 1 gives the divisor function
    let out = ltrans(&["lambert", "--a", "Const1", "--b", "Const1", "--k", "1", "--order", "12"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let coeffs: Vec<i64> = reports(&out)[0]["outputs"]["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_str().unwrap().parse().unwrap())
        .collect();
    let tau: Vec<i64> = (0..=12).map(|n: i64| if n == 0 { 0 } else { (1..=n).filter(|d| n % d == 0).count() as i64 }).collect();
    assert_eq!(coeffs, tau);
}

#[test]
fn eta_at_i() {
    let out = ltrans(&["eta", "--t", "1"]);
    assert!(out.status.success());
    let v: f64 = reports(&out)[0]["outputs"]["value"].as_str().unwrap().parse().unwrap();
    assert!((v - 0.768_225_422_326_056_7).abs() < 1e-15);
}

#[test]
fn lvalue_all_routes_agree() {
    let out = ltrans(&["lvalue", "--preset", "E32", "--route", "all", "--tol", "1e-10"]);
    assert!(out.status.success());
    let r = &reports(&out)[0]["outputs"];
    let routes: Vec<&str> = r["values"].as_array().unwrap().iter().map(|v| v["route"].as_str().unwrap()).collect();
    assert_eq!(routes, ["dirichlet", "product", "transformed", "intermediate", "period"]);
    for c in r["comparisons"].as_array().unwrap() {
        assert_eq!(c["passed"], true, "{c}");
    }
}

#[test]
fn lvalue_single_route() {
    let out = ltrans(&["lvalue", "--route", "period"]);
    assert!(out.status.success());
    let v = &reports(&out)[0]["outputs"]["values"][0];
    assert_eq!(v["route"], "period");
    assert!((v["value"].as_f64().unwrap() - 0.917_050_635_318_655).abs() < 1e-12);
}

#[test]
fn transform_check_spec_file() {
    let mut file = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    writeln!(
        file,
        "k1 = 1\nk2 = 1\nk0 = 1\nN = 32\na1 = \"CharMinus4\"\nb1 = \"OddIndicator\"\na2 = \"OddIndicator\"\nb2 = \"CharMinus4\"\ng2_scale = \"-sqrt(8)\""
    )
    .unwrap();
    let out = ltrans(&["transform-check", "--spec", file.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let r = reports(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0]["passed"], true);
}

#[test]
fn transform_check_bad_spec_file() {
    let mut file = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    writeln!(file, "k1 = 1\nk2 = 1\nk0 = 1\nN = 0\na1 = \"Const1\"\nb1 = \"Const1\"\na2 = \"Const1\"\nb2 = \"Const1\"").unwrap();
    let out = ltrans(&["transform-check", "--spec", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let r = &reports(&out)[0];
    assert_eq!(r["status"], "error");
    assert!(r["error"].as_str().unwrap().contains("N must be positive"));
}

#[test]
fn transform_check_random_is_seeded() {
    let args = ["transform-check", "--random", "3", "--seed", "5"];
    let first: Vec<Value> = reports(&ltrans(&args)).into_iter().map(without_wall_time).collect();
    let second: Vec<Value> = reports(&ltrans(&args)).into_iter().map(without_wall_time).collect();
    assert_eq!(first.len(), 3);
    assert_eq!(first, second);
    let order: Vec<u64> = first.iter().map(|r| r["inputs"]["random"].as_u64().unwrap()).collect();
    assert_eq!(order, [0, 1, 2]);
    let other: Vec<Value> =
        reports(&ltrans(&["transform-check", "--random", "3", "--seed", "6"])).into_iter().map(without_wall_time).collect();
    assert_ne!(first, other);
}

#[test]
fn usage_errors_exit_nonzero() {
    for args in [&["bogus"][..], &["verify", "--frobnicate"][..], &["transform-check", "--spec", "x.toml", "--preset", "E32"][..]] {
        let out = ltrans(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"), "{args:?}");
    }
}
