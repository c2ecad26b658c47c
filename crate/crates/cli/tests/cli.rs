use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ivcoarse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivcoarse")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut all = vec!["--format", "json"];
    all.extend_from_slice(args);
    let out = ivcoarse(&all);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), doc)
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const CLEAN_PAIR: &str = r#"
schema = "ivcoarse/1"
instrument_arity = 2
levels = [
  { label = "a", well_defining = true, z_dependent = false },
  { label = "b", well_defining = true, z_dependent = false },
]
estimand = { kind = "risk_difference", treated = "b", reference = "a" }
"#;

const VIOLATING: &str = r#"
schema = "ivcoarse/1"
instrument_levels = ["0", "1"]
exposure_levels = ["a", "b"]
counts = [
  { z = "0", x = "a", y = 1, count = 10 },
  { z = "1", x = "a", y = 0, count = 10 },
]
"#;

fn rounded(v: &Value) -> (String, String) {
    (v["lower"]["rounded"].as_str().unwrap().to_string(), v["upper"]["rounded"].as_str().unwrap().to_string())
}

#[test]
fn peanut_bounds_agree_across_routes() {
    let (code, doc) = json(&["bounds", "--preset", "peanut-ternary"]);
    assert_eq!(code, 0);
    assert_eq!(doc["schema"], "ivcoarse-report/1");
    for key in ["config_echo", "results", "diagnostics", "content_hash"] {
        assert!(!doc[key].is_null(), "{key}");
    }
    let r = &doc["results"];
    assert_eq!(rounded(&r["lp"]), ("-0.16".into(), "0.16".into()));
    assert_eq!(r["closed_form"]["name"], "ternary");
    assert_eq!(r["agreement"], true);
    assert_eq!(doc["diagnostics"]["certificates_verify"]["lower"], true);
    assert_eq!(doc["config_echo"]["preset"], "peanut-ternary");
}

#[test]
fn homocysteine_bounds() {
    let (code, doc) = json(&["bounds", "--preset", "homocysteine-three"]);
    assert_eq!(code, 0);
    assert_eq!(rounded(&doc["results"]["lp"]), ("-0.62".into(), "0.81".into()));
    assert!(doc["results"]["closed_form"].is_null());
}

#[test]
fn infeasible_data_exit_with_certificate() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "s.toml", CLEAN_PAIR);
    let d = write(&dir, "d.toml", VIOLATING);
    let (code, doc) = json(&["bounds", "--scenario", &s, "--summary", &d]);
    assert_eq!(code, 3);
    assert_eq!(doc["diagnostics"]["error"]["kind"], "infeasible");
    assert!(doc["diagnostics"]["error"]["farkas"]["inequality"].as_str().unwrap().contains("<= 0"));

    let (code, doc) = json(&["bounds", "--scenario", &s, "--summary", &d, "--slack"]);
    assert_eq!(code, 0);
    assert!(!doc["results"]["projection"].is_null());
    assert_eq!(doc["config_echo"]["slack"], true);
}

#[test]
fn records_with_interval_map() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "s.toml", CLEAN_PAIR);
    let map = write(
        &dir,
        "m.toml",
        r#"
schema = "ivcoarse/1"
kind = "interval"
entries = [ { label = "a", upper = 5.0 }, { label = "b", lower = 5.0 } ]
"#,
    );
    let recs = write(&dir, "r.csv", "z,x_star,y\n0,1.5,0\n0,7.0,1\n1,2.0,0\n1,9.5,1\n1,6.0,0\n0,0.5,1\n");
    let (code, doc) = json(&["bounds", "--scenario", &s, "--records", &recs, "--map", &map]);
    assert_eq!(code, 0, "{doc}");
    assert_eq!(doc["results"]["closed_form"]["name"], "classic");
    assert_eq!(doc["results"]["agreement"], true);
    let roles: Vec<&str> =
        doc["config_echo"]["inputs"].as_array().unwrap().iter().map(|i| i["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["scenario", "records", "coarsening"]);
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.toml");
    let (code, doc) = json(&["bounds", "--scenario", missing.to_str().unwrap(), "--preset", "peanut-risk"]);
    assert_eq!(code, 2, "{doc}");
    let out = ivcoarse(&["bounds", "--scenario", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let bad = write(&dir, "bad.toml", &CLEAN_PAIR.replace("ivcoarse/1", "ivcoarse/0"));
    assert_eq!(ivcoarse(&["dump-lp", "--scenario", &bad]).status.code(), Some(2));
    assert_eq!(ivcoarse(&["ci", "--preset", "peanut-ternary"]).status.code(), Some(2));
    assert_eq!(ivcoarse(&["verify", "--suite", "orderings", "--trials", "1"]).status.code(), Some(2));
}

#[test]
fn derive_caps_exit_four() {
    let (code, doc) = json(&["derive", "--preset", "peanut-ternary", "--max-vars", "10"]);
    assert_eq!(code, 4);
    assert_eq!(doc["diagnostics"]["error"]["kind"], "cap-exceeded");
}

#[test]
fn derive_lists_terms() {
    let (code, doc) = json(&["derive", "--preset", "peanut-ill-defining"]);
    assert_eq!(code, 0);
    assert_eq!(doc["results"]["lower"].as_array().unwrap().len(), 8);
    assert_eq!(doc["results"]["upper"].as_array().unwrap().len(), 8);
    let out = ivcoarse(&["derive", "--preset", "peanut-risk", "--latex"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\\max"));
    assert!(text.contains("p_{x1\\cdot 0}"));
}

#[test]
fn ci_echoes_seed_and_method() {
    let (code, doc) = json(&["ci", "--preset", "peanut-risk", "--method", "mn", "--bootstrap", "200", "--seed", "7"]);
    assert_eq!(code, 0);
    assert_eq!(doc["config_echo"]["seed"], 7);
    assert_eq!(doc["config_echo"]["bootstrap"]["method"], "m-out-of-n");
    assert_eq!(doc["config_echo"]["bootstrap"]["replicates"], 200);
    assert!(doc["results"]["chosen_m"].is_array());
    let lo = doc["results"]["ci"]["lower"].as_f64().unwrap();
    let hi = doc["results"]["ci"]["upper"].as_f64().unwrap();
    assert!(lo <= 48.0 / 305.0 && 10.0 / 61.0 <= hi);
}

#[test]
fn reproduce_is_deterministic() {
    let args = ["--format", "json", "reproduce", "homocysteine", "--bootstrap", "200"];
    let a = ivcoarse(&args);
    let b = ivcoarse(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let doc: Value = serde_json::from_slice(&a.stdout).unwrap();
    let rows = doc["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["computed_rounded"], serde_json::json!(["-0.62", "0.81"]));
    assert_eq!(rows[1]["computed_rounded"], rows[0]["computed_rounded"]);
}

#[test]
fn reproduce_peanut_rows() {
    let (code, doc) = json(&["reproduce", "peanut", "--bootstrap", "200"]);
    assert_eq!(code, 0);
    let rows = doc["results"]["rows"].as_array().unwrap();
    let reported: Vec<Value> = rows.iter().map(|r| r["reported"].clone()).collect();
    for pair in [[-0.16, 0.16], [-0.20, 0.21], [0.15, 0.20], [0.05, 0.29]] {
        assert!(reported.contains(&serde_json::json!(pair)), "{pair:?}");
    }
    assert_eq!(doc["config_echo"]["seed"], 20240101);
}

#[test]
fn verify_small_suite() {
    let (code, doc) = json(&["verify", "--suite", "closed-forms", "--trials", "5", "--seed", "3"]);
    assert_eq!(code, 0);
    assert_eq!(doc["results"]["passed"], true);
    assert_eq!(doc["results"]["reports"].as_array().unwrap().len(), 6);
    let (code, doc) = json(&[
        "verify",
        "--suite",
        "scenario",
        "--preset",
        "peanut-risk",
        "--trials",
        "5",
        "--seed",
        "3",
        "--restarts",
        "2",
    ]);
    assert_eq!(code, 0);
    assert_eq!(doc["results"]["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn dump_lp_shape() {
    let (code, doc) = json(&["dump-lp", "--preset", "peanut-risk"]);
    assert_eq!(code, 0);
    // 4 exposure types, 8 outcome types
    assert_eq!(doc["results"]["variables"].as_array().unwrap().len(), 32);
    assert_eq!(doc["results"]["rows"].as_array().unwrap().len(), 8);
    let human = ivcoarse(&["dump-lp", "--preset", "peanut-risk"]);
    assert!(String::from_utf8(human.stdout).unwrap().contains("32 response-type variables"));
}
