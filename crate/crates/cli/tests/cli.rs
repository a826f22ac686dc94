use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dispersive-lab"));
    c.env_remove("DISPERSIVE_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn exponents_space_refinement_example() {
    let o = run(&["exponents", "--theorem", "S", "--p", "6", "--q", "6", "--sigma", "1/30"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    let e = &v["exponents"];
    assert_eq!(e["alpha"]["exact"], "2");
    assert_eq!(e["s"]["exact"], "1/6");
    assert_eq!(e["delta"]["exact"], "3");
    assert_eq!(v["meta"]["subcommand"], "exponents");
}

#[test]
fn classical_exponents_accept_infinity() {
    let o = run(&["exponents", "--theorem", "classical", "--p", "inf", "--q", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn malformed_config_exits_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        format!("subcommand = \"exponents\"\n[parameters]\np = 6\nunknown_key = 1\n[output]\njson = {:?}\n", out.display().to_string()),
    )
    .unwrap();
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    assert!(o.stdout.is_empty());
}

#[test]
fn invalid_parameter_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let o = run(&["exponents", "--theorem", "S", "--p", "1/0", "--json", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let o = run(&["overlap", "--family", "C"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let o = run(&["exponents", "--json", "/nonexistent-dir/x/out.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_thread_count_exits_one() {
    let o = bin().args(["exponents"]).env("DISPERSIVE_LAB_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn toml_and_json_configs_match_flags() {
    let dir = tempfile::tempdir().unwrap();
    let toml_out = dir.path().join("a.json");
    let json_out = dir.path().join("b.json");
    let toml_cfg = dir.path().join("c.toml");
    let json_cfg = dir.path().join("c.json");
    std::fs::write(
        &toml_cfg,
        format!(
            "subcommand = \"exponents\"\n[parameters]\ntheorem = \"T\"\np = 8\nq = 8\nsigma = \"1/100\"\n[output]\njson = {:?}\n",
            toml_out.display().to_string()
        ),
    )
    .unwrap();
    let cfg = serde_json::json!({
        "subcommand": "exponents",
        "parameters": { "theorem": "T", "p": "8", "q": 8, "sigma": "1/100" },
        "output": { "json": json_out },
    });
    std::fs::write(&json_cfg, cfg.to_string()).unwrap();
    assert_eq!(run(&["run", toml_cfg.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["run", json_cfg.to_str().unwrap()]).status.code(), Some(0));
    let flags = stdout_json(&run(&["exponents", "--theorem", "T", "--p", "8", "--q", "8", "--sigma", "1/100"]));
    assert_eq!(read_json(&toml_out), flags);
    assert_eq!(read_json(&json_out), flags);
}

#[test]
fn reports_are_deterministic() {
    let args = ["norm", "--family", "random-band-limited", "--member", "2", "--seed", "11", "--kind", "hat-morrey"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    assert_eq!(v["meta"]["seed"], 11);
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert!(v["meta"]["truncation"]["lattice"].is_object());
}

#[test]
fn overlap_audit_passes_total_bound() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let o = run(&["overlap", "--samples", "5000", "--adversarial", "500", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["total_ok"], true);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("overlap,points\n"));
}

#[test]
fn plot_reemits_table_and_handles_empty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let o = run(&["verify", "--spec", "lacunary-gap", "--j-max", "3", "--width", "32", "--json", report.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let again = run(&["plot", "--report", report.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(String::from_utf8(again.stdout).unwrap(), std::fs::read_to_string(&csv).unwrap());

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, r#"{"plot": {"columns": ["t", "x", "u"], "rows": []}}"#).unwrap();
    let out = dir.path().join("empty.csv");
    let o = run(&["plot", "--report", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "t,x,u\n");
}

#[test]
fn gkdv_mass_assertion_controls_exit_code() {
    let base = ["gkdv", "--n-x", "128", "--box-length", "40", "--dt", "1e-3", "--t-end", "0.05", "--snapshots", "2"];
    let ok = bin().args(base).args(["--max-mass-drift", "1e-8"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v = stdout_json(&ok);
    let rows = v["plot"]["rows"].as_array().unwrap().len();
    assert_eq!(rows, 2 * 128);
    let strict = bin().args(base).args(["--max-mass-drift", "0"]).output().unwrap();
    let drift = stdout_json(&strict)["conserved"]["max_relative_mass_drift"].as_f64().unwrap();
    assert_eq!(strict.status.code(), Some(if drift > 0.0 { 2 } else { 0 }));
}

#[test]
fn airy_cutoff_has_no_violations() {
    let o = run(&["airy", "--mode", "cutoff", "--region", "B,1,3,5", "--n-tau", "96", "--n-xi", "96"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    for k in ["range", "not_one_on_region", "outside_enlargement"] {
        assert_eq!(v["violations"][k], 0);
    }
}

#[test]
fn bubble_extraction_recovers_planted_scale() {
    let o = run(&[
        "bubble", "--plant-n", "2", "--plant-s", "0", "--plant-y", "3", "--n-x", "1024", "--box-length", "64", "--s-steps", "32",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["bubble"]["N"], 2.0);
    assert!((v["bubble"]["y"].as_f64().unwrap() - 3.0).abs() < 1e-9);
}
