//! Black-box tests of the `hvsis` binary: output contracts, exit codes,
//! and byte-level determinism.

use std::io::Write as _;
use std::process::{Command, Output, Stdio};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hvsis"))
        .args(args)
        .output()
        .expect("binary must spawn")
}

fn run_with_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_hvsis"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary must spawn");
    child
        .stdin
        .take()
        .expect("stdin is piped")
        .write_all(input.as_bytes())
        .expect("config fits in the pipe");
    child.wait_with_output().expect("binary must finish")
}

fn stdout_str(out: &Output) -> &str {
    std::str::from_utf8(&out.stdout).expect("output is UTF-8")
}

fn stderr_str(out: &Output) -> &str {
    std::str::from_utf8(&out.stderr).expect("diagnostics are UTF-8")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal termination")
}

fn json_doc(out: &Output) -> serde_json::Value {
    serde_json::from_str(stdout_str(out)).expect("stdout is one JSON document")
}

/// Last data row of a simulate CSV as (t, x, y, z, v).
fn final_row(csv: &str) -> [f64; 5] {
    let row = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .next_back()
        .expect("at least one data row");
    let cells: Vec<f64> = row
        .split(',')
        .map(|c| c.parse().expect("numeric cell"))
        .collect();
    cells.try_into().expect("five columns")
}

#[test]
fn simulate_reaches_the_disease_free_limit() {
    let out = run(&["simulate", &fixture("subcritical_run.json")]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_str(&out);
    assert!(text.starts_with("t,x,y,z,v\n"));
    assert!(text.ends_with("# terminal_reason: steady_state\n"));
    let [_, x, y, z, v] = final_row(text);
    assert!(x.abs() <= 1e-6 && (y - 1.0).abs() <= 1e-6 && z.abs() <= 1e-6);
    assert!((v - 1.0).abs() <= 1e-6);
}

#[test]
fn simulate_reaches_the_endemic_limit() {
    let out = run(&["simulate", &fixture("supercritical_run.json")]);
    assert_eq!(exit_code(&out), 0);
    let [_, x, y, z, v] = final_row(stdout_str(&out));
    assert!((x - 0.25).abs() <= 1e-6);
    assert!((y - 4.0 / 3.0).abs() <= 1e-6);
    assert!((z - 2.0 / 3.0).abs() <= 1e-6);
    assert!((v - 2.0).abs() <= 1e-6);
}

#[test]
fn zero_horizon_emits_header_and_initial_row() {
    let out = run(&["simulate", &fixture("simulate_horizon_zero.json")]);
    assert_eq!(exit_code(&out), 0);
    assert_eq!(
        stdout_str(&out),
        "t,x,y,z,v\n0,0.01,2,0.05,2.05\n# terminal_reason: horizon_reached\n"
    );
}

#[test]
fn analyze_reports_the_endemic_document() {
    let out = run(&["analyze", &fixture("analyze_supercritical.json")]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&out);
    assert!((doc["sigma0"].as_f64().unwrap() - 2.0).abs() <= 2e-15);
    assert_eq!(doc["sigma0"], doc["sigma_c"]);
    assert_eq!(doc["regime"], "endemic");
    let ee = doc["ee"].as_array().unwrap();
    assert!((ee[0].as_f64().unwrap() - 0.25).abs() <= 1e-12);
    assert!((ee[1].as_f64().unwrap() - 4.0 / 3.0).abs() <= 1e-12);
    assert!((ee[2].as_f64().unwrap() - 2.0 / 3.0).abs() <= 1e-12);
    assert_eq!(doc["dfe"].as_array().unwrap()[1].as_f64().unwrap(), 2.0);
    // Leading eigenvalue at the disease-free point is positive above threshold.
    let top = doc["eigenvalues_dfe"].as_array().unwrap()[0].as_array().unwrap();
    assert!(top[0].as_f64().unwrap() > 0.0);
    // All endemic eigenvalue real parts are negative.
    for pair in doc["eigenvalues_ee"].as_array().unwrap() {
        assert!(pair.as_array().unwrap()[0].as_f64().unwrap() < 0.0);
    }
    let el = &doc["elasticities"];
    assert_eq!(el["beta_h"].as_f64().unwrap(), 1.0);
    assert_eq!(el["beta_v"].as_f64().unwrap(), 1.0);
    assert_eq!(el["omega"].as_f64().unwrap(), 1.0);
    assert_eq!(el["gamma"].as_f64().unwrap(), -1.0);
    assert_eq!(el["mu"].as_f64().unwrap(), -2.0);
}

#[test]
fn analyze_omits_endemic_fields_below_threshold() {
    let out = run(&["analyze", &fixture("analyze_subcritical.json")]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&out);
    assert!((doc["sigma0"].as_f64().unwrap() - 0.5).abs() <= 1e-15);
    assert_eq!(doc["regime"], "disease-free");
    assert!(doc.get("ee").is_none());
    assert!(doc.get("eigenvalues_ee").is_none());
    for pair in doc["eigenvalues_dfe"].as_array().unwrap() {
        assert!(pair.as_array().unwrap()[0].as_f64().unwrap() < 0.0);
    }
}

#[test]
fn analyze_handles_a_vector_free_world() {
    let out = run(&["analyze", &fixture("analyze_no_vectors.json")]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&out);
    assert_eq!(doc["sigma0"].as_f64().unwrap(), 0.0);
    assert!(doc.get("ee").is_none());
    assert!(doc.get("elasticities").is_none());
    assert_eq!(doc["regime"], "disease-free");
}

#[test]
fn json_keys_come_out_lexicographic() {
    let out = run(&["analyze", &fixture("analyze_supercritical.json")]);
    let text = stdout_str(&out);
    let keys = [
        "\"dfe\"",
        "\"ee\"",
        "\"eigenvalues_dfe\"",
        "\"eigenvalues_ee\"",
        "\"elasticities\"",
        "\"regime\"",
        "\"sigma0\"",
        "\"sigma_c\"",
    ];
    let positions: Vec<usize> = keys
        .iter()
        .map(|k| text.find(k).unwrap_or_else(|| panic!("{k} missing")))
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{positions:?}");
}

#[test]
fn sweep_matches_closed_form_equilibria() {
    let out = run(&["sweep", &fixture("sweep_controls.json")]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u1,u2,sigma_c,x_ee,z_ee"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    // No intervention: the uncontrolled endemic level.
    assert_eq!(rows[0][0], "0");
    assert!((rows[0][3].parse::<f64>().unwrap() - 0.25).abs() <= 1e-12);
    // Mild vector control grazes the published prevalence drop.
    assert_eq!(rows[1][0], "0.01");
    let x_c = rows[1][3].parse::<f64>().unwrap();
    assert!((x_c - 0.00316 / 0.0168).abs() <= 1e-9);
    // Strong enough control clears the threshold: empty equilibrium cells.
    let last = rows.last().unwrap();
    assert!(last[2].parse::<f64>().unwrap() < 1.0);
    assert_eq!(last[3], "");
    assert_eq!(last[4], "");
}

#[test]
fn region_classifies_cost_ratios() {
    let out = run(&["region", &fixture("region_costs.json")]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("c1,c2,in_C,policy,u1_star,u2_star,cost"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0], rows[0][2], rows[0][3]), ("4", "false", "vector-control"));
    assert!(rows[0][4].parse::<f64>().unwrap() > 0.0);
    assert_eq!(rows[0][5], "0");
    assert_eq!((rows[1][0], rows[1][2], rows[1][3]), ("5", "true", "protection"));
    assert_eq!(rows[1][4], "0");
    assert!((rows[1][5].parse::<f64>().unwrap() - 0.2).abs() <= 1e-12);
}

#[test]
fn region_needs_nothing_below_threshold() {
    let config = r#"{"gamma":0.4,"beta_h":0.2,"beta_v":0.2,"omega":0.2,"mu":0.2,
        "c1_min":1.0,"c1_max":5.0,"c1_count":3}"#;
    let out = run_with_stdin(&["region", "-"], config);
    assert_eq!(exit_code(&out), 0);
    for line in stdout_str(&out).lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3], "none-needed");
        assert_eq!(cells[4], "0");
        assert_eq!(cells[5], "0");
        assert_eq!(cells[6], "0");
    }
}

#[test]
fn optimize_reports_the_cheap_vector_control_policy() {
    let out = run(&["optimize", &fixture("optimize_equal_costs.json")]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&out);
    let u1_vc = 0.02_f64.sqrt() - 0.1;
    assert!((doc["u1_star"].as_f64().unwrap() - u1_vc).abs() <= 1e-12);
    assert_eq!(doc["u2_star"].as_f64().unwrap(), 0.0);
    assert_eq!(doc["provenance"], "closed-form");
    assert!((doc["sigma_c"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
    assert!(doc["lambda"].as_f64().unwrap() > 0.0);
    assert!(doc.get("grid_gap").is_none());
}

#[test]
fn optimize_reports_the_protection_policy_when_vector_control_is_dear() {
    let out = run(&["optimize", &fixture("optimize_costly_vector_control.json")]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&out);
    assert_eq!(doc["u1_star"].as_f64().unwrap(), 0.0);
    assert!((doc["u2_star"].as_f64().unwrap() - 0.1).abs() <= 1e-12);
    assert!((doc["cost"].as_f64().unwrap() - 0.1).abs() <= 1e-12);
}

#[test]
fn optimize_grid_gap_appears_only_on_request() {
    let out = run(&[
        "optimize",
        &fixture("optimize_equal_costs.json"),
        "--verify-grid",
        "301",
    ]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&out);
    let gap = doc["grid_gap"].as_f64().unwrap();
    assert!(gap >= -1e-12, "grid beat the closed form by {gap}");
    assert!(gap <= 1e-2, "grid nowhere near the closed form: {gap}");
}

#[test]
fn verify_passes_on_default_parameters() {
    let out = run(&["verify", &fixture("verify_default.json")]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&out);
    assert_eq!(doc["status"], "pass");
    let checks = doc["checks"].as_array().unwrap();
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        ["boundary_flow", "metzler", "monotone_order", "threshold_eigenvalue", "sensitivity"]
    );
    for check in checks {
        assert_eq!(check["status"], "pass");
        assert!(check["worst_margin"].is_f64());
    }
}

#[test]
fn verify_skips_sensitivity_without_vector_contagion() {
    let out = run(&["verify", &fixture("verify_no_vectors.json")]);
    assert_eq!(exit_code(&out), 0);
    let doc = json_doc(&out);
    assert_eq!(doc["status"], "pass");
    let sensitivity = doc["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "sensitivity")
        .unwrap();
    assert_eq!(sensitivity["status"], "skipped");
    assert!(sensitivity["worst_margin"].is_null());
}

#[test]
fn validation_failures_exit_two() {
    let out = run(&["analyze", &fixture("bad_gamma.json")]);
    assert_eq!(exit_code(&out), 2);
    assert!(stdout_str(&out).is_empty());
    assert!(stderr_str(&out).contains("gamma"));

    let out = run_with_stdin(&["analyze", "-"], r#"{"gamma":0.4,"bogus":1}"#);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_str(&out).contains("bogus"));

    let out = run(&["simulate", &fixture("analyze_supercritical.json")]);
    assert_eq!(exit_code(&out), 2, "config without a state must be rejected");
    assert!(stderr_str(&out).contains("x0"));
}

#[test]
fn unwritable_output_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_subdir").join("out.json");
    let out = run(&[
        "analyze",
        &fixture("analyze_supercritical.json"),
        "--out",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn out_file_matches_stdout_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("doc.json");
    let piped = run(&["analyze", &fixture("analyze_supercritical.json")]);
    let filed = run(&[
        "analyze",
        &fixture("analyze_supercritical.json"),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&filed), 0);
    assert!(stdout_str(&filed).is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), piped.stdout);
}

#[test]
fn stdin_config_matches_file_config() {
    let path = fixture("analyze_supercritical.json");
    let from_file = run(&["analyze", &path]);
    let from_stdin = run_with_stdin(&["analyze", "-"], &std::fs::read_to_string(&path).unwrap());
    assert_eq!(from_file.stdout, from_stdin.stdout);
}

#[test]
fn outputs_use_lf_endings_and_end_with_newline() {
    for (cmd, fix) in [
        ("simulate", "supercritical_run.json"),
        ("analyze", "analyze_supercritical.json"),
        ("sweep", "sweep_controls.json"),
        ("region", "region_costs.json"),
        ("optimize", "optimize_equal_costs.json"),
        ("verify", "verify_default.json"),
    ] {
        let out = run(&[cmd, &fixture(fix)]);
        assert_eq!(exit_code(&out), 0, "{cmd} failed");
        assert!(!out.stdout.contains(&b'\r'), "{cmd} emitted a carriage return");
        assert_eq!(out.stdout.last(), Some(&b'\n'), "{cmd} missing final newline");
    }
}
