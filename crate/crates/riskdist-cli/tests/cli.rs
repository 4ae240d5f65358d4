//! End-to-end tests of the `riskdist` binary: spec grammar, exit codes,
//! output formats, and the documented command examples.

use std::process::{Command, Output};

fn riskdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskdist"))
        .args(args)
        .env_remove("RISKDIST_ORACLE_N")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn field(table: &str, key: &str) -> String {
    table
        .lines()
        .find_map(|l| {
            let mut parts = l.split_whitespace();
            (parts.next() == Some(key)).then(|| parts.collect::<Vec<_>>().join(" "))
        })
        .unwrap_or_else(|| panic!("field `{key}` missing in:\n{table}"))
}

fn num(table: &str, key: &str) -> f64 {
    field(table, key).parse().expect("numeric field")
}

#[test]
fn measure_examples() {
    let out = riskdist(&["measure", "--dist", "normal(0,1)", "--g", "tvar(0.95)"]);
    assert!(out.status.success());
    let v = num(&stdout(&out), "value");
    assert!((v - 2.062713).abs() < 1e-5, "{v}");

    let out = riskdist(&["measure", "--dist", "uniform(0,1)", "--g", "identity"]);
    assert!((num(&stdout(&out), "value") - 0.5).abs() < 1e-7);

    let out = riskdist(&["measure", "--dist", "lognormal(0,1)", "--g", "var(0.5)"]);
    assert!((num(&stdout(&out), "value") - 1.0).abs() < 1e-9);
}

#[test]
fn measure_parse_failure_names_token_and_exits_1() {
    let out = riskdist(&["measure", "--dist", "normal(0,oops)", "--g", "identity"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("oops"), "stderr: {err}");
    // stdout carries data only
    assert!(out.stdout.is_empty());
}

#[test]
fn measure_numerical_error_exits_2() {
    // TVaR of a Cauchy diverges
    let out = riskdist(&["measure", "--dist", "student(1)", "--g", "tvar(0.9)"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_normal_pair_with_verify() {
    let out = riskdist(&[
        "decompose",
        "--d1",
        "normal(0,2)",
        "--d2",
        "normal(0,1)",
        "--g",
        "var(0.95)",
        "--verify",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!((num(&text, "value") - 1.644854).abs() < 1e-5);
    assert!(num(&text, "oracle_delta") < 1e-5);
    assert_eq!(field(&text, "method"), "theorem_decomposition");
}

#[test]
fn decompose_lognormal_identical_uses_ln_path() {
    let out = riskdist(&[
        "decompose",
        "--d1",
        "lognormal(0,1)",
        "--d2",
        "lognormal(0,1)",
        "--g",
        "var(0.9)",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!((num(&text, "value") - 5.37329).abs() < 1e-4);
    assert!(field(&text, "branch").contains("log-normal"));
}

#[test]
fn decompose_student_pair_branch() {
    let out = riskdist(&[
        "decompose",
        "--d1",
        "student(2)",
        "--d2",
        "student(5)",
        "--g",
        "tvar(0.99)",
        "--method",
        "theorem",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    // TVaR_.99[t2] + LTVaR_.01[t5], 40-digit references
    let want = 14.071247279470289 - 4.4524291118179704;
    assert!((num(&text, "value") - want).abs() < 1e-6);
    assert!(field(&text, "branch").contains("nu1"));
}

#[test]
fn decompose_forced_theorem_exits_3() {
    let out = riskdist(&[
        "decompose",
        "--d1",
        "lognormal(0,1)",
        "--d2",
        "normal(0,1)",
        "--g",
        "var(0.9)",
        "--method",
        "theorem",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dispersive_examples_and_exit_codes() {
    // normal <= logistic
    let out = riskdist(&["dispersive", "--d1", "logistic(0,1)", "--d2", "normal(0,1)"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("Y <=disp X"));

    // shift invariance: equal
    let out = riskdist(&["dispersive", "--d1", "normal(0,1)", "--d2", "normal(3,1)"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("equal"));

    // normal <= student(3)
    let out = riskdist(&["dispersive", "--d1", "student(3)", "--d2", "normal(0,1)"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("Y <=disp X"));

    // inconclusive comparison exits 4 (but still prints the verdict)
    let out = riskdist(&["dispersive", "--d1", "uniform(0,1)", "--d2", "normal(0,0.25)"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stdout(&out).contains("incomparable"));
}

// minimal CSV field splitter honoring double-quote escaping
fn split_csv(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            other => cur.push(other),
        }
    }
    out.push(cur);
    out
}

#[test]
fn csv_output_round_trips_bit_exactly() {
    let out = riskdist(&[
        "measure",
        "--dist",
        "normal(0.3,1.7)",
        "--g",
        "wang(0.8)",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    let header = split_csv(lines.next().unwrap());
    let row = split_csv(lines.next().unwrap());
    assert_eq!(header.len(), row.len());
    for (h, v) in header.iter().zip(&row) {
        if ["dist", "g", "method", "command"].contains(&h.as_str()) {
            continue;
        }
        let parsed: f64 = v.parse().unwrap_or_else(|_| panic!("field {h} = {v}"));
        assert_eq!(&format!("{parsed:.11e}"), v, "field {h} does not round-trip");
    }
}

#[test]
fn json_output_is_line_delimited_objects() {
    let out = riskdist(&[
        "measure",
        "--dist",
        "uniform(0,1)",
        "--g",
        "tvar(0.9)",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let value: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(value["command"], "measure");
    assert!((value["value"].as_f64().unwrap() - 0.95).abs() < 1e-7);
    assert!(value["diagnostics"].is_object());
}

#[test]
fn table_normal_pair_rows_are_additive() {
    let out = riskdist(&[
        "table",
        "--d1",
        "normal(0,2)",
        "--d2",
        "normal(0,1)",
        "--levels",
        "0.9,0.95,0.99",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let get = |name: &str| cells[idx(name)].parse::<f64>().unwrap();
        // per-row identity: the sum equals its decomposed addends
        for prefix in ["var", "tvar", "wt"] {
            let sum = get(&format!("{prefix}_sum"));
            let a = get(&format!("{prefix}_add1"));
            let b = get(&format!("{prefix}_add2"));
            assert!((sum - (a + b)).abs() < 1e-9, "{prefix}: {sum} vs {a}+{b}");
        }
        rows += 1;
    }
    assert_eq!(rows, 3);
}

#[test]
fn table_lognormal_pair_uses_closed_forms() {
    let out = riskdist(&[
        "table",
        "--d1",
        "lognormal(0,1)",
        "--d2",
        "lognormal(0,1)",
        "--levels",
        "0.9",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let var_sum: f64 = cells[idx("var_sum")].parse().unwrap();
    let tvar_sum: f64 = cells[idx("tvar_sum")].parse().unwrap();
    assert!((var_sum - 5.3732924189317526).abs() < 1e-9);
    assert!((tvar_sum - 8.6919706920130437).abs() < 1e-9);
    assert!(cells[idx("branch")].contains("lognormal"));
}

#[test]
fn table_mixed_pair_falls_back_to_oracle() {
    let out = riskdist(&[
        "table",
        "--d1",
        "lognormal(0,1)",
        "--d2",
        "normal(0,1)",
        "--levels",
        "0.9",
        "--n",
        "8192",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("oracle(n=8192)"), "{text}");
    // sums present, addends blank on the oracle branch
    let row = text.lines().nth(1).unwrap();
    assert!(row.contains(",,"));
}

#[test]
fn verify_quick_mode_with_filter() {
    // the dispersive criterion is oracle-free and must pass
    let out = riskdist(&["verify", "--only", "dispersive", "--n", "4096"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("PASS"));
    // quick mode documents the loosened tolerances on stderr
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("64x") || err.contains("loosened"), "stderr: {err}");
}

#[test]
fn verify_filter_lognormal_runs_two_criteria() {
    let out = riskdist(&[
        "verify",
        "--only",
        "log-normal",
        "--n",
        "16384",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    // header + two criterion rows
    assert_eq!(text.trim().lines().count(), 3, "{text}");
}

#[test]
fn oracle_n_env_override() {
    let out = Command::new(env!("CARGO_BIN_EXE_riskdist"))
        .args([
            "decompose",
            "--d1",
            "lognormal(0,1)",
            "--d2",
            "normal(0,1)",
            "--g",
            "var(0.9)",
        ])
        .env("RISKDIST_ORACLE_N", "8192")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("8192"));
}

#[test]
fn empirical_csv_input() {
    let dir = std::env::temp_dir().join("riskdist-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sample.csv");
    std::fs::write(&path, "# sample\n1.0\n2.0\n2.0\n5.0\n").unwrap();
    let spec = format!("empirical(@{})", path.display());
    let out = riskdist(&["measure", "--dist", &spec, "--g", "var(0.5)"]);
    assert!(out.status.success());
    assert!((num(&stdout(&out), "value") - 2.0).abs() < 1e-12);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join("riskdist-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("out.csv");
    let out = riskdist(&[
        "measure",
        "--dist",
        "uniform(0,1)",
        "--g",
        "identity",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let content = std::fs::read_to_string(&path).unwrap();
    assert!(content.starts_with("command,"));
}
