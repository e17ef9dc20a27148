use std::process::{Command, Output};

fn negassoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_negassoc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn ulc_exit_codes() {
    let ok = negassoc(&["check-ulc", "[0.25, 0.5, 0.25]", "--format", "json"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&ok)).unwrap();
    assert_eq!(v["pass"], true);

    let bad = negassoc(&["check-ulc", r#"{"probs": [0.5, 0.0, 0.5]}"#, "--format", "json"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn strong_rayleigh_violation_reports_witness() {
    let out = negassoc(&[
        "check-sr",
        r#"{"n": 2, "entries": [[0, 0.5], [3, 0.5]]}"#,
        "--grid-points",
        "200",
        "--lines",
        "20",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let slack = v["checks"][0]["slack"].as_f64().unwrap();
    assert!(slack <= -0.25 + 1e-10, "{slack}");
}

#[test]
fn parse_errors_exit_2() {
    let out = negassoc(&["check-ulc", "[0.5, 0.6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(negassoc(&["no-such-command"]).status.code(), Some(2));
    let cfg = r#"{"schema_version": 1, "seed": 1, "scenario": {"kind": "ulc-check", "tau": [1.0]}, "colour": 3}"#;
    assert_eq!(negassoc(&["run", cfg]).status.code(), Some(2));
}

#[test]
fn guard_exceeded_exits_3() {
    let out = negassoc(&[
        "check-na",
        r#"{"type": "mixed", "tau": {"kind": "binomial", "params": {"n": 10, "p": 0.5}}, "partition": [0.2, 0.2, 0.2]}"#,
        "--max-points",
        "4",
        "--max-up-sets",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn na_of_process_and_law() {
    let proc_ = r#"{"type": "mixed", "tau": {"kind": "binomial", "params": {"n": 3, "p": 0.4}}, "partition": [0.3, 0.3]}"#;
    assert_eq!(negassoc(&["check-na", proc_]).status.code(), Some(0));
    assert_eq!(negassoc(&["check-sna", proc_]).status.code(), Some(0));
    let law = r#"{"dim": 2, "support": [[0, 0], [1, 1]], "probs": [0.5, 0.5]}"#;
    assert_eq!(negassoc(&["check-na", law]).status.code(), Some(1));
}

#[test]
fn csv_summary_schema() {
    let dpp = r#"{"type": "dpp", "kernel": [[0.5, 0.3], [0.3, 0.5]]}"#;
    let out = negassoc(&["dominate", dpp, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scenario,check_name,lhs,rhs,slack,status,seed,n"));
    assert!(lines.all(|l| l.starts_with("domination,")));
}

#[test]
fn count_law_and_polarize_print_json() {
    let out = negassoc(&["count-law", r#"{"type": "mixed", "tau": [0, 1], "partition": [0.25, 0.75]}"#]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["dim"], 2);
    assert_eq!(v["atoms"].as_array().unwrap().len(), 2);

    let out = negassoc(&["polarize", r#"{"kind": "binomial", "params": {"n": 2, "p": 0.5}}"#]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn concentrate_and_sample_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"type": "mixed", "tau": {"kind": "poisson", "params": {"lambda": 2.0}}, "partition": [0.25, 0.25, 0.25]}"#;
    let mut reports = Vec::new();
    for tag in ["a", "b"] {
        let out_dir = dir.path().join(tag);
        let out = negassoc(&[
            "concentrate", spec, "--eps", "1.5", "--t", "0.5", "--b", "1,2,3", "--start", "2", "--seed", "7",
            "--reps", "2000", "--out", out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
        assert!(out_dir.join("summary.csv").exists());
    }
    assert_eq!(reports[0], reports[1]);

    let args = ["sample", spec, "--seed", "3", "--reps", "500", "--format", "json"];
    assert_eq!(negassoc(&args).stdout, negassoc(&args).stdout);
}
