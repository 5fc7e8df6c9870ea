use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use mlplug::LabelVector;

fn mlplug(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_mlplug"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn predict_top_k_row() {
    let o = mlplug(
        &["predict", "--rule", "topk", "--k", "2"],
        Some("0.2,0.9,0.5\n"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "0,1,1\n");
}

#[test]
fn predict_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "eta.csv",
        "0.9,0.1,0.8,0.5\n0.3, 0.3, 0.3, 0.3\n1,0,0,1\n",
    );
    let out = dir.path().join("labels.csv");
    let o = mlplug(
        &[
            "predict",
            "--rule",
            "beta",
            "--beta",
            "1",
            "--input",
            &input,
            "--output",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let rows: Vec<LabelVector> = reader
        .records()
        .map(|r| {
            let bits: Vec<u8> = r.unwrap().iter().map(|f| f.parse().unwrap()).collect();
            LabelVector::from_bits(&bits).unwrap()
        })
        .collect();
    assert_eq!(rows.len(), 3);
    let rendered: Vec<String> = rows.iter().map(|r| r.to_string()).collect();
    assert_eq!(rendered.join("\n") + "\n", text);
    // spends 0.1 + 0.2 + 0.5 of the budget
    assert_eq!(rendered[0], "1,0,1,1");
    // the two certain labels are free, so one zero-probability label fits
    assert_eq!(rendered[2], "1,1,0,1");
}

#[test]
fn predict_rejects_bad_rows() {
    let o = mlplug(&["predict", "--rule", "full"], Some("0.2,abc\n"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"));
    let o = mlplug(
        &["predict", "--rule", "topk", "--k", "5"],
        Some("0.2,0.3\n"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--k"), "{}", stderr(&o));
    let o = mlplug(
        &["predict", "--rule", "mixed", "--k", "1"],
        Some("0.2,0.3\n"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--beta"));
}

#[test]
fn oracle_check_reports_zero_violations() {
    let o = mlplug(
        &["oracle-check", "--L", "8", "--trials", "500", "--seed", "7"],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("violations=0"));
    let o = mlplug(&["oracle-check", "--L", "21", "--trials", "1"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--L"));
}

#[test]
fn missing_config_names_path() {
    let o = mlplug(&["rates", "--config", "missing.json"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"));
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"family\": ");
    let o = mlplug(&["risk", "--dist", &bad, "--rule", "full"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.json"));
    assert_eq!(mlplug(&["no-such-command"], None).status.code(), Some(1));
    assert_eq!(mlplug(&["--help"], None).status.code(), Some(0));
}

#[test]
fn risk_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let dist = write(dir.path(), "d.json", r#"{"family":"two_label_linear"}"#);
    let o = mlplug(
        &[
            "risk", "--dist", &dist, "--rule", "topk", "--k", "1", "--seed", "3",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let value = v["risk"]["value"].as_f64().unwrap();
    let se = v["risk"]["std_error"].as_f64().unwrap();
    assert!((value - 0.125).abs() <= 3.0 * se);

    let stairs = write(
        dir.path(),
        "s.json",
        r#"{"family":"beta_staircase","labels":3,"beta":1.0,
            "cells":[{"weight":1.0,"k":1,"eta_high":0.9,"eta_low":0.05}]}"#,
    );
    let o = mlplug(
        &["risk", "--dist", &stairs, "--rule", "beta", "--beta", "1"],
        None,
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["risk"]["exact"], true);
    assert!((v["risk"]["value"].as_f64().unwrap() - 0.1 / 3.0).abs() < 1e-12);
}

#[test]
fn rates_writes_csv_and_summary_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"dist":{"family":"two_label_linear"},
            "estimator":{"gamma":1.0,"c0":0.5},
            "rule":{"kind":"top_k","k":1},
            "n_grid":[16,64,256,1024],"replicates":3,"samples":5000,"master_seed":1}"#,
    );
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let summary = dir.path().join(format!("{name}.json"));
        let o = mlplug(
            &[
                "--threads",
                threads,
                "rates",
                "--config",
                &cfg,
                "--seed",
                "9",
                "--output",
                out.to_str().unwrap(),
                "--summary",
                summary.to_str().unwrap(),
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (
            fs::read_to_string(out).unwrap(),
            fs::read_to_string(summary).unwrap(),
        )
    };
    let (a, summary) = run("a.csv", "1");
    let (b, _) = run("b.csv", "3");
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(
        lines.next(),
        Some("n,replicate,excess_signed,excess_abs,oracle_risk")
    );
    assert_eq!(lines.count(), 12);
    let s: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(s["config"]["master_seed"], 9);
    assert!(s["fit"]["slope"].as_f64().unwrap() < 0.0);
}

#[test]
fn lowerbound_csv() {
    let o = mlplug(
        &[
            "lowerbound",
            "--n-grid",
            "128,512",
            "--replicates",
            "400",
            "--seed",
            "2",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,phi_inv,excess_plus,excess_minus,max_scaled")
    );
    for line in lines {
        let max_scaled: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(max_scaled >= 0.05, "{line}");
    }
    let o = mlplug(&["lowerbound", "--n-grid", "512,128"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--n-grid"));
}

#[test]
fn assumptions_report_separates_margins() {
    let dir = tempfile::tempdir().unwrap();
    let dist = write(
        dir.path(),
        "pm.json",
        r#"{"family":"lowerbound_pm","rho":-1,"phi_inv":0.0625,"labels":4}"#,
    );
    let o = mlplug(
        &[
            "assumptions",
            "--dist",
            &dist,
            "--samples",
            "20000",
            "--sparsity-bound",
            "2",
            "--seed",
            "4",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"]["local_margin"], "holds");
    assert_eq!(v["status"]["sparsity"], "holds");
    assert_eq!(v["status"]["global_margin"], "fails");
    assert_eq!(v["status"]["embedding"], "holds");
    assert!((v["sparsity"]["empirical_sup"].as_f64().unwrap() - 1.0625).abs() < 1e-12);

    let poly = write(
        dir.path(),
        "poly.json",
        r#"{"family":"topk_poly_margin","alpha":1.0,"labels":4,"k":2}"#,
    );
    let o = mlplug(
        &[
            "assumptions",
            "--dist",
            &poly,
            "--k",
            "2",
            "--samples",
            "50000",
        ],
        None,
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let alpha = v["top_k_margin"]["tail"]["fit"]["exponent"]
        .as_f64()
        .unwrap();
    assert!((alpha - 1.0).abs() < 0.15, "{alpha}");
}
