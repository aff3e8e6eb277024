use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hbl::report::read_report;

fn hbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbl")).args(args).env_remove("HBL_THREADS").output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(hbl(&["--help"]).status.code(), Some(0));
    assert_eq!(hbl(&["nonsense"]).status.code(), Some(2));
    assert_eq!(hbl(&["solve", "--geometry", "circle"]).status.code(), Some(2));
    assert_eq!(hbl(&["solve", "--geometry", "circle", "--k", "4", "--eta", "0"]).status.code(), Some(2));
    assert_eq!(hbl(&["study", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
    let o = hbl(&["solve", "--geometry", "circle", "--k", "3000"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let o = Command::new(env!("CARGO_BIN_EXE_hbl")).args(["selftest"]).env("HBL_THREADS", "many").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    // A censored solve is a verdict failure.
    let o = hbl(&["solve", "--geometry", "circle", "--k", "16", "--maxit", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("converged false"));
}

#[test]
fn solve_reports_mie_error() {
    let o = hbl(&["--threads", "1", "solve", "--geometry", "circle", "--k", "16", "--eta", "k", "--ppw", "10"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(value(&text, "dof"), 160.0);
    let e = value(&text, "mie_relative_error");
    assert!(e > 0.05 && e <= 0.10, "{e}");
    assert!(value(&text, "quasi_optimality") >= 1.0);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = hbl(&["solve", "--geometry", "kite", "--k", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(!stdout(&o).contains("mie_relative_error"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    assert!(json["mie_relative_error"].is_null());
    assert_eq!(json["density"].as_array().unwrap().len(), json["dof"].as_u64().unwrap() as usize);
    let csv = std::fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert_eq!(csv.lines().count(), json["iterations"].as_u64().unwrap() as usize + 2);
}

#[test]
fn study_writes_only_with_out() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hbl"))
        .current_dir(dir.path())
        .args(["study", "--config", config("norms_circle.cfg").to_str().unwrap(), "--k-list", "16,32,64,128"])
        .output()
        .unwrap();
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    assert!(stdout(&o).starts_with("k,dof,h,"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    let out = dir.path().join("norms");
    let o = hbl(&["study", "--config", config("norms_circle.cfg").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report = read_report(&out.join("report.json")).unwrap();
    assert_eq!(report.config.k_list, vec![16.0, 32.0, 64.0, 128.0, 256.0]);
    assert_eq!(report.rows.len(), 5);
    assert!(report.verdicts.iter().all(|v| v.criterion == "C6" && v.passed));
    let csv = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), report.columns.join(","));
    assert_eq!(csv, report.table_csv());
}

#[test]
fn study_override_replaces_config_k() {
    let o = hbl(&["study", "--config", config("eta_sign_circle.cfg").to_str().unwrap(), "--k", "32"]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).take_while(|l| !l.starts_with("fit") && !l.starts_with("PASS") && !l.starts_with("FAIL")).collect();
    assert_eq!(rows.len(), 1, "{text}");
    assert_eq!(rows[0].split(',').next().unwrap().parse::<f64>().unwrap(), 32.0);
}

#[test]
fn modes_and_probe_subcommands() {
    let o = hbl(&["modes", "--k", "20", "--eta", "-k"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(value(&text, "sup_slp") > 0.0);

    let o = hbl(&["probe", "--geometry", "segment", "--k-list", "32,64,128,256"]);
    assert!(o.status.success());
    let line = stdout(&o).lines().find(|l| l.starts_with("slope ")).unwrap().to_string();
    let slope: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((slope + 0.5).abs() < 0.15, "{slope}");

    assert_eq!(hbl(&["probe", "--geometry", "circle"]).status.code(), Some(2));
}

#[test]
fn assemble_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbl(&["assemble", "--geometry", "circle", "--k", "4", "--ppw", "10", "--operator", "direct", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stem = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "json"))
        .unwrap()
        .with_extension("");
    let (meta, matrix) = hbl::assembly::read_dump(&stem).unwrap();
    assert_eq!(matrix.rows(), 40);
    assert_eq!(meta.dof, 40);
}
