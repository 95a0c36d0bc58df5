//! Runs the `binding-bench` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const POTENTIAL: &str = r#"{"kind":"tabulated","v0":1.0,"entries":[{"n":[1],"v":10.0}]}"#;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binding-bench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn bench_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binding-bench"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, body)
}

fn column(header: &[String], body: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap();
    body.iter().map(|r| r[i].clone()).collect()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("JSON error record");
    serde_json::from_str(line).unwrap()
}

#[test]
fn coeffs_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = bench(&[
        "coeffs",
        "--potential",
        POTENTIAL,
        "--out",
        out,
        "--deterministic",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (h, b) = rows(&dir.path().join("coeffs.csv"));
    assert_eq!(column(&h, &b, "n"), ["[-2]", "[-1]", "[1]", "[2]"]);
    assert_eq!(column(&h, &b, "vhat"), ["0", "10", "10", "0"]);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("coeffs.json")).unwrap()).unwrap();
    let e1 = json["result"][0]["e1_binding"].as_f64().unwrap();
    assert!((e1 + 1.852_954_055_927_467_5).abs() < 1e-14);
    assert!(json["config_sha256"].is_string());
    assert!(json.get("elapsed_seconds").is_none());
}

#[test]
fn series_is_constant_beyond_closure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = bench(&[
        "series",
        "--potential",
        POTENTIAL,
        "--cutoffs",
        "7,13,19,26",
        "--out",
        out,
    ]);
    assert!(res.status.success());
    let (h, b) = rows(&dir.path().join("series.csv"));
    let e2 = column(&h, &b, "e2b");
    let flags = column(&h, &b, "closure_violation");
    assert_eq!(flags, ["true", "false", "false", "false"]);
    assert!(e2[1..].iter().all(|v| v == &e2[1]));
    assert_ne!(e2[0], e2[1]);
}

#[test]
fn rs_check_errors_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let modes = dir.path().join("modes.json");
    fs::write(&modes, "[[-2],[-1],[1],[2]]").unwrap();
    let spec = format!("list:{}", modes.display());
    let res = bench(&[
        "rs-check",
        "--potential",
        POTENTIAL,
        "--modes",
        &spec,
        "--nmax-sweep",
        "4,6,8,10",
        "--out",
        out,
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (h, b) = rows(&dir.path().join("rs-check.csv"));
    for name in ["E1_abs_err", "E2_abs_err"] {
        let v: Vec<f64> = column(&h, &b, name)
            .iter()
            .map(|x| x.parse().unwrap())
            .collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]), "{name}: {v:?}");
    }
}

#[test]
fn oracle_fit_and_scaling_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = bench(&[
        "oracle-fit",
        "--potential",
        POTENTIAL,
        "--N-list",
        "16,24,32,64",
        "--out",
        out,
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (h, b) = rows(&dir.path().join("oracle-fit.csv"));
    assert_eq!(column(&h, &b, "N"), ["16", "24", "32", "64"]);
    let gauss = r#"{"kind":"gaussian","g":2.0,"s":4.0}"#;
    let res = bench(&[
        "scaling",
        "--potential",
        gauss,
        "--dim",
        "1",
        "--lambda-scale",
        "1,2,4",
        "--out",
        out,
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(rows(&dir.path().join("scaling.csv")).1.len(), 3);
}

#[test]
fn deterministic_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = [
        "series",
        "--potential",
        POTENTIAL,
        "--cutoffs",
        "13,19",
        "--out",
        out,
        "--deterministic",
    ];
    assert!(bench(&args).status.success());
    let csv = fs::read(dir.path().join("series.csv")).unwrap();
    let json = fs::read(dir.path().join("series.json")).unwrap();
    assert!(bench(&args).status.success());
    assert_eq!(fs::read(dir.path().join("series.csv")).unwrap(), csv);
    assert_eq!(fs::read(dir.path().join("series.json")).unwrap(), json);
}

#[test]
fn run_replays_serialized_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(bench(&[
        "coeffs",
        "--potential",
        POTENTIAL,
        "--out",
        out,
        "--deterministic"
    ])
    .status
    .success());
    let csv = fs::read(dir.path().join("coeffs.csv")).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("coeffs.json")).unwrap()).unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, json["config"].to_string()).unwrap();
    let res = bench(&["run", "--config", config.to_str().unwrap()]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(fs::read(dir.path().join("coeffs.csv")).unwrap(), csv);
}

#[test]
fn malformed_potential_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = bench(&[
        "coeffs",
        "--potential",
        r#"{"kind":"gaussian","g":1.0,"s":-2.0}"#,
        "--dim",
        "1",
        "--modes",
        "ball:20",
        "--out",
        out,
    ]);
    assert_eq!(res.status.code(), Some(2));
    let rec = stderr_json(&res);
    assert_eq!(rec["field"], "s");
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("error.json")).unwrap()).unwrap();
    assert_eq!(saved, rec);

    let res = bench(&["coeffs", "--potential", "{\"kind\":", "--out", out]);
    assert_eq!(res.status.code(), Some(2));
    let res = bench(&[
        "series",
        "--potential",
        POTENTIAL,
        "--cutoffs",
        "7,x",
        "--out",
        out,
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_json(&res)["field"], "cutoffs");
}

#[test]
fn size_limit_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = bench_env(
        &[
            "oracle-fit",
            "--potential",
            POTENTIAL,
            "--N-list",
            "16,24,32,64",
            "--out",
            out,
        ],
        "BINDING_BENCH_DIM_LIMIT",
        "10",
    );
    assert_eq!(res.status.code(), Some(5));
    assert_eq!(stderr_json(&res)["limit"], 10);
}
