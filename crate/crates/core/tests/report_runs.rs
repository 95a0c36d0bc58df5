//! End-to-end runs through the report layer.

use std::fs;

use binding_core::report::{error_record, run, Command, RunConfig};
use binding_core::Error;

fn config(command: &str, extra: &str, out: &std::path::Path) -> RunConfig {
    let text = format!(
        r#"{{"command":"{command}","potential":{{"kind":"tabulated","v0":1.0,"entries":[{{"n":[1],"v":10.0}}]}},
            "modes":{{"list":[[-2],[-1],[1],[2]]}},"out_dir":{:?},"deterministic":true{extra}}}"#,
        out.to_str().unwrap()
    );
    RunConfig::from_json(&text).unwrap()
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, extra) in [("coeffs", ""), ("rs-check", r#","nmax_sweep":[4,6]"#)] {
        let cfg = config(cmd, extra, dir.path());
        let first = run(&cfg).unwrap();
        let (csv, json) = (
            fs::read(&first.csv).unwrap(),
            fs::read(&first.json).unwrap(),
        );
        let again = run(&cfg).unwrap();
        assert_eq!(fs::read(&again.csv).unwrap(), csv);
        assert_eq!(fs::read(&again.json).unwrap(), json);
        let value: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert!(value.get("elapsed_seconds").is_none());
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(&config("coeffs", r#","workers":1"#, a.path())).unwrap();
    let rb = run(&config("coeffs", r#","workers":4"#, b.path())).unwrap();
    // Only the hash line differs: the configurations name different directories.
    let body = |p: &std::path::Path| {
        let t = fs::read_to_string(p).unwrap();
        t.split_once('\n').unwrap().1.to_string()
    };
    assert_eq!(body(&ra.csv), body(&rb.csv));
}

#[test]
fn csv_carries_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("coeffs", "", dir.path());
    let summary = run(&cfg).unwrap();
    let text = fs::read_to_string(summary.csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        format!("# config_sha256={}", cfg.hash())
    );
    assert_eq!(summary.rows, 4);
}

#[test]
fn config_round_trip_preserves_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("oracle-fit", r#","n_list":[16,24,32,48]"#, dir.path());
    let back = RunConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    assert_eq!(back.command, Command::OracleFit);
}

#[test]
fn rs_check_errors_shrink() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&config(
        "rs-check",
        r#","nmax_sweep":[4,6,8,10]"#,
        dir.path(),
    ))
    .unwrap();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(summary.csv)
        .unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (e1, e2) = (col("E1_abs_err"), col("E2_abs_err"));
    let rows: Vec<(f64, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[e1].parse().unwrap(), r[e2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1));
}

#[test]
fn malformed_config_names_field() {
    let err = RunConfig::from_json(
        r#"{"command":"coeffs","potential":{"kind":"gaussian","g":-1,"s":1},"out_dir":"x"}"#,
    )
    .unwrap_err();
    let rec = error_record(&err);
    assert_eq!(rec["exit_code"], 2);
    assert_eq!(rec["field"], "g");
    assert!(matches!(RunConfig::from_json("{"), Err(Error::Json(_))));
}
