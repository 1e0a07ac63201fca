use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn epic(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epic"))
        .current_dir(dir)
        .env_remove("EPIC_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = epic(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) {
    fs::write(dir.join("epic.json"), body).unwrap();
}

const COMPACT: &str = r#"{
    "n_devices": 5,
    "network": {"b": 15e6, "l": 0.05, "p": 0.0},
    "model": "compact",
    "samples": 3,
    "seeds": {"data": 1, "weights": 2, "faults": 3, "link": 4},
    "bench": {"devices": [2, 5, 7, 10], "samples": 2}
}"#;

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn gen_data_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), r#"{"n_devices": 5, "network": {"b": 15e6, "l": 0.05, "p": 0.0}}"#);
    let args = ["gen-data", "--seed", "7", "--n", "32", "--family", "layered"];
    ok(tmp.path(), &[&args[..], &["--out", "a"]].concat());
    ok(tmp.path(), &[&args[..], &["--out", "b"]].concat());
    let a = read_dir_sorted(&tmp.path().join("a"));
    assert_eq!(a.len(), 33);
    assert_eq!(a, read_dir_sorted(&tmp.path().join("b")));
}

#[test]
fn seed_environment_variable_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), COMPACT);
    ok(tmp.path(), &["gen-data", "--n", "1", "--out", "plain"]);
    let out = Command::new(env!("CARGO_BIN_EXE_epic"))
        .current_dir(tmp.path())
        .env("EPIC_SEED", "99")
        .args(["gen-data", "--n", "1", "--out", "seeded"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let sample = "sample_00000.tnsr";
    assert_ne!(
        fs::read(tmp.path().join("plain").join(sample)).unwrap(),
        fs::read(tmp.path().join("seeded").join(sample)).unwrap()
    );
}

#[test]
fn bench_rows_cover_every_mode_and_device_count_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), COMPACT);
    ok(tmp.path(), &["bench", "--out", "first"]);
    ok(tmp.path(), &["bench", "--out", "second"]);
    let first = fs::read(tmp.path().join("first/bench.csv")).unwrap();
    assert_eq!(first, fs::read(tmp.path().join("second/bench.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    let mut keys: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect();
    assert_eq!(keys.len(), 16);
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 16);
}

#[test]
fn run_with_drop_reports_reduced_mask_and_report_tables() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), COMPACT);
    ok(tmp.path(), &["gen-data"]);
    ok(tmp.path(), &["gen-weights"]);
    let stdout = ok(tmp.path(), &["run", "--mode", "epic", "--drop", "1"]);
    assert!(stdout.starts_with("mode,n_devices,"));
    let samples = fs::read_to_string(tmp.path().join("reports/samples_epic.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(samples.as_bytes());
    let mask_col = reader.headers().unwrap().iter().position(|h| h == "mask").unwrap();
    let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r[mask_col].chars().filter(|&c| c == '1').count(), 4);
    }

    ok(tmp.path(), &["run", "--mode", "centralized"]);
    ok(tmp.path(), &["report", "reports/run_epic.json", "reports/run_centralized.json", "--out", "tables"]);
    let summary = fs::read_to_string(tmp.path().join("tables/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("epic,5,"));
    assert!(lines[2].starts_with("centralized,5,"));
}

#[test]
fn malformed_config_exits_nonzero_with_pointer() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), r#"{"n_devices": 5, "network": {"b": "fast", "l": 0.05, "p": 0.0}}"#);
    let out = epic(tmp.path(), &["gen-weights"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/network/b"), "{stderr}");

    write_config(tmp.path(), COMPACT);
    assert!(!epic(tmp.path(), &["run", "--drop", "6"]).status.success());
    assert!(!epic(tmp.path(), &["run", "--mode", "bogus"]).status.success());
    assert!(!epic(tmp.path(), &["--config", "missing.json", "bench"]).status.success());
}
