//! End-to-end checks of the command-line interface.

use std::path::Path;
use std::process::{Command, Output};

use ris_anm::harness::{read_results, CSV_HEADER};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-anm"))
        .args(args)
        .env("RIS_ANM_THREADS", "2")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn table1_lists_five_setups_at_forty_slots() {
    let out = cli(&["table1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.trim_end().ends_with("40")), "{text}");
}

#[test]
fn validate_accepts_good_and_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "trials = 5\nsnr_grid_db = [0.0]\n");
    let out = cli(&["validate", "--config", &good]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("trials = 5"));

    let bad = write_config(dir.path(), "trails = 5\n");
    assert_eq!(cli(&["validate", "--config", &bad]).status.code(), Some(1));
    assert_eq!(cli(&["validate", "--config", "/nonexistent.toml"]).status.code(), Some(1));
}

#[test]
fn run_writes_complete_csv_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 9\n");
    let out_dir = dir.path().join("out");
    let out = cli(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--trials",
        "2",
        "--arch",
        "setup3,full_active",
        "--snr",
        "-5,5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.join("results.csv.incomplete").exists());
    let text = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(text.starts_with(CSV_HEADER) && !text.contains('\r'));
    let rows = read_results(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 7);
    assert!(rows.iter().all(|r| r.trials == 2 && r.failures == 0));
    assert_eq!(rows[0].snr_db, -5.0);
    assert!(out_dir.join("mse_phi_rm.svg").exists() && out_dir.join("se_bits.svg").exists());
}

#[test]
fn run_rejects_bad_overrides_and_reports_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert_eq!(cli(&["run", "--config", &cfg, "--trials", "0"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--config", &cfg, "--arch", "setup9"]).status.code(), Some(1));
    assert_eq!(cli(&["run"]).status.code(), Some(1));

    let blocker = dir.path().join("not_a_dir");
    std::fs::write(&blocker, "").unwrap();
    let out = cli(&[
        "run",
        "--config",
        &cfg,
        "--out",
        blocker.to_str().unwrap(),
        "--trials",
        "1",
        "--arch",
        "setup3",
        "--snr",
        "0",
        "--no-plots",
    ]);
    assert_eq!(out.status.code(), Some(3));
}
