use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hetnet-tr"));
    c.env_remove("HETNET_TR_THREADS").env("RUST_LOG", "off");
    c
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path, threads: Option<&str>) -> Output {
    let mut c = bin();
    c.arg("run").args(args).arg("--config").arg(config).arg("--out").arg(out);
    if let Some(t) = threads {
        c.env("HETNET_TR_THREADS", t);
    }
    c.output().unwrap()
}

#[test]
fn validate_accepts_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "ok.toml", "[power]\ngamma_f_db = 2.0\n");
    let out = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("config ok"));
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let unknown = write_config(&dir, "bad.toml", "[power]\ngamma = 1.0\n");
    let out = bin().args(["validate", "--config"]).arg(&unknown).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("absent.toml");
    let out = bin().args(["validate", "--config"]).arg(&missing).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let bad_range = write_config(&dir, "psi.toml", "[robust]\npsi = 1.5\n");
    let out = bin().args(["validate", "--config"]).arg(&bad_range).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let ok = write_config(&dir, "ok.toml", "");
    let csv = dir.path().join("x.csv");
    let out = run(&["--experiment", "fu-outage", "--sweep", "gamma_f_db=1"], &ok, &csv, None);
    assert_eq!(out.status.code(), Some(2), "foreign sweep key");
    let out = run(&["--experiment", "bound-tightness", "--sweep", "psi=0.05,1.2"], &ok, &csv, None);
    assert_eq!(out.status.code(), Some(2), "psi out of range");
    let out = run(&["--experiment", "power-compare", "--trials", "0"], &ok, &csv, None);
    assert_eq!(out.status.code(), Some(2), "zero trials");
    let out = run(&["--experiment", "no-such-thing"], &ok, &csv, None);
    assert_eq!(out.status.code(), Some(2), "unknown experiment");
    assert!(!csv.exists());

    let unwritable = dir.path().join("no-such-dir").join("x.csv");
    let out = run(&["--experiment", "power-compare", "--trials", "1"], &ok, &unwritable, None);
    assert_eq!(out.status.code(), Some(2), "unwritable output path");
}

#[test]
fn run_writes_csv_independent_of_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.toml", "[robust]\nerror_draws = 100\n");
    let args = ["--experiment", "power-compare", "--trials", "12", "--seed", "4", "--sweep", "gamma_f_db=0,2"];
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, threads) in [(&a, None), (&b, Some("1")), (&c, Some("2"))] {
        let out = run(&args, &cfg, path, threads);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());
    assert_eq!(first, fs::read(&c).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("kind,trial,gamma_m_db,gamma_f_db,"));
    // 12 trials x 3 gamma_M x 2 gamma_F, plus 6 summary rows
    assert_eq!(text.lines().count(), 1 + 72 + 6);
}

#[test]
fn infeasible_everywhere_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.toml", "");
    let csv = dir.path().join("x.csv");
    let out = run(
        &["--experiment", "power-compare", "--trials", "3", "--sweep", "gamma_m_db=40", "--sweep", "gamma_f_db=40"],
        &cfg,
        &csv,
        None,
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(csv.exists());
}
