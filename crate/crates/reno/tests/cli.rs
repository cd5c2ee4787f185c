//! End-to-end tests of the reno binary: exit codes, artifact formats,
//! and byte-level determinism of generated files.

use std::path::PathBuf;
use std::process::{Command, Output};

fn reno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reno"))
        .args(args)
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = reno(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Workspace { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_str().unwrap().to_string()
    }

    fn dataset(&self, name: &str, k: &str, n: &str, seed: &str) -> String {
        let out = self.path(name);
        run_ok(&["gen-data", "--K", k, "--n", n, "--seed", seed, "--out", &out]);
        out
    }
}

#[test]
fn gen_data_is_byte_deterministic() {
    let ws = Workspace::new();
    let a = ws.dataset("a.rno", "8", "6", "42");
    let b = ws.dataset("b.rno", "8", "6", "42");
    let c = ws.dataset("c.rno", "8", "6", "43");
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap());
    assert_ne!(bytes_a, std::fs::read(&c).unwrap());
    assert_eq!(&bytes_a[..4], b"RNO1");
}

#[test]
fn train_writes_checkpoint_and_loss_history() {
    let ws = Workspace::new();
    let data = ws.dataset("d.rno", "4", "4", "1");
    let ckpt = ws.path("m.ckpt");
    let losses = ws.path("loss.csv");
    let stdout = run_ok(&[
        "train", "--data", &data, "--model", "cnn", "--epochs", "25",
        "--seed", "3", "--out", &ckpt, "--loss-out", &losses,
    ]);
    assert!(stdout.contains("final loss"), "stdout: {stdout}");
    assert_eq!(&std::fs::read(&ckpt).unwrap()[..4], b"RNO1");
    let csv = std::fs::read_to_string(&losses).unwrap();
    assert!(csv.starts_with("epoch,loss\n"));
    // initial loss plus one line per epoch
    assert_eq!(csv.lines().count(), 27);
}

#[test]
fn eval_emits_csv_and_svg() {
    let ws = Workspace::new();
    let data = ws.dataset("d.rno", "4", "4", "1");
    let ckpt = ws.path("m.ckpt");
    run_ok(&[
        "train", "--data", &data, "--model", "sno", "--epochs", "10",
        "--seed", "2", "--out", &ckpt,
    ]);
    let csv_path = ws.path("curve.csv");
    run_ok(&[
        "eval", "--model", &ckpt, "--data", &data, "--resolutions", "9:15:2",
        "--out", &csv_path,
    ]);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("resolution,error,model,train_resolution\n"));
    assert_eq!(csv.lines().count(), 5);
    let svg = std::fs::read_to_string(ws.path("curve.svg")).unwrap();
    assert!(svg.starts_with("<svg"));

    // reruns produce identical artifacts
    let csv2_path = ws.path("curve2.csv");
    run_ok(&[
        "eval", "--model", &ckpt, "--data", &data, "--resolutions", "9,11,13,15",
        "--out", &csv2_path,
    ]);
    assert_eq!(csv, std::fs::read_to_string(&csv2_path).unwrap());
    assert_eq!(svg, std::fs::read_to_string(ws.path("curve2.svg")).unwrap());
}

#[test]
fn eval_rejects_even_resolutions() {
    let ws = Workspace::new();
    let data = ws.dataset("d.rno", "3", "2", "1");
    let ckpt = ws.path("m.ckpt");
    run_ok(&[
        "train", "--data", &data, "--model", "sno", "--epochs", "5",
        "--seed", "1", "--out", &ckpt,
    ]);
    let out = reno(&[
        "eval", "--model", &ckpt, "--data", &data, "--resolutions", "7,8",
        "--out", &ws.path("x.csv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn aliasing_map_reports_ratio() {
    let ws = Workspace::new();
    let data = ws.dataset("d.rno", "3", "3", "5");
    let ckpt = ws.path("m.ckpt");
    run_ok(&[
        "train", "--data", &data, "--model", "sno", "--epochs", "5",
        "--seed", "1", "--out", &ckpt,
    ]);
    let csv_path = ws.path("alias.csv");
    let stdout = run_ok(&[
        "aliasing-map", "--model", &ckpt, "--data", &data,
        "--resolution-a", "7", "--resolution-b", "11", "--out", &csv_path,
    ]);
    assert!(stdout.contains("norm estimate"), "stdout: {stdout}");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.lines().count() > 1);
}

#[test]
fn spectrum_reports_tail_energy() {
    let ws = Workspace::new();
    let csv_path = ws.path("spec.csv");
    run_ok(&[
        "spectrum", "--act", "relu", "--K", "5", "--probe", "40",
        "--seed", "7", "--out", &csv_path,
    ]);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("k,magnitude,tail_fraction_above_abs_k\n"));
    // one line per mode in [-probe, probe] plus the header
    assert_eq!(csv.lines().count(), 82);
    assert!(!csv.contains("-0.0000"));
}

#[test]
fn check_exit_codes_distinguish_pass_and_fail() {
    let ok = reno(&["check", "--stack", "square", "--K", "3", "--seed", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("pass"));

    let bad = reno(&["check", "--stack", "square-narrow", "--K", "3", "--seed", "1"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));

    let linear = reno(&["check", "--stack", "linear2", "--K", "4", "--seed", "2"]);
    assert_eq!(linear.status.code(), Some(0));
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert_eq!(reno(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(reno(&["gen-data", "--bogus", "1"]).status.code(), Some(1));
    let ws = Workspace::new();
    let data = ws.dataset("d.rno", "3", "2", "1");
    let out = reno(&[
        "train", "--data", &data, "--model", "mystery", "--epochs", "5",
        "--seed", "1", "--out", &ws.path("m.ckpt"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(reno(&["--help"]).status.code(), Some(0));
    assert_eq!(reno(&["--version"]).status.code(), Some(0));
}

#[test]
fn thread_cap_env_is_validated() {
    let run_with = |val: &str| -> Option<i32> {
        Command::new(env!("CARGO_BIN_EXE_reno"))
            .env("RENO_THREADS", val)
            .args(["check", "--stack", "square", "--K", "2", "--seed", "1"])
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(run_with("1"), Some(0));
    assert_eq!(run_with("0"), Some(1));
    assert_eq!(run_with("many"), Some(1));
}
