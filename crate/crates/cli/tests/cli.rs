use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ecg_gaf::nn::Tensor;
use ecg_gaf::signal_io::synthetic::synthetic_dataset;

fn write_csv(path: &Path, per_class: &[usize]) {
    let ds = synthetic_dataset(per_class, 3).unwrap();
    let mut s = String::new();
    for r in ds.records() {
        for v in r.samples() {
            write!(s, "{v:.18e},").unwrap();
        }
        writeln!(s, "{:.18e}", r.label() as f64).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecg-gaf"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    csv: PathBuf,
}

fn fixture(per_class: &[usize]) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let csv = root.join("beats.csv");
    write_csv(&csv, per_class);
    Fixture {
        _dir: dir,
        root,
        csv,
    }
}

#[test]
fn encode_writes_one_tensor_per_record() {
    let f = fixture(&[2, 2, 2, 2, 2]);
    let out = f.root.join("enc");
    ok(&[
        "--out-dir",
        s(&out),
        "encode",
        "--train-csv",
        s(&f.csv),
        "--export-png",
        "1",
    ]);
    let dir = out.join("encoded/train");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert_eq!(files.len(), 10);
    assert_eq!(Tensor::load(&files[0]).unwrap().dims(), &[32, 32, 3]);
    let pngs = std::fs::read_dir(out.join("png")).unwrap().count();
    assert_eq!(pngs, 1);
    assert!(out.join("encode.manifest.json").is_file());
}

#[test]
fn encode_packed_full_size_single_channel() {
    let f = fixture(&[1, 1, 1, 0, 0]);
    let out = f.root.join("enc");
    ok(&[
        "--out-dir",
        s(&out),
        "encode",
        "--train-csv",
        s(&f.csv),
        "--packed",
        "--size",
        "187",
        "--channels",
        "1",
    ]);
    let t = Tensor::load(out.join("encoded/train.gaf")).unwrap();
    assert_eq!(t.dims(), &[3, 187, 187, 1]);
}

#[test]
fn train_evaluate_report_smoke() {
    let f = fixture(&[20, 20, 20, 20, 20]);
    let out = f.root.join("run");
    ok(&[
        "--out-dir",
        s(&out),
        "--seed",
        "1",
        "train",
        "--train-csv",
        s(&f.csv),
        "--epochs",
        "1",
        "--subsample-fraction",
        "0.1",
    ]);
    for name in ["model.cnn", "loss_trace.csv", "train.manifest.json"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("train.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["datasets"][0]["records"], 10);
    assert!(manifest["timings_s"]["train"].as_f64().is_some());

    let eval = ok(&[
        "--out-dir",
        s(&out),
        "evaluate",
        "--checkpoint",
        s(&out.join("model.cnn")),
        "--test-csv",
        s(&f.csv),
    ]);
    let stdout = String::from_utf8(eval.stdout).unwrap();
    assert!(
        stdout.contains("accuracy=") && stdout.contains("f1_weighted="),
        "{stdout}"
    );
    let metrics = std::fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(metrics.contains("confusion_row_4="));

    let report = ok(&["--out-dir", s(&out), "report"]);
    assert!(String::from_utf8(report.stdout)
        .unwrap()
        .contains("f1 weighted"));
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let f = fixture(&[8, 8, 8, 8, 8]);
    let mut bytes = Vec::new();
    for run_name in ["a", "b"] {
        let out = f.root.join(run_name);
        ok(&[
            "--out-dir",
            s(&out),
            "--seed",
            "7",
            "train",
            "--train-csv",
            s(&f.csv),
            "--epochs",
            "1",
            "--no-cache",
        ]);
        bytes.push(std::fs::read(out.join("model.cnn")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn corrupt_checkpoint_fails_cleanly() {
    let f = fixture(&[2, 2, 2, 2, 2]);
    let ckpt = f.root.join("bad.cnn");
    std::fs::write(&ckpt, b"XXXX\x0c\0\0\0").unwrap();
    let out = run(&[
        "--out-dir",
        s(&f.root.join("e")),
        "evaluate",
        "--checkpoint",
        s(&ckpt),
        "--test-csv",
        s(&f.csv),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a checkpoint"));
}

#[test]
fn class_count_beyond_checkpoint_is_rejected() {
    let f = fixture(&[4, 4, 4, 4, 4]);
    let out = f.root.join("run");
    ok(&[
        "--out-dir",
        s(&out),
        "train",
        "--train-csv",
        s(&f.csv),
        "--epochs",
        "1",
    ]);
    let res = run(&[
        "--out-dir",
        s(&out),
        "evaluate",
        "--checkpoint",
        s(&out.join("model.cnn")),
        "--test-csv",
        s(&f.csv),
        "--num-classes",
        "6",
    ]);
    assert!(!res.status.success());
    let res = run(&[
        "--out-dir",
        s(&out),
        "evaluate",
        "--checkpoint",
        s(&out.join("model.cnn")),
        "--test-csv",
        s(&f.csv),
        "--size",
        "24",
    ]);
    assert!(!res.status.success());
}

#[test]
fn missing_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "--out-dir",
        s(dir.path()),
        "train",
        "--train-csv",
        "/nonexistent.csv",
    ]);
    assert!(!res.status.success());
    let res = run(&["--out-dir", s(dir.path()), "encode"]);
    assert!(!res.status.success());
}
