//! Runs the binary and checks outputs and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use ris_hybrid::dataio::load_dataset;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-hybrid")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const FAST: [&str; 6] = ["--set", "ceo_iterations=4", "--set", "ceo_candidates=30", "--set", "epochs=2"];

fn generate(dir: &Path, extra: &[&str]) -> Output {
    let d = dir.to_str().unwrap();
    let mut args = vec!["generate", "--out-dir", d, "--q", "40", "--n", "8"];
    args.extend_from_slice(&FAST);
    args.extend_from_slice(extra);
    bin(&args)
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&bin(&["frobnicate"])), 1);
    assert_eq!(code(&bin(&["generate", "--snr-grid", "5,0"])), 1);
    assert_eq!(code(&bin(&["generate", "--n", "15", "--k", "2"])), 1);
    assert_eq!(code(&bin(&["generate", "--set", "nonsense=1"])), 1);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(&["train", "--out-dir", dir.path().to_str().unwrap()])), 1);
    assert_eq!(code(&bin(&["--help"])), 0);
}

#[test]
fn negative_snr_grid_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate(dir.path(), &["--snr-grid", "-10,-5,0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn full_cycle_and_csv_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = generate(dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("wrote 40 samples"));
    assert!(stdout.contains("mean labeled rate"));

    let mut args = vec!["train", "--out-dir", d, "--set", "marked_epoch_stride=1", "--set", "stop_threshold=1e-9"];
    args.extend_from_slice(&FAST);
    assert_eq!(code(&bin(&args)), 0);
    let history = std::fs::read_to_string(dir.path().join("mse_history.csv")).unwrap();
    // 8 classifiers × 3 marked epochs (0, 1, 2), 3 mean rows, header.
    assert_eq!(history.lines().count(), 1 + 24 + 3);
    assert!(history.starts_with("epoch,classifier_index,train_mse,val_mse\n"));

    let eval = ["evaluate", "--out-dir", d, "--oracle", "--set", "bench_batches=5,10", "--set", "bench_repeats=1"];
    let out = bin(&eval);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rates = std::fs::read_to_string(dir.path().join("rate_vs_snr.csv")).unwrap();
    let header = rates.lines().next().unwrap();
    assert!(header.starts_with("snr_db,dlmdc_rate_bits_per_s_per_hz"));
    assert!(header.contains("exhaustive_rate_bits_per_s_per_hz"));
    assert_eq!(rates.lines().count(), 1 + 6);
    let runtime = std::fs::read_to_string(dir.path().join("runtime.csv")).unwrap();
    assert_eq!(runtime.lines().count(), 3);
    assert!(runtime.starts_with("batch_size,dlmdc_seconds,ceo_seconds"));

    // Exhaustive dominates every scheme on every channel.
    let cdf = std::fs::read_to_string(dir.path().join("rate_cdf.csv")).unwrap();
    let best: f64 = cdf
        .lines()
        .filter(|l| l.contains(",exhaustive,"))
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    let dl: f64 = cdf
        .lines()
        .filter(|l| l.contains(",dlmdc,"))
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!(dl <= best);

    assert_eq!(code(&bin(&["sweep", "--out-dir", d, "--snr-grid", "0,10"])), 0);
    let out = bin(&["bench", "--out-dir", d, "--set", "bench_batches=3", "--set", "bench_repeats=1"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn seed_reproduces_file() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate(a.path(), &["--seed", "17"]);
    generate(b.path(), &["--seed", "17"]);
    assert_eq!(
        std::fs::read(a.path().join("dataset.bin")).unwrap(),
        std::fs::read(b.path().join("dataset.bin")).unwrap()
    );
}

#[test]
fn corrupt_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), &[]);
    let path = dir.path().join("dataset.bin");
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(&path, bytes).unwrap();
    let out = bin(&["train", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn mismatched_model_exits_2() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate(a.path(), &[]);
    let mut args = vec!["train", "--out-dir", a.path().to_str().unwrap()];
    args.extend_from_slice(&FAST);
    assert_eq!(code(&bin(&args)), 0);
    let d = b.path().to_str().unwrap();
    let mut gen = vec!["generate", "--out-dir", d, "--q", "20", "--n", "6"];
    gen.extend_from_slice(&FAST);
    assert_eq!(code(&bin(&gen)), 0);
    let model = a.path().join("model.bin");
    let out = bin(&["evaluate", "--out-dir", d, "--bank", model.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn oracle_beyond_limit_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut gen = vec!["generate", "--out-dir", d, "--q", "10", "--n", "24"];
    gen.extend_from_slice(&FAST);
    assert_eq!(code(&bin(&gen)), 0);
    let mut train = vec!["train", "--out-dir", d, "--set", "hidden=4"];
    train.extend_from_slice(&FAST);
    assert_eq!(code(&bin(&train)), 0);
    let out = bin(&["evaluate", "--out-dir", d, "--oracle", "--set", "bench_batches=2", "--set", "bench_repeats=1"]);
    assert_eq!(code(&out), 3);
}

/// Mean and standard error of ‖H‖_F over a dataset.
fn norm_stats(path: &Path) -> (f64, f64) {
    let ds = load_dataset(path).unwrap();
    let norms: Vec<f64> = ds.samples.iter().map(|s| s.h.matrix().frobenius_norm()).collect();
    let n = norms.len() as f64;
    let mean = norms.iter().sum::<f64>() / n;
    let var = norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn channel_models_differ_in_statistics() {
    let sv = tempfile::tempdir().unwrap();
    let gpp = tempfile::tempdir().unwrap();
    for (dir, model) in [(&sv, "sv"), (&gpp, "gpp")] {
        let d = dir.path().to_str().unwrap();
        let mut args = vec!["generate", "--out-dir", d, "--q", "400", "--model", model];
        args.extend_from_slice(&FAST);
        assert_eq!(code(&bin(&args)), 0);
    }
    let (m1, s1) = norm_stats(&sv.path().join("dataset.bin"));
    let (m2, s2) = norm_stats(&gpp.path().join("dataset.bin"));
    let z = (m1 - m2).abs() / (s1 * s1 + s2 * s2).sqrt();
    assert!(z > 3.0, "sv {m1} ± {s1}, gpp {m2} ± {s2}");
}
