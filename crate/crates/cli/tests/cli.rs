use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use vtinv::features::{read_features, write_wav, Waveform};

fn vtinv(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vtinv"))
        .args(args)
        .current_dir(cwd)
        .env_remove("VT_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_ok(out: &Output) {
    assert_eq!(code(out), 0, "stdout:\n{}\nstderr:\n{}", stdout(out), stderr(out));
}

fn tone_16k(n: usize) -> Waveform {
    let samples = (0..n)
        .map(|i| (3000.0 * (2.0 * std::f64::consts::PI * 220.0 * i as f64 / 16_000.0).sin()) as i16)
        .collect();
    Waveform::new(samples, 16_000).unwrap()
}

#[test]
fn features_on_empty_directory_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("wavs")).unwrap();
    let out = vtinv(&["features", "--wav-dir", "wavs", "--out-dir", "feats"], dir.path());
    assert_ok(&out);
    assert!(stderr(&out).contains("no WAV files"));
    assert!(!dir.path().join("feats").exists());
}

#[test]
fn features_one_second_gives_98_frames_and_lists_bad_rates() {
    let dir = tempfile::tempdir().unwrap();
    let wavs = dir.path().join("wavs");
    fs::create_dir(&wavs).unwrap();
    write_wav(&wavs.join("one.wav"), &tone_16k(16_000)).unwrap();
    let out = vtinv(&["features", "--wav-dir", "wavs", "--out-dir", "feats"], dir.path());
    assert_ok(&out);
    let f = read_features(&dir.path().join("feats/one.vtf")).unwrap();
    assert_eq!(f.dim(), (98, 39));
    assert!(stdout(&out).contains("98 frames"));

    // The library refuses to build 8 kHz waveforms, so write the file by hand.
    write_raw_wav(&wavs.join("slow.wav"), 8_000, 8_000);
    let out = vtinv(&["features", "--wav-dir", "wavs", "--out-dir", "feats2"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("slow.wav"), "{}", stderr(&out));
    assert!(dir.path().join("feats2/one.vtf").exists());
}

/// Minimal mono PCM16 RIFF writer, independent of the library.
fn write_raw_wav(path: &Path, rate: u32, n: usize) {
    let data_len = (n * 2) as u32;
    let mut b = Vec::new();
    b.extend_from_slice(b"RIFF");
    b.extend_from_slice(&(36 + data_len).to_le_bytes());
    b.extend_from_slice(b"WAVEfmt ");
    b.extend_from_slice(&16u32.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&rate.to_le_bytes());
    b.extend_from_slice(&(rate * 2).to_le_bytes());
    b.extend_from_slice(&2u16.to_le_bytes());
    b.extend_from_slice(&16u16.to_le_bytes());
    b.extend_from_slice(b"data");
    b.extend_from_slice(&data_len.to_le_bytes());
    b.resize(b.len() + n * 2, 0);
    fs::write(path, b).unwrap();
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&vtinv(&["train", "--no-such-flag"], dir.path())), 1);
    assert_eq!(code(&vtinv(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&vtinv(&["train", "--data", "d", "--out", "o", "--variant", "ST-9"], dir.path())), 1);
    let out = vtinv(&["--help"], dir.path());
    assert_ok(&out);
    assert!(stdout(&out).contains("gradcheck"));
}

#[test]
fn bad_thread_cap_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_vtinv"))
        .args(["gradcheck", "--only", "dense"])
        .current_dir(dir.path())
        .env("VT_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("VT_THREADS"));
}

#[test]
fn gradcheck_passes_and_reports_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = vtinv(&["gradcheck"], dir.path());
    assert_ok(&out);
    let text = stdout(&out);
    for name in ["dense", "lstm-cell", "bilstm", "softmax-ce", "ST-5", "ST-8", "MT-5", "ST-5-cw11"] {
        assert!(text.lines().any(|l| l.starts_with(name) && l.ends_with("PASS")), "{name}:\n{text}");
    }
    // An unreachable tolerance is a numeric failure.
    let out = vtinv(&["gradcheck", "--only", "dense", "--tolerance", "1e-30"], dir.path());
    assert_eq!(code(&out), 3);
    let out = vtinv(&["gradcheck", "--only", "conv"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = vtinv(&["prepare", "--manifest", "nope.toml", "--out", "p"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error:"));
    let out = vtinv(&["evaluate", "--run", "r", "--data", "p"], dir.path());
    assert_eq!(code(&out), 2);
}

fn run_pipeline(root: &Path) {
    let steps: [&[&str]; 4] = [
        &["synth", "--out", "corpus", "--acquisitions", "4", "--utterances", "3", "--frames", "60", "--seed", "7"],
        &["prepare", "--manifest", "corpus/manifest.toml", "--out", "prep", "--seed", "1"],
        &[
            "train", "--data", "prep", "--out", "run", "--approach", "AAT", "--variant", "MT-5", "--hidden", "6",
            "--epochs", "3", "--patience", "2", "--seed", "3", "--deterministic",
        ],
        &["evaluate", "--mean-baseline", "--data", "prep", "--out", "base"],
    ];
    for args in steps {
        assert_ok(&vtinv(args, root));
    }
}

#[test]
fn end_to_end_smoke_within_budget() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    run_pipeline(root);
    for f in ["run/checkpoints/aat.vtm", "run/train_log_aat.csv", "run/frame_errors.csv", "run/metrics.csv", "run/summary.json"] {
        assert!(root.join(f).is_file(), "{f}");
    }

    let out = vtinv(&["evaluate", "--run", "run", "--data", "prep", "--out", "reeval", "--predictions", "contours"], root);
    assert_ok(&out);
    assert!(stdout(&out).contains("phone accuracy"));
    assert_eq!(
        fs::read(root.join("run/frame_errors.csv")).unwrap(),
        fs::read(root.join("reeval/frame_errors.csv")).unwrap(),
        "re-evaluating the checkpoint reproduces the training-time errors"
    );

    let out = vtinv(&["report", "--runs", "run", "base", "--baseline", "base", "--out", "tables/cmp"], root);
    assert_ok(&out);
    let table = fs::read_to_string(root.join("tables/cmp.txt")).unwrap();
    assert_eq!(table, stdout(&out));
    assert!(table.contains("AAT MT-5") && table.contains("baseline mean"));
    assert!(table.contains("* p < 0.05, paired t-test"));
    let csv = fs::read_to_string(root.join("tables/cmp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 9);

    let mut preds: Vec<_> = fs::read_dir(root.join("contours")).unwrap().map(|e| e.unwrap().file_name()).collect();
    preds.sort();
    let pred = preds[0].to_string_lossy().into_owned();
    assert!(pred.ends_with("_pred.csv"));
    let truth = pred.replace("_pred", "_truth");
    let first_frame: String = fs::read_to_string(root.join("contours").join(&pred))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .to_string();
    let pred_path = format!("contours/{pred}");
    let truth_path = format!("contours/{truth}");
    let out = vtinv(&["plot", "--pred", &pred_path, "--truth", &truth_path, "--frame", &first_frame, "--out", "figs"], root);
    assert_ok(&out);
    let svg = fs::read_to_string(root.join(format!("figs/frame_{first_frame}.svg"))).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 16);

    let out = vtinv(&["plot", "--pred", &pred_path, "--truth", &truth_path, "--frame", "99999", "--out", "figs"], root);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("99999"));

    let out = vtinv(&["report", "--runs", "run", "--baseline", "elsewhere"], root);
    assert_eq!(code(&out), 2);

    assert!(start.elapsed() < Duration::from_secs(120), "took {:?}", start.elapsed());
}

#[test]
fn identical_invocations_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path());
    run_pipeline(b.path());
    for f in [
        "prep/prepared.json",
        "run/checkpoints/aat.vtm",
        "run/train_log_aat.csv",
        "run/frame_errors.csv",
        "run/metrics.csv",
        "base/metrics.csv",
    ] {
        let fa = fs::read(a.path().join(f)).unwrap();
        let fb = fs::read(b.path().join(f)).unwrap();
        if f == "prep/prepared.json" {
            // The record stores the absolute manifest path, which differs.
            let strip = |v: Vec<u8>| String::from_utf8(v).unwrap().lines().filter(|l| !l.contains("\"manifest\"")).collect::<String>();
            assert_eq!(strip(fa), strip(fb), "{f}");
        } else {
            assert_eq!(fa, fb, "{f}");
        }
    }
}
