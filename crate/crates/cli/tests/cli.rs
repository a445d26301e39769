use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emg-rnn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic dataset: 3 classes, 4 train + 2 test trials each.
fn dataset(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    ok(&[
        "synth",
        "--out",
        s(&data),
        "--classes",
        "3",
        "--trials",
        "6",
        "--test-trials",
        "2",
        "--duration",
        "0.8",
    ]);
    data.join("manifest.txt")
}

fn train(manifest: &Path, out: &Path, arch: &str, input: &str, extra: &[&str]) {
    let mut args = vec![
        "train",
        "--manifest",
        s(manifest),
        "--arch",
        arch,
        "--input",
        input,
        "--out",
        s(out),
        "--epochs",
        "4",
        "--hidden1",
        "8",
        "--hidden2",
        "8",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn missing_manifest_is_a_config_error_with_usage() {
    let out = run(&["train", "--arch", "rnn", "--input", "same"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--manifest"), "{err}");
    assert!(err.contains("Usage: emg-rnn train"), "{err}");

    let out = run(&["sweep", "--manifest", "/definitely/not/here.txt", "--model", "m.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flag_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let out = run(&["train", "--manifest", s(&manifest), "--arch", "lstm", "--input", "same"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "train",
        "--manifest",
        s(&manifest),
        "--arch",
        "rnn",
        "--input",
        "same",
        "--window-len",
        "402",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_predict_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let model = dir.path().join("brnn.txt");
    train(&manifest, &model, "brnn", "same", &[]);
    let loss = fs::read_to_string(dir.path().join("brnn_loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 5);

    // 600 ms of 2-channel samples at 4 kHz
    let rec = fs::read_to_string(manifest.parent().unwrap().join("c01_t05.txt")).unwrap();
    let segment: String = rec.lines().take(2400).map(|l| format!("{l}\n")).collect();
    let mut child = bin()
        .args(["predict", "--model", s(&model)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(segment.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1, "{stdout}");
    assert!(lines[0].starts_with("segment=0 start_sample=0 class="), "{stdout}");
    assert!(lines[0].ends_with("decisions=11"), "{stdout}");

    let reports = dir.path().join("reports");
    let table = ok(&[
        "sweep",
        "--manifest",
        s(&manifest),
        "--model",
        s(&model),
        "--out-dir",
        s(&reports),
    ]);
    let row = table.lines().nth(1).unwrap();
    assert!(row.starts_with("BRNN same"));
    assert_eq!(row.split_whitespace().count(), 2 + 11);
    let csv = fs::read_to_string(reports.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 12);
    assert!(reports.join("sweep.json").is_file());
    let confusion = fs::read_to_string(reports.join("confusion_0.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 4);
}

#[test]
fn sequential_rows_mark_short_lengths_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let model = dir.path().join("seq.txt");
    train(&manifest, &model, "rnn", "sequential", &[]);
    let table = ok(&["sweep", "--manifest", s(&manifest), "--model", s(&model)]);
    let cells: Vec<&str> = table.lines().nth(1).unwrap().split_whitespace().skip(2).collect();
    assert_eq!(cells.len(), 11);
    assert!(cells[..4].iter().all(|c| *c == "-"));
    assert!(cells[4..].iter().all(|c| *c != "-"));
}

#[test]
fn outputs_are_reproducible_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    train(&manifest, &a, "brnn", "sequential", &[]);
    train(&manifest, &b, "brnn", "sequential", &["--threads", "4"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let r1 = dir.path().join("r1");
    let r2 = dir.path().join("r2");
    ok(&[
        "sweep",
        "--manifest",
        s(&manifest),
        "--model",
        s(&a),
        "--out-dir",
        s(&r1),
    ]);
    ok(&[
        "sweep",
        "--manifest",
        s(&manifest),
        "--model",
        s(&a),
        "--out-dir",
        s(&r2),
        "--threads",
        "3",
    ]);
    for f in ["sweep.csv", "sweep.json", "confusion_0.csv", "per_class_0.csv"] {
        assert_eq!(fs::read(r1.join(f)).unwrap(), fs::read(r2.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# training run\nmanifest = data/manifest.txt\narch = rnn\ninput_mode = same\nmodel = cfg_model.txt\nepochs = 2\nhidden1 = 4\nhidden2 = 4\n",
    )
    .unwrap();
    ok(&["--config", s(&cfg), "train", "--epochs", "3"]);
    let loss = fs::read_to_string(dir.path().join("cfg_model_loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 4);
    assert!(manifest.is_file());

    fs::write(&cfg, "epochz = 2\n").unwrap();
    let out = run(&["--config", s(&cfg), "train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn malformed_stream_is_a_runtime_error_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let model = dir.path().join("m.txt");
    train(&manifest, &model, "rnn", "same", &[]);
    let input = dir.path().join("bad.txt");
    fs::write(&input, "0.1 0.2\n0.3 0.4\n0.5 oops\n").unwrap();
    let out = run(&["predict", "--model", s(&model), "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sample 2"), "{err}");
    assert!(err.contains(":3:"), "{err}");
}

#[test]
fn extract_and_dwt_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let feats = dir.path().join("feats");
    ok(&[
        "extract",
        "--manifest",
        s(&manifest),
        "--out-dir",
        s(&feats),
        "--split",
        "test",
    ]);
    let csv = fs::read_to_string(feats.join("c00_t05.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 2 + 2 * 57);
    assert_eq!(&header[..3], &["label", "start_index", "ch0_cD1_IEMG"]);
    assert_eq!(header.last().unwrap(), &"ch1_cA2_IE");
    // 0.8 s at 4 kHz -> 15 windows
    assert_eq!(lines.count(), 15);

    let dump = ok(&[
        "dwt",
        "--input",
        s(&manifest.parent().unwrap().join("c00_t01.txt")),
        "--len",
        "8",
    ]);
    let rows: Vec<&str> = dump.lines().collect();
    assert_eq!(rows[0], "channel,layer,index,value");
    // per channel: 4 + 2 + 2 coefficients
    assert_eq!(rows.len(), 1 + 2 * 8);
    assert!(rows[5].starts_with("0,cD2,0,"));
    assert!(rows[7].starts_with("0,cA2,0,"));
}
