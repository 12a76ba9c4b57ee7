use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dct_snn::encoder::EncoderKind;
use dct_snn::snn::{Checkpoint, ModelKind};
use dct_snn::transforms::TransformKind;
use tempfile::TempDir;

const DIGITS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/digits");

/// Small, fast settings shared by every invocation below.
fn base(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dct-snn"));
    cmd.current_dir(dir).args([
        "--profile",
        "desk",
        "--dataset",
        DIGITS,
        "--arch",
        "tiny",
        "--train-limit",
        "300",
        "--test-limit",
        "100",
        "--calib-size",
        "32",
    ]);
    cmd
}

fn run(mut cmd: Command) -> Output {
    cmd.output().expect("spawn dct-snn")
}

fn ok(cmd: Command) -> Output {
    let out = run(cmd);
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn train_ann(dir: &Path, name: &str, epochs: &str) -> (PathBuf, PathBuf) {
    let ckpt = dir.join(format!("{name}.ckpt"));
    let metrics = dir.join(format!("{name}.csv"));
    let mut cmd = base(dir);
    cmd.args(["--epochs", epochs, "train-ann", "--out"])
        .arg(&ckpt)
        .arg("--metrics")
        .arg(&metrics);
    ok(cmd);
    (ckpt, metrics)
}

#[test]
fn missing_dataset_exits_with_usage_code() {
    let dir = TempDir::new().unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dct-snn"));
    cmd.current_dir(dir.path())
        .args(["--dataset", "no/such/dir", "train-ann", "--out", "x.ckpt"]);
    assert_eq!(run(cmd).status.code(), Some(2));
}

#[test]
fn unknown_flag_and_bad_config_exit_2() {
    let dir = TempDir::new().unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dct-snn"));
    cmd.args(["train-ann", "--bogus"]);
    assert_eq!(run(cmd).status.code(), Some(2));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[encoder]\nnot_a_key = 1\n").unwrap();
    let mut cmd = base(dir.path());
    cmd.arg("--config")
        .arg(&cfg)
        .args(["train-ann", "--out", "x.ckpt"]);
    let out = run(cmd);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn zero_epochs_writes_untrained_checkpoint_and_header_only_metrics() {
    let dir = TempDir::new().unwrap();
    let (ckpt, metrics) = train_ann(dir.path(), "zero", "0");
    let c = Checkpoint::load(&ckpt).unwrap();
    assert_eq!(c.kind, ModelKind::Ann);
    let text = std::fs::read_to_string(metrics).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
}

#[test]
fn metrics_are_byte_identical_across_runs_with_one_seed() {
    let dir = TempDir::new().unwrap();
    let (a_ckpt, a) = train_ann(dir.path(), "a", "2");
    let (b_ckpt, b) = train_ann(dir.path(), "b", "2");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(
        std::fs::read(a_ckpt).unwrap(),
        std::fs::read(b_ckpt).unwrap()
    );
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let dir = TempDir::new().unwrap();
    let (full_ckpt, full_metrics) = train_ann(dir.path(), "full", "2");
    let (half_ckpt, half_metrics) = train_ann(dir.path(), "half", "1");
    let mut cmd = base(dir.path());
    cmd.args(["--epochs", "2", "train-ann", "--out"])
        .arg(&half_ckpt)
        .arg("--metrics")
        .arg(&half_metrics)
        .arg("--resume")
        .arg(&half_ckpt);
    ok(cmd);
    assert_eq!(
        std::fs::read(full_metrics).unwrap(),
        std::fs::read(half_metrics).unwrap()
    );
    assert_eq!(
        Checkpoint::load(&full_ckpt).unwrap().network.weights,
        Checkpoint::load(&half_ckpt).unwrap().network.weights
    );
}

#[test]
fn convert_eval_finetune_and_sweep_roundtrip() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (ann, _) = train_ann(d, "ann", "1");

    let snn = d.join("snn.ckpt");
    let mut cmd = base(d);
    cmd.arg("convert")
        .arg("--checkpoint")
        .arg(&ann)
        .arg("--out")
        .arg(&snn);
    ok(cmd);
    assert_eq!(Checkpoint::load(&snn).unwrap().kind, ModelKind::Snn);

    let eval_csv = d.join("eval.csv");
    let ops_csv = d.join("ops.csv");
    let mut cmd = base(d);
    cmd.arg("eval")
        .arg("--checkpoint")
        .arg(&snn)
        .arg("--out")
        .arg(&eval_csv)
        .arg("--record-spikes")
        .arg(&ops_csv);
    ok(cmd);
    let eval = std::fs::read_to_string(&eval_csv).unwrap();
    let row: Vec<&str> = eval.lines().nth(1).unwrap().split(',').collect();
    let acc: f64 = row[0].parse().unwrap();
    assert!(acc > 0.3, "converted accuracy {acc}");
    assert_eq!(row[2], "100");
    let ops = std::fs::read_to_string(&ops_csv).unwrap();
    assert!(ops.starts_with("layer,ann_ops,spike_rate,snn_ops\n"));
    assert!(ops.lines().any(|l| l.starts_with("alpha,")));

    let tuned = d.join("tuned.ckpt");
    let tuned_csv = d.join("tuned.csv");
    let mut cmd = base(d);
    cmd.args([
        "--epochs",
        "1",
        "--timesteps",
        "32",
        "train-snn",
        "--checkpoint",
    ])
    .arg(&snn)
    .arg("--out")
    .arg(&tuned)
    .arg("--metrics")
    .arg(&tuned_csv);
    ok(cmd);
    assert_eq!(
        std::fs::read_to_string(&tuned_csv).unwrap().lines().count(),
        2
    );

    let sweep = d.join("sweep.csv");
    let mut cmd = base(d);
    cmd.arg("sweep-latency")
        .arg("--checkpoint")
        .arg(&tuned)
        .arg("--out")
        .arg(&sweep)
        .args(["--k", "12,4,16"]);
    ok(cmd);
    let text = std::fs::read_to_string(&sweep).unwrap();
    let ks: Vec<usize> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ks, vec![4, 12, 16]);
}

#[test]
fn eval_rejects_too_short_schedule() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (ann, _) = train_ann(d, "ann", "0");
    let snn = d.join("snn.ckpt");
    let mut cmd = base(d);
    cmd.arg("convert")
        .arg("--checkpoint")
        .arg(&ann)
        .arg("--out")
        .arg(&snn);
    ok(cmd);
    let mut cmd = base(d);
    cmd.args(["--timesteps", "8", "eval", "--checkpoint"])
        .arg(&snn);
    assert_eq!(run(cmd).status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = d.join("run.toml");
    std::fs::write(&cfg, "[encoder]\nkind = poisson\n").unwrap();
    let ckpt = d.join("p.ckpt");
    let mut cmd = base(d);
    cmd.arg("--config")
        .arg(&cfg)
        .args(["--encoder", "dct", "--epochs", "0", "train-ann", "--out"])
        .arg(&ckpt);
    ok(cmd);
    let c = Checkpoint::load(&ckpt).unwrap();
    assert_eq!(c.encoder.kind, EncoderKind::Transform(TransformKind::Dct));

    let ckpt = d.join("q.ckpt");
    let mut cmd = base(d);
    cmd.arg("--config")
        .arg(&cfg)
        .args(["--epochs", "0", "train-ann", "--out"])
        .arg(&ckpt);
    ok(cmd);
    assert_eq!(
        Checkpoint::load(&ckpt).unwrap().encoder.kind,
        EncoderKind::Poisson
    );
}

#[test]
fn encode_writes_spike_tensor_and_raster() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = d.join("img.spk");
    let raster = d.join("img.csv");
    let mut cmd = base(d);
    cmd.args(["encode", "--index", "3", "--out"])
        .arg(&out)
        .arg("--raster")
        .arg(&raster);
    ok(cmd);
    let train = dct_snn::encoder::SpikeTrain::from_bytes(&std::fs::read(&out).unwrap()).unwrap();
    let nonzero = (0..train.timesteps)
        .map(|t| train.step(t).iter().filter(|&&s| s != 0).count())
        .sum::<usize>();
    let rows = std::fs::read_to_string(&raster).unwrap().lines().count() - 1;
    assert_eq!(rows, nonzero);
    assert!(nonzero > 0);
}
