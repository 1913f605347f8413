//! End-to-end tests of the `stvsr` binary: every subcommand is driven
//! through a real process, checking outputs, file artifacts, exit codes,
//! and the single-line error contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stvsr_core::checkpoint;
use stvsr_core::network::ModelConfig;
use stvsr_core::train::{cosine_lr, TrainConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stvsr"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary should spawn")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// A config for fast real training runs in tests.
const TINY_CONFIG: &str = "\
channels = 4
k1 = 1
k2 = 1
total_steps = 20
batch_size = 1
patch = 4
lr_max = 1e-3
lr_min = 1e-6
seed = 5
augment = false
";

fn write_tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, TINY_CONFIG).unwrap();
    path
}

/// Deterministic little PNG with per-index content.
fn write_png(path: &Path, w: u32, h: u32, salt: u32) {
    let img = image::RgbImage::from_fn(w, h, |x, y| {
        let v = x * 31 + y * 17 + salt * 101;
        image::Rgb([(v % 256) as u8, ((v * 7) % 256) as u8, ((v * 13) % 256) as u8])
    });
    img.save(path).unwrap();
}

fn write_frame_dir(dir: &Path, count: u32, w: u32, h: u32) {
    fs::create_dir_all(dir).unwrap();
    for i in 0..count {
        write_png(&dir.join(format!("frame_{i:06}.png")), w, h, i);
    }
}

/// Train a throwaway checkpoint with the tiny config; returns its path.
fn train_tiny(dir: &Path, extra: &[&str]) -> PathBuf {
    let cfg = write_tiny_config(dir);
    let ckpt = dir.join("model.ckpt");
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--synthetic", "1", "--out"])
        .arg(&ckpt)
        .args(extra));
    assert_eq!(exit_code(&out), 0, "train failed: {}", stderr_of(&out));
    ckpt
}

// ─── train ────────────────────────────────────────────────────────────────

#[test]
fn train_writes_checkpoint_and_loss_log() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_tiny(dir.path(), &[]);

    // The checkpoint decodes and describes the configured model.
    let bytes = fs::read(&ckpt).unwrap();
    let entries = checkpoint::decode(&bytes).expect("checkpoint must decode");
    let shapes: Vec<(String, Vec<usize>)> =
        entries.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
    let inferred = ModelConfig::infer_from_entries(&shapes).expect("architecture recoverable");
    assert_eq!(inferred.channels, 4);
    assert_eq!(inferred.k1, 1);
    assert_eq!(inferred.k2, 1);

    // The default loss log sits next to the checkpoint and matches the
    // cosine schedule pointwise, at full round-trip precision.
    let log_path = dir.path().join("model.ckpt.loss.tsv");
    let log = fs::read_to_string(&log_path).expect("default loss log must exist");
    let train_cfg = TrainConfig {
        lr_max: 1e-3,
        lr_min: 1e-6,
        total_steps: 20,
        batch_size: 1,
        patch: 4,
        seed: 5,
        augment: false,
        ..TrainConfig::default()
    };
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 20, "one line per step");
    for (i, line) in lines.iter().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3, "step<TAB>lr<TAB>loss: {line}");
        let step: usize = cols[0].parse().unwrap();
        let lr: f64 = cols[1].parse().unwrap();
        let loss: f64 = cols[2].parse().unwrap();
        assert_eq!(step, i);
        assert_eq!(lr, cosine_lr(step, &train_cfg), "schedule mismatch at step {step}");
        assert!(loss.is_finite() && loss > 0.0);
    }
}

#[test]
fn train_honors_explicit_log_path() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("curve.tsv");
    train_tiny(dir.path(), &["--log", log.to_str().unwrap()]);
    assert!(log.exists(), "explicit --log path must be written");
    assert!(!dir.path().join("model.ckpt.loss.tsv").exists(), "no default log when --log is given");
}

#[test]
fn train_ablation_flag_controls_the_saved_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_tiny(dir.path(), &["--ablation", "c"]);
    let entries = checkpoint::decode(&fs::read(&ckpt).unwrap()).unwrap();
    let names: Vec<&str> = entries.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.iter().any(|n| n.starts_with("lstm.gates")), "variant c keeps the recurrence");
    assert!(
        !names.iter().any(|n| n.starts_with("lstm.align")),
        "variant c has no state alignment: {names:?}"
    );
    assert!(!names.iter().any(|n| n.starts_with("fusion")), "one-directional variant has no fusion");

    // The default preset is the full model: alignment and fusion present.
    let dir2 = tempfile::tempdir().unwrap();
    let ckpt2 = train_tiny(dir2.path(), &[]);
    let entries2 = checkpoint::decode(&fs::read(&ckpt2).unwrap()).unwrap();
    let names2: Vec<&str> = entries2.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names2.iter().any(|n| n.starts_with("lstm.align")));
    assert!(names2.iter().any(|n| n.starts_with("fusion")));
}

#[test]
fn train_without_data_or_synthetic_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("m.ckpt")));
    assert_eq!(exit_code(&out), 1);
    let err = stderr_of(&out);
    assert!(err.starts_with("error: no training data"), "got: {err}");
    assert_eq!(err.trim_end().lines().count(), 1, "single-line error contract: {err}");
}

#[test]
fn train_rejects_bad_config_with_single_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "channels = eight\n").unwrap();
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--synthetic", "1", "--out"])
        .arg(dir.path().join("m.ckpt")));
    assert_eq!(exit_code(&out), 1);
    let err = stderr_of(&out);
    assert!(err.starts_with("error: config "), "got: {err}");
    assert!(err.contains("`channels` must be"), "got: {err}");
    assert_eq!(err.trim_end().lines().count(), 1, "single-line error contract: {err}");
}

#[test]
fn train_exits_2_when_the_loss_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("diverge.cfg");
    fs::write(
        &cfg,
        "channels = 4\nk1 = 1\nk2 = 1\ntotal_steps = 200\nbatch_size = 1\npatch = 4\nlr_max = 1e12\nlr_min = 1\naugment = false\n",
    )
    .unwrap();
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--synthetic", "1", "--out"])
        .arg(dir.path().join("m.ckpt")));
    assert_eq!(exit_code(&out), 2, "divergence must exit 2; stderr: {}", stderr_of(&out));
    let err = stderr_of(&out);
    assert!(err.starts_with("error: non-finite loss at step"), "got: {err}");
    assert!(!dir.path().join("m.ckpt").exists(), "no checkpoint after divergence");
}

#[test]
fn train_data_and_synthetic_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--data"])
        .arg(dir.path())
        .args(["--synthetic", "1", "--out"])
        .arg(dir.path().join("m.ckpt")));
    assert_eq!(exit_code(&out), 1, "clap conflicts exit 1");
}

#[test]
fn train_reads_clip_directories() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("clips");
    // Two clips of 7 frames each, 16×16 => LR 4×4 patches fit.
    for clip in 0..2 {
        write_frame_dir(&data.join(format!("clip{clip}")), 7, 16, 16);
    }
    let cfg = write_tiny_config(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--data"])
        .arg(&data)
        .args(["--out"])
        .arg(&ckpt));
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(ckpt.exists());

    // A clip with the wrong frame count is rejected up front.
    write_frame_dir(&data.join("clip_bad"), 5, 16, 16);
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--data"])
        .arg(&data)
        .args(["--out"])
        .arg(dir.path().join("m2.ckpt")));
    assert_eq!(exit_code(&out), 1);
    let err = stderr_of(&out);
    assert!(err.starts_with("error: "), "got: {err}");
    assert_eq!(err.trim_end().lines().count(), 1, "single-line error contract: {err}");
}

// ─── infer ────────────────────────────────────────────────────────────────

#[test]
fn infer_doubles_frame_count_and_quadruples_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_tiny(dir.path(), &[]);

    for (n_in, n_out) in [(2u32, 3usize), (4, 7)] {
        let input = dir.path().join(format!("in{n_in}"));
        write_frame_dir(&input, n_in, 8, 6);
        let outdir = dir.path().join(format!("out{n_in}"));
        let out = run(bin()
            .args(["infer", "--ckpt"])
            .arg(&ckpt)
            .args(["--in"])
            .arg(&input)
            .args(["--out"])
            .arg(&outdir));
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

        let mut produced: Vec<String> = fs::read_dir(&outdir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        produced.sort();
        let expected: Vec<String> = (0..n_out).map(|i| format!("frame_{i:06}.png")).collect();
        assert_eq!(produced, expected, "{n_in} inputs must yield {n_out} outputs");
        for name in &expected {
            let (w, h) = image::image_dimensions(outdir.join(name)).unwrap();
            assert_eq!((w, h), (32, 24), "8×6 inputs must come out 32×24");
        }
    }
}

#[test]
fn infer_output_follows_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    write_frame_dir(&input, 2, 8, 8);

    // Two checkpoints from different-length runs must reconstruct
    // differently: the weights, not the input, drive the output.
    let dir_a = tempfile::tempdir().unwrap();
    let ckpt_a = train_tiny(dir_a.path(), &[]);
    let dir_b = tempfile::tempdir().unwrap();
    let cfg_b = dir_b.path().join("run.cfg");
    fs::write(&cfg_b, TINY_CONFIG.replace("total_steps = 20", "total_steps = 60")).unwrap();
    let ckpt_b = dir_b.path().join("model.ckpt");
    let out = run(bin()
        .args(["train", "--config"])
        .arg(&cfg_b)
        .args(["--synthetic", "1", "--out"])
        .arg(&ckpt_b));
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let mut images = Vec::new();
    for (tag, ckpt) in [("a", &ckpt_a), ("b", &ckpt_b)] {
        let outdir = dir.path().join(tag);
        let out = run(bin()
            .args(["infer", "--ckpt"])
            .arg(ckpt)
            .args(["--in"])
            .arg(&input)
            .args(["--out"])
            .arg(&outdir));
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
        images.push(fs::read(outdir.join("frame_000001.png")).unwrap());
    }
    assert_ne!(images[0], images[1], "different checkpoints must give different frames");
}

#[test]
fn infer_needs_at_least_two_frames() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_tiny(dir.path(), &[]);
    let input = dir.path().join("single");
    write_frame_dir(&input, 1, 8, 8);
    let out = run(bin()
        .args(["infer", "--ckpt"])
        .arg(&ckpt)
        .args(["--in"])
        .arg(&input)
        .args(["--out"])
        .arg(dir.path().join("out")));
    assert_eq!(exit_code(&out), 1);
    let err = stderr_of(&out);
    assert!(err.starts_with("error: "), "got: {err}");
    assert_eq!(err.trim_end().lines().count(), 1, "single-line error contract: {err}");
}

#[test]
fn infer_rejects_a_garbage_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("junk.ckpt");
    fs::write(&ckpt, b"not a checkpoint").unwrap();
    let input = dir.path().join("in");
    write_frame_dir(&input, 2, 8, 8);
    let out = run(bin()
        .args(["infer", "--ckpt"])
        .arg(&ckpt)
        .args(["--in"])
        .arg(&input)
        .args(["--out"])
        .arg(dir.path().join("out")));
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).starts_with("error: "), "got: {}", stderr_of(&out));
}

// ─── eval ─────────────────────────────────────────────────────────────────

#[test]
fn eval_of_identical_directories_hits_the_caps() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    write_frame_dir(&frames, 2, 16, 12);
    let out = run(bin().args(["eval", "--pred"]).arg(&frames).args(["--gt"]).arg(&frames));
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let stdout = stdout_of(&out);
    let rows: Vec<&str> = stdout.lines().collect();
    assert_eq!(rows.len(), 3, "2 frames + mean row, no header: {stdout}");
    for row in &rows {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols.len(), 3, "label<TAB>psnr<TAB>ssim: {row}");
        assert_eq!(cols[1], "99.00", "identical frames cap PSNR");
        assert_eq!(cols[2], "1.0000", "identical frames have unit SSIM");
    }
    assert!(rows[0].starts_with("frame_000000.png\t"), "rows are labeled by file name");
    assert!(rows[2].starts_with("mean\t"), "last row is the mean");
}

#[test]
fn eval_scores_differing_directories_in_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred");
    let gt = dir.path().join("gt");
    write_frame_dir(&pred, 2, 16, 12);
    fs::create_dir_all(&gt).unwrap();
    for i in 0..2 {
        write_png(&gt.join(format!("frame_{i:06}.png")), 16, 12, i + 50);
    }
    for extra in [&[][..], &["--y-channel"][..]] {
        let out = run(bin().args(["eval", "--pred"]).arg(&pred).args(["--gt"]).arg(&gt).args(extra));
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
        let stdout = stdout_of(&out);
        let mean = stdout.lines().last().expect("mean row");
        let cols: Vec<&str> = mean.split('\t').collect();
        let psnr: f64 = cols[1].parse().unwrap();
        let ssim: f64 = cols[2].parse().unwrap();
        assert!(psnr > 0.0 && psnr < 40.0, "unrelated textures score low: {mean}");
        assert!(ssim < 1.0, "unrelated textures are not identical: {mean}");
    }
}

#[test]
fn eval_rejects_mismatched_frame_counts() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred");
    let gt = dir.path().join("gt");
    write_frame_dir(&pred, 1, 16, 12);
    write_frame_dir(&gt, 2, 16, 12);
    let out = run(bin().args(["eval", "--pred"]).arg(&pred).args(["--gt"]).arg(&gt));
    assert_eq!(exit_code(&out), 1);
    let err = stderr_of(&out);
    assert!(err.starts_with("error: "), "got: {err}");
    assert_eq!(err.trim_end().lines().count(), 1, "single-line error contract: {err}");
}

// ─── selfcheck ────────────────────────────────────────────────────────────

#[test]
fn selfcheck_passes_and_its_negative_control_fails() {
    let out = run(bin().arg("selfcheck"));
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("checks passed"), "got: {stdout}");
    assert!(!stdout.contains("FAIL"), "no check may fail: {stdout}");

    // The fault injector corrupts one backward rule; the suite must
    // notice, name the failing check, and exit non-zero.
    let out = run(bin().args(["selfcheck", "--inject-grad-fault"]));
    assert_eq!(exit_code(&out), 1);
    let stdout = stdout_of(&out);
    assert!(stdout.contains("FAIL"), "fault must be detected: {stdout}");
    assert!(stderr_of(&out).starts_with("error: self-check failed"), "got: {}", stderr_of(&out));
}

// ─── global contract ──────────────────────────────────────────────────────

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["--version"][..], &["train", "--help"][..]] {
        let out = run(bin().args(args));
        assert_eq!(exit_code(&out), 0, "{args:?}");
    }
    let out = run(bin().arg("--help"));
    assert!(stdout_of(&out).contains("Space-time video super-resolution"));
}

#[test]
fn unknown_arguments_exit_one() {
    for args in [&["--bogus"][..], &["train"][..], &["frobnicate"][..]] {
        let out = run(bin().args(args));
        assert_eq!(exit_code(&out), 1, "{args:?}");
    }
}
