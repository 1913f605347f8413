//! `stvsr train` — fit a model and write a checkpoint plus a loss log.

use std::path::{Path, PathBuf};

use stvsr_core::checkpoint;
use stvsr_core::data::{synthesize_toy_clip, MotionKind, CLIP_LEN};
use stvsr_core::network::SpaceTimeModel;
use stvsr_core::params::ParamStore;
use stvsr_core::tensor::Tensor;
use stvsr_core::train::{seeded_rng, train_loop};

use crate::config::{load_settings, parse_ablation};
use crate::{frames, CliError, TrainArgs};

/// Edge length of generated synthetic clips (HR pixels).
const SYNTHETIC_SIZE: usize = 64;

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let mut settings = load_settings(&args.config).map_err(CliError::usage)?;
    if let Some(letter) = args.ablation {
        settings.model.ablation =
            parse_ablation(&letter.to_string()).map_err(CliError::usage)?;
    }

    let clips: Vec<Vec<Tensor<f32>>> = if let Some(n) = args.synthetic {
        if n == 0 {
            return Err(CliError::usage("--synthetic needs at least 1 clip"));
        }
        let hr_needed = 4 * settings.train.patch;
        if SYNTHETIC_SIZE < hr_needed {
            return Err(CliError::usage(format!(
                "patch {} needs {hr_needed}×{hr_needed} crops but synthetic clips are {SYNTHETIC_SIZE}×{SYNTHETIC_SIZE}",
                settings.train.patch
            )));
        }
        synthetic_clips(n, settings.train.seed)
    } else if let Some(dir) = &args.data {
        load_clip_dirs(dir, settings.train.patch)?
    } else {
        return Err(CliError::usage(
            "no training data: pass --data <dir with clip subdirectories of 7 PNG frames> or --synthetic <count>",
        ));
    };

    let mut store = ParamStore::<f32>::new();
    let model =
        SpaceTimeModel::init(settings.model, &mut store, &mut seeded_rng(settings.train.seed));

    let log = match train_loop(&model, &mut store, &clips, &settings.train) {
        Ok(log) => log,
        Err(diverged) => return Err(CliError { message: diverged.to_string(), code: 2 }),
    };

    std::fs::write(&args.out, checkpoint::encode(&store))
        .map_err(|e| CliError::usage(format!("{}: {e}", args.out.display())))?;

    let log_path = args.log.clone().unwrap_or_else(|| default_log_path(&args.out));
    let mut text = String::with_capacity(log.len() * 32);
    for entry in &log {
        // `{:e}` keeps full round-trip precision for both columns.
        text.push_str(&format!("{}\t{:e}\t{:e}\n", entry.step, entry.lr, entry.loss));
    }
    std::fs::write(&log_path, text)
        .map_err(|e| CliError::usage(format!("{}: {e}", log_path.display())))?;

    println!(
        "trained {} steps on {} clips; final loss {:.6}",
        log.len(),
        clips.len(),
        log.last().expect("total_steps >= 1").loss
    );
    println!("checkpoint: {}", args.out.display());
    println!("loss log:   {}", log_path.display());
    Ok(())
}

/// `<out>.loss.tsv`, appended to the full checkpoint file name.
fn default_log_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".loss.tsv");
    PathBuf::from(name)
}

/// Deterministic toy clips cycling through the three motion patterns.
fn synthetic_clips(n: usize, seed: u64) -> Vec<Vec<Tensor<f32>>> {
    // Distinct stream from the training-loop RNG so sampling and data
    // generation never share draws.
    let mut rng = seeded_rng(seed ^ 0x746f_795f_636c_6970); // "toy_clip"
    let kinds = [MotionKind::Shift, MotionKind::Rotate, MotionKind::Bounce];
    (0..n)
        .map(|i| synthesize_toy_clip(kinds[i % kinds.len()], SYNTHETIC_SIZE, CLIP_LEN, &mut rng).into_frames())
        .collect()
}

/// Load every clip subdirectory under `root`: each must hold exactly
/// 7 equal-size PNG frames large enough for the configured crop.
fn load_clip_dirs(root: &Path, patch: usize) -> Result<Vec<Vec<Tensor<f32>>>, CliError> {
    let entries = std::fs::read_dir(root)
        .map_err(|e| CliError::usage(format!("{}: {e}", root.display())))?;
    let mut subdirs: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::usage(format!("{}: {e}", root.display())))?.path();
        if path.is_dir() {
            subdirs.push(path);
        }
    }
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(CliError::usage(format!(
            "{}: no clip subdirectories found (expected one directory of 7 PNG frames per clip)",
            root.display()
        )));
    }

    let hr_needed = 4 * patch;
    let mut clips = Vec::with_capacity(subdirs.len());
    for dir in &subdirs {
        let frames = frames::load_frame_dir(dir).map_err(CliError::usage)?;
        if frames.len() != CLIP_LEN {
            return Err(CliError::usage(format!(
                "{}: a clip is exactly {CLIP_LEN} PNG frames, found {}",
                dir.display(),
                frames.len()
            )));
        }
        let (h, w) = (frames[0].shape()[1], frames[0].shape()[2]);
        if h < hr_needed || w < hr_needed {
            return Err(CliError::usage(format!(
                "{}: frames are {h}×{w} but patch {patch} needs at least {hr_needed}×{hr_needed}",
                dir.display()
            )));
        }
        clips.push(frames);
    }
    Ok(clips)
}
