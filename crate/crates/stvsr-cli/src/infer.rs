//! `stvsr infer` — n+1 frames in, 2n+1 frames at ×4 resolution out.
//!
//! The model configuration is not stored in the checkpoint; it is inferred
//! from the parameter names and shapes, so any checkpoint written by
//! `train` is self-describing.

use stvsr_core::checkpoint;
use stvsr_core::network::{ModelConfig, SpaceTimeModel, UPSCALE};
use stvsr_core::params::{Graph, ParamStore};
use stvsr_core::train::seeded_rng;

use crate::{frames, CliError, InferArgs};

pub fn run(args: &InferArgs) -> Result<(), CliError> {
    let bytes = std::fs::read(&args.ckpt)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.ckpt.display())))?;
    let entries = checkpoint::decode(&bytes)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.ckpt.display())))?;
    let shapes: Vec<(String, Vec<usize>)> =
        entries.iter().map(|(name, t)| (name.clone(), t.shape().to_vec())).collect();
    let cfg = ModelConfig::infer_from_entries(&shapes)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.ckpt.display())))?;

    let mut store = ParamStore::<f32>::new();
    let model = SpaceTimeModel::init(cfg, &mut store, &mut seeded_rng(0));
    checkpoint::load_into_store(&mut store, &entries)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.ckpt.display())))?;

    let input = frames::load_frame_dir(&args.input).map_err(CliError::usage)?;
    if input.len() < 2 {
        return Err(CliError::usage(format!(
            "{}: need at least 2 input frames, found {}",
            args.input.display(),
            input.len()
        )));
    }

    let mut g = Graph::new(&store);
    let outputs = model.forward(&mut g, &input);

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.out.display())))?;
    for (i, var) in outputs.iter().enumerate() {
        let frame = g.tape.value(*var).map(|v| v.clamp(0.0, 1.0));
        frames::save_png(&args.out.join(frames::frame_name(i)), &frame)
            .map_err(CliError::usage)?;
    }

    let (h, w) = (input[0].shape()[1], input[0].shape()[2]);
    println!(
        "wrote {} frames at {}×{} (×{UPSCALE} from {} inputs at {h}×{w}) to {}",
        outputs.len(),
        h * UPSCALE,
        w * UPSCALE,
        input.len(),
        args.out.display()
    );
    Ok(())
}
