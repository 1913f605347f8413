//! `stvsr eval` — per-frame and mean PSNR/SSIM between two directories.
//!
//! Output is a tab-separated table on standard output: one row per frame
//! pair (labelled by the predicted frame's file name) and a final `mean`
//! row. PSNR is printed to 0.01 dB, SSIM to 4 decimal places.

use stvsr_core::metrics::{psnr, ssim, MetricMode};
use stvsr_core::tensor::shape_str;

use crate::{frames, CliError, EvalArgs};

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let pred_paths = frames::list_pngs(&args.pred).map_err(CliError::usage)?;
    if pred_paths.is_empty() {
        return Err(CliError::usage(format!("{}: no .png frames found", args.pred.display())));
    }
    let pred = frames::load_frames(&pred_paths).map_err(CliError::usage)?;
    let gt = frames::load_frame_dir(&args.gt).map_err(CliError::usage)?;
    if pred.len() != gt.len() {
        return Err(CliError::usage(format!(
            "frame count mismatch: {} predicted frames in {} vs {} reference frames in {}",
            pred.len(),
            args.pred.display(),
            gt.len(),
            args.gt.display()
        )));
    }
    if pred[0].shape() != gt[0].shape() {
        return Err(CliError::usage(format!(
            "frame size mismatch: predictions are {} but references are {}",
            shape_str(pred[0].shape()),
            shape_str(gt[0].shape())
        )));
    }
    let (h, w) = (pred[0].shape()[1], pred[0].shape()[2]);
    if h < 11 || w < 11 {
        return Err(CliError::usage(format!(
            "frames are {h}×{w} but SSIM needs at least 11×11"
        )));
    }

    let mode = if args.y_channel { MetricMode::Luma } else { MetricMode::Rgb };
    let mut psnr_sum = 0.0;
    let mut ssim_sum = 0.0;
    for ((path, p), g) in pred_paths.iter().zip(&pred).zip(&gt) {
        let psnr_db = psnr(p, g, mode);
        let ssim_val = ssim(p, g, mode);
        psnr_sum += psnr_db;
        ssim_sum += ssim_val;
        let label = path.file_name().expect("listed files have names").to_string_lossy();
        println!("{label}\t{psnr_db:.2}\t{ssim_val:.4}");
    }
    let n = pred.len() as f64;
    println!("mean\t{:.2}\t{:.4}", psnr_sum / n, ssim_sum / n);
    Ok(())
}
