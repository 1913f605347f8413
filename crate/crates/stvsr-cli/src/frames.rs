//! PNG frame directories: loading, saving, and enumeration.
//!
//! A frame on disk is an 8-bit RGB PNG; in memory it is a `3×H×W` tensor
//! in `[0, 1]`. Directories are read non-recursively and frames are
//! ordered by file name.

use std::path::{Path, PathBuf};

use stvsr_core::tensor::{shape_str, Tensor};

/// Sorted list of the `.png` files directly inside `dir`.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| format!("{}: {e}", dir.display()))?.path();
        let is_png = path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Load one PNG as a `3×H×W` RGB tensor in `[0, 1]`.
pub fn load_png(path: &Path) -> Result<Tensor<f32>, String> {
    let img = image::open(path).map_err(|e| format!("{}: {e}", path.display()))?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut t = Tensor::zeros(&[3, h, w]);
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            t.set3(c, y as usize, x as usize, f32::from(px.0[c]) / 255.0);
        }
    }
    Ok(t)
}

/// Save a `3×H×W` tensor as an 8-bit RGB PNG, clamping to `[0, 1]`.
pub fn save_png(path: &Path, frame: &Tensor<f32>) -> Result<(), String> {
    assert_eq!(frame.rank(), 3, "frames are C×H×W");
    assert_eq!(frame.shape()[0], 3, "frames are RGB");
    let (h, w) = (frame.shape()[1], frame.shape()[2]);
    let mut img = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px =
                [0, 1, 2].map(|c| (frame.get3(c, y, x).clamp(0.0, 1.0) * 255.0).round() as u8);
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    img.save(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Load a list of frames and require them all to be the same size.
pub fn load_frames(paths: &[PathBuf]) -> Result<Vec<Tensor<f32>>, String> {
    let mut frames = Vec::with_capacity(paths.len());
    for path in paths {
        frames.push(load_png(path)?);
    }
    for (path, frame) in paths.iter().zip(&frames) {
        if frame.shape() != frames[0].shape() {
            return Err(format!(
                "frame size mismatch: {} is {} but {} is {}",
                paths[0].display(),
                shape_str(frames[0].shape()),
                path.display(),
                shape_str(frame.shape()),
            ));
        }
    }
    Ok(frames)
}

/// Load every PNG in a directory as an equal-size frame sequence.
pub fn load_frame_dir(dir: &Path) -> Result<Vec<Tensor<f32>>, String> {
    let paths = list_pngs(dir)?;
    if paths.is_empty() {
        return Err(format!("{}: no .png frames found", dir.display()));
    }
    load_frames(&paths)
}

/// Canonical output frame name: `frame_000000.png`, `frame_000001.png`, ...
pub fn frame_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}
