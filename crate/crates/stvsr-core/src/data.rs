//! Data pipeline: validated frame sequences, antialiased bicubic
//! downsampling, random training crops with augmentation, and synthetic
//! clip generation for tests and self-checks.
//!
//! The supervision law throughout: a clip stores 2n+1 high-resolution
//! frames; the network input is every second frame downsampled ×4
//! (`lr[k] = downsample(hr[2k])`) and the target is the full sequence.

use alloc::vec;
use alloc::vec::Vec;
// Resolves float intrinsics in the no_std build (libm); redundant when
// std is linked for tests.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::tensor::{bilinear_sample, Scalar, Tensor};

/// Ordered RGB frames, equal `3×H×W` shapes, values in `[0, 1]`.
pub struct FrameSequence<T> {
    frames: Vec<Tensor<T>>,
}

impl<T: Scalar> FrameSequence<T> {
    pub fn new(frames: Vec<Tensor<T>>) -> Self {
        assert!(!frames.is_empty(), "a frame sequence cannot be empty");
        let shape = frames[0].shape().to_vec();
        assert_eq!(shape.len(), 3, "frames must be rank 3 (C×H×W), got {shape:?}");
        assert_eq!(shape[0], 3, "frames must be RGB, got {} channels", shape[0]);
        for (i, f) in frames.iter().enumerate() {
            assert_eq!(f.shape(), &shape[..], "frame {i} shape differs from frame 0");
            for &v in f.data() {
                let x = v.as_f64();
                assert!((0.0..=1.0).contains(&x) && x.is_finite(), "frame {i} holds out-of-range value {x}");
            }
        }
        FrameSequence { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frames(&self) -> &[Tensor<T>] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Tensor<T>> {
        self.frames
    }

    /// (height, width) of every frame.
    pub fn frame_size(&self) -> (usize, usize) {
        (self.frames[0].shape()[1], self.frames[0].shape()[2])
    }
}

// ─── Bicubic downsampling ───────────────────────────────────────────────

/// Catmull-Rom-family cubic kernel with a = −0.5.
fn cubic(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x < 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Mirror an index into `0..n` without repeating the border sample
/// (…, 2, 1, 0, 1, 2, … at the low end).
fn reflect_index(mut i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
    }
}

/// Tap positions and normalized weights for one output coordinate of an
/// antialiased ×`factor` reduction along an axis of length `n`.
fn axis_taps(out_idx: usize, factor: usize, n: usize) -> Vec<(usize, f64)> {
    let f = factor as f64;
    // Pixel-center convention: output sample o sits at (o + 0.5)·f − 0.5.
    let center = (out_idx as f64 + 0.5) * f - 0.5;
    let radius = 2.0 * f;
    let lo = (center - radius).ceil() as i64;
    let hi = (center + radius).floor() as i64;
    let mut taps = Vec::with_capacity((hi - lo + 1) as usize);
    let mut total = 0.0;
    for i in lo..=hi {
        // The kernel is stretched by the factor so it also low-passes.
        let w = cubic((i as f64 - center) / f);
        if w != 0.0 {
            total += w;
            taps.push((reflect_index(i, n), w));
        }
    }
    for t in &mut taps {
        t.1 /= total;
    }
    taps
}

/// Antialiased bicubic ×`factor` reduction of a `C×H×W` frame with
/// mirror padding; accumulates in f64 and clamps the result to `[0, 1]`.
pub fn bicubic_downsample<T: Scalar>(frame: &Tensor<T>, factor: usize) -> Tensor<T> {
    assert!(factor >= 1, "factor must be at least 1");
    assert_eq!(frame.rank(), 3, "expected C×H×W, got shape {:?}", frame.shape());
    let (c, h, w) = (frame.shape()[0], frame.shape()[1], frame.shape()[2]);
    assert!(h % factor == 0 && w % factor == 0, "frame {h}×{w} not divisible by factor {factor}");
    let (oh, ow) = (h / factor, w / factor);

    let col_taps: Vec<Vec<(usize, f64)>> = (0..ow).map(|x| axis_taps(x, factor, w)).collect();
    let row_taps: Vec<Vec<(usize, f64)>> = (0..oh).map(|y| axis_taps(y, factor, h)).collect();

    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut horiz = vec![0.0f64; h * ow];
    for ch in 0..c {
        // Horizontal pass into a f64 scratch plane.
        for y in 0..h {
            for (x, taps) in col_taps.iter().enumerate() {
                let mut acc = 0.0;
                for &(i, wgt) in taps {
                    acc += frame.get3(ch, y, i).as_f64() * wgt;
                }
                horiz[y * ow + x] = acc;
            }
        }
        // Vertical pass, clamp, cast.
        for (y, taps) in row_taps.iter().enumerate() {
            for x in 0..ow {
                let mut acc = 0.0;
                for &(i, wgt) in taps {
                    acc += horiz[i * ow + x] * wgt;
                }
                out.set3(ch, y, x, T::from_f64(acc.clamp(0.0, 1.0)));
            }
        }
    }
    out
}

// ─── Geometric helpers ──────────────────────────────────────────────────

/// Quarter-turn counterclockwise: `out[y][x] = in[x][W−1−y]` (shape `C×W×H`).
pub fn rotate90<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    assert_eq!(t.rank(), 3);
    let (c, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let mut out = Tensor::zeros(&[c, w, h]);
    for ch in 0..c {
        for y in 0..w {
            for x in 0..h {
                out.set3(ch, y, x, t.get3(ch, x, w - 1 - y));
            }
        }
    }
    out
}

/// Horizontal mirror: `out[y][x] = in[y][W−1−x]`.
pub fn flip_horizontal<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    assert_eq!(t.rank(), 3);
    let (c, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let mut out = Tensor::zeros(&[c, h, w]);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out.set3(ch, y, x, t.get3(ch, y, w - 1 - x));
            }
        }
    }
    out
}

fn crop<T: Scalar>(t: &Tensor<T>, y0: usize, x0: usize, hh: usize, ww: usize) -> Tensor<T> {
    let (c, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    assert!(y0 + hh <= h && x0 + ww <= w, "crop {y0}+{hh}, {x0}+{ww} exceeds {h}×{w}");
    let mut out = Tensor::zeros(&[c, hh, ww]);
    for ch in 0..c {
        for y in 0..hh {
            for x in 0..ww {
                out.set3(ch, y, x, t.get3(ch, y0 + y, x0 + x));
            }
        }
    }
    out
}

// ─── Training samples ───────────────────────────────────────────────────

/// One optimization example: n+1 low-resolution inputs and their 2n+1
/// high-resolution targets.
pub struct TrainingSample<T> {
    pub lr_input: Vec<Tensor<T>>,
    pub hr_target: Vec<Tensor<T>>,
}

/// Frames per training clip: 4 low-resolution inputs supervise 7 outputs.
pub const CLIP_LEN: usize = 7;

/// Draw a random square crop (edge `4·patch`) through all frames of a
/// clip, optionally augment with a shared quarter-turn count and mirror,
/// and downsample the even frames ×4 for the input.
///
/// The clip must hold exactly [`CLIP_LEN`] equally sized frames.
pub fn make_training_sample<T: Scalar, R: Rng>(
    clip: &[Tensor<T>],
    patch: usize,
    rng: &mut R,
    augment: bool,
) -> TrainingSample<T> {
    assert_eq!(clip.len(), CLIP_LEN, "clip must hold exactly {CLIP_LEN} frames, got {}", clip.len());
    assert!(patch >= 1, "patch must be positive");
    let (h, w) = (clip[0].shape()[1], clip[0].shape()[2]);
    let edge = 4 * patch;
    assert!(h >= edge && w >= edge, "frames {h}×{w} too small for a {edge}×{edge} crop");

    let y0 = rng.gen_range(0..=h - edge);
    let x0 = rng.gen_range(0..=w - edge);
    let (quarter_turns, mirror) = if augment { (rng.gen_range(0..4u32), rng.gen_bool(0.5)) } else { (0, false) };

    let hr_target: Vec<Tensor<T>> = clip
        .iter()
        .map(|f| {
            let mut p = crop(f, y0, x0, edge, edge);
            for _ in 0..quarter_turns {
                p = rotate90(&p);
            }
            if mirror {
                p = flip_horizontal(&p);
            }
            p
        })
        .collect();
    let lr_input: Vec<Tensor<T>> = hr_target.iter().step_by(2).map(|f| bicubic_downsample(f, 4)).collect();
    TrainingSample { lr_input, hr_target }
}

// ─── Synthetic clips ────────────────────────────────────────────────────

/// Motion pattern of a synthetic clip.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MotionKind {
    /// Constant integer-pixel translation per frame.
    Shift,
    /// Constant-rate rotation about the frame center.
    Rotate,
    /// Translation that reflects off a bounding box.
    Bounce,
}

/// Smooth multi-octave value noise in `[-1, 1]`.
fn noise_plane<R: Rng>(h: usize, w: usize, cell: usize, rng: &mut R) -> Vec<f64> {
    let gh = h / cell + 2;
    let gw = w / cell + 2;
    let grid: Vec<f64> = (0..gh * gw).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let fy = y as f64 / cell as f64;
        let (y0, ty) = (fy as usize, fy - fy.floor());
        for x in 0..w {
            let fx = x as f64 / cell as f64;
            let (x0, tx) = (fx as usize, fx - fx.floor());
            let g = |yy: usize, xx: usize| grid[yy * gw + xx];
            let top = g(y0, x0) * (1.0 - tx) + g(y0, x0 + 1) * tx;
            let bot = g(y0 + 1, x0) * (1.0 - tx) + g(y0 + 1, x0 + 1) * tx;
            out[y * w + x] = top * (1.0 - ty) + bot * ty;
        }
    }
    out
}

/// Random textured RGB canvas with detail at several scales.
fn textured_canvas<R: Rng>(h: usize, w: usize, rng: &mut R) -> Tensor<f64> {
    let mut out = Tensor::zeros(&[3, h, w]);
    for ch in 0..3 {
        let coarse = noise_plane(h, w, 8, rng);
        let mid = noise_plane(h, w, 4, rng);
        let fine = noise_plane(h, w, 2, rng);
        for i in 0..h * w {
            let v = 0.5 + 0.35 * coarse[i] + 0.25 * mid[i] + 0.15 * fine[i];
            out.data_mut()[ch * h * w + i] = v.clamp(0.0, 1.0);
        }
    }
    out
}

/// Fold a coordinate into `[0, m]` by reflecting at both ends.
fn reflect_coord(p: i64, m: i64) -> i64 {
    if m == 0 {
        return 0;
    }
    let period = 2 * m;
    let q = p.rem_euclid(period);
    if q > m {
        period - q
    } else {
        q
    }
}

/// A clip whose frames are integer-shifted crops of one textured canvas:
/// frame t+1 equals frame t translated by exactly `velocity` pixels.
pub fn synthesize_shift_clip<T: Scalar, R: Rng>(
    size: usize,
    frames: usize,
    velocity: (i64, i64),
    rng: &mut R,
) -> FrameSequence<T> {
    assert!(frames >= 1 && size >= 1);
    let (vy, vx) = velocity;
    let span_y = vy.unsigned_abs() as usize * (frames - 1);
    let span_x = vx.unsigned_abs() as usize * (frames - 1);
    let canvas = textured_canvas(size + span_y, size + span_x, rng);
    let y_start = if vy >= 0 { 0i64 } else { span_y as i64 };
    let x_start = if vx >= 0 { 0i64 } else { span_x as i64 };
    let out = (0..frames)
        .map(|t| {
            let y0 = (y_start + vy * t as i64) as usize;
            let x0 = (x_start + vx * t as i64) as usize;
            crop(&canvas, y0, x0, size, size).cast::<T>()
        })
        .collect();
    FrameSequence::new(out)
}

/// Random synthetic HR clip with the requested motion pattern. Texture
/// and motion parameters are drawn from `rng`; output frames are
/// `3×size×size` in `[0, 1]`.
pub fn synthesize_toy_clip<T: Scalar, R: Rng>(
    kind: MotionKind,
    size: usize,
    frames: usize,
    rng: &mut R,
) -> FrameSequence<T> {
    assert!(frames >= 1 && size >= 2);
    match kind {
        MotionKind::Shift => {
            let mut v = (0i64, 0i64);
            while v == (0, 0) {
                v = (rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            }
            synthesize_shift_clip(size, frames, v, rng)
        }
        MotionKind::Rotate => {
            let side = 2 * size;
            let canvas = textured_canvas(side, side, rng);
            let omega = rng.gen_range(0.02..0.05) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let center_canvas = (side as f64 - 1.0) / 2.0;
            let center_frame = (size as f64 - 1.0) / 2.0;
            let out = (0..frames)
                .map(|t| {
                    let theta = omega * t as f64;
                    let (s, c) = theta.sin_cos();
                    let mut frame = Tensor::<T>::zeros(&[3, size, size]);
                    for y in 0..size {
                        for x in 0..size {
                            let ry = y as f64 - center_frame;
                            let rx = x as f64 - center_frame;
                            let sy = center_canvas + c * ry - s * rx;
                            let sx = center_canvas + s * ry + c * rx;
                            let px = bilinear_sample(&canvas, sy, sx);
                            for ch in 0..3 {
                                frame.set3(ch, y, x, T::from_f64(px[ch].clamp(0.0, 1.0)));
                            }
                        }
                    }
                    frame
                })
                .collect();
            FrameSequence::new(out)
        }
        MotionKind::Bounce => {
            let margin = 8usize;
            let canvas = textured_canvas(size + margin, size + margin, rng);
            let m = margin as i64;
            let p0 = (rng.gen_range(0..=m), rng.gen_range(0..=m));
            let mag = |r: &mut R| rng_sign(r) * r.gen_range(1..=3);
            let v = (mag(rng), mag(rng));
            let out = (0..frames)
                .map(|t| {
                    let y0 = reflect_coord(p0.0 + v.0 * t as i64, m) as usize;
                    let x0 = reflect_coord(p0.1 + v.1 * t as i64, m) as usize;
                    crop(&canvas, y0, x0, size, size).cast::<T>()
                })
                .collect();
            FrameSequence::new(out)
        }
    }
}

fn rng_sign<R: Rng>(rng: &mut R) -> i64 {
    if rng.gen_bool(0.5) {
        1
    } else {
        -1
    }
}

// ─── Tests ───────────────────────────────────────────────────────────────
