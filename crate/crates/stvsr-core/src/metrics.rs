//! Image quality metrics: peak signal-to-noise ratio and structural
//! similarity, over RGB planes or the BT.601 luma channel.
//!
//! All accumulation happens in f64 regardless of the tensor's scalar
//! type so results are stable enough for tight cross-checks.

use alloc::vec;
use alloc::vec::Vec;
// Resolves float intrinsics in the no_std build (libm); redundant when
// std is linked for tests.
#[allow(unused_imports)]
use num_traits::Float;

use crate::tensor::{Scalar, Tensor};

/// PSNR values are capped here (a zero-MSE pair would be infinite).
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Which planes a metric runs over.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MetricMode {
    /// Average over the three RGB planes.
    Rgb,
    /// BT.601 luma only: `Y = 0.257R + 0.504G + 0.098B + 16/255`.
    Luma,
}

fn check_pair<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) {
    assert_eq!(a.shape(), b.shape(), "metric inputs must share a shape: {:?} vs {:?}", a.shape(), b.shape());
    assert_eq!(a.rank(), 3, "metrics expect C×H×W frames, got {:?}", a.shape());
    assert_eq!(a.shape()[0], 3, "metrics expect RGB frames, got {} channels", a.shape()[0]);
}

/// Extract the comparison planes as f64: three RGB planes or one luma plane.
fn planes<T: Scalar>(t: &Tensor<T>, mode: MetricMode) -> Vec<Vec<f64>> {
    let (h, w) = (t.shape()[1], t.shape()[2]);
    let n = h * w;
    match mode {
        MetricMode::Rgb => (0..3).map(|c| t.data()[c * n..(c + 1) * n].iter().map(|v| v.as_f64()).collect()).collect(),
        MetricMode::Luma => {
            let d = t.data();
            let y = (0..n)
                .map(|i| 0.257 * d[i].as_f64() + 0.504 * d[n + i].as_f64() + 0.098 * d[2 * n + i].as_f64() + 16.0 / 255.0)
                .collect();
            vec![y]
        }
    }
}

/// Peak signal-to-noise ratio in dB for unit-range frames, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, mode: MetricMode) -> f64 {
    check_pair(a, b);
    let (pa, pb) = (planes(a, mode), planes(b, mode));
    let mut se = 0.0f64;
    let mut count = 0usize;
    for (x, y) in pa.iter().zip(&pb) {
        for (u, v) in x.iter().zip(y) {
            let d = u - v;
            se += d * d;
        }
        count += x.len();
    }
    let mse = se / count as f64;
    if mse == 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// Normalized 11-tap Gaussian (σ = 1.5).
fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut total = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        total += *v;
    }
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Mean structural similarity over all fully contained 11×11 windows
/// (Gaussian weighted), averaged across planes. Frames must be at least
/// 11×11.
pub fn ssim<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, mode: MetricMode) -> f64 {
    check_pair(a, b);
    let (h, w) = (a.shape()[1], a.shape()[2]);
    assert!(h >= SSIM_WINDOW && w >= SSIM_WINDOW, "ssim needs frames of at least {SSIM_WINDOW}×{SSIM_WINDOW}, got {h}×{w}");
    let g = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (pa, pb) = (planes(a, mode), planes(b, mode));

    let mut plane_mean = 0.0;
    for (x, y) in pa.iter().zip(&pb) {
        let mut acc = 0.0;
        let mut windows = 0usize;
        for wy in 0..=h - SSIM_WINDOW {
            for wx in 0..=w - SSIM_WINDOW {
                let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..SSIM_WINDOW {
                    for dx in 0..SSIM_WINDOW {
                        let wt = g[dy] * g[dx];
                        let u = x[(wy + dy) * w + wx + dx];
                        let v = y[(wy + dy) * w + wx + dx];
                        mx += wt * u;
                        my += wt * v;
                        mxx += wt * u * u;
                        myy += wt * v * v;
                        mxy += wt * u * v;
                    }
                }
                let (vx, vy, vxy) = (mxx - mx * mx, myy - my * my, mxy - mx * my);
                acc += ((2.0 * mx * my + c1) * (2.0 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                windows += 1;
            }
        }
        plane_mean += acc / windows as f64;
    }
    plane_mean / pa.len() as f64
}

// ─── Tests ───────────────────────────────────────────────────────────────
