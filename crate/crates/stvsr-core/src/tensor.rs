//! Dense tensor type and the raw forward numeric kernels.
//!
//! Layout is row-major with C×H×W feature maps (an optional batch dimension
//! is outermost where an operation supports it). No broadcasting beyond
//! bias-add; shape contracts are enforced eagerly with panics that carry
//! both shapes. Differentiability lives one level up in [`crate::tape`];
//! this module is plain functions on plain buffers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::float::{Float, FloatConst};
use num_traits::NumAssignOps;
use rand::Rng;

/// Element type of every tensor: `f32` for training/inference, `f64` for
/// gradient checking. The helpers keep literal-heavy numeric code readable.
pub trait Scalar:
    Float + FloatConst + NumAssignOps + core::iter::Sum + core::fmt::Debug + core::fmt::Display + 'static
{
    #[inline]
    fn from_f64(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite f64 converts to any float type")
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

// ─── Tensor ──────────────────────────────────────────────────────────────

/// Dense N-dimensional array, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Build from an explicit buffer. Panics unless `data.len()` matches the
    /// product of `shape` (every extent must be positive).
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        let numel: usize = shape.iter().product();
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "tensor shape must be non-empty with positive extents, got {shape:?}"
        );
        assert_eq!(
            data.len(),
            numel,
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![T::zero(); numel] }
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        let numel: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![v; numel] }
    }

    /// Rank-0-like scalar stored as shape `[1]`.
    pub fn scalar(v: T) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    /// Uniform values in `[lo, hi)`. Sampling happens in `f64` so a given
    /// seed produces the same parameters (up to rounding) in both precisions.
    pub fn uniform<R: Rng>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| T::from_f64(lo + (hi - lo) * rng.gen::<f64>())).collect();
        Tensor::from_vec(shape, data)
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// True scalar in the operation-contract sense: exactly one element.
    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// Flat offset of `(c, y, x)` in a rank-3 tensor.
    #[inline]
    pub fn offset3(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert_eq!(self.rank(), 3);
        (c * self.shape[1] + y) * self.shape[2] + x
    }

    #[inline]
    pub fn get3(&self, c: usize, y: usize, x: usize) -> T {
        self.data[self.offset3(c, y, x)]
    }

    #[inline]
    pub fn set3(&mut self, c: usize, y: usize, x: usize, v: T) {
        let i = self.offset3(c, y, x);
        self.data[i] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Lossy precision change (used when serializing `f64`-mode values and
    /// when promoting frames for metric accumulation).
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| U::from_f64(v.as_f64())).collect() }
    }

    /// True when every entry is finite (no NaN/Inf).
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch: {:?} vs {:?}", self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }
}

/// Shape rendered for contract-error messages.
pub fn shape_str(shape: &[usize]) -> String {
    format!("{shape:?}")
}

// ─── Forward kernels ─────────────────────────────────────────────────────

/// 2D cross-correlation, stride 1, zero padding. `input` is `C_in×H×W` or
/// `N×C_in×H×W`; `weight` is `C_out×C_in×K×K` with odd `K`; `bias` is
/// `C_out`. Output spatial size is `H + 2·padding − K + 1`.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>, padding: usize) -> Tensor<T> {
    if input.rank() == 4 {
        let (n, c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]);
        let plane = c * h * w;
        let mut out_data: Vec<T> = Vec::new();
        let mut out_shape = vec![n];
        for i in 0..n {
            let sample = Tensor::from_vec(&[c, h, w], input.data()[i * plane..(i + 1) * plane].to_vec());
            let o = conv2d(&sample, weight, bias, padding);
            if i == 0 {
                out_shape.extend_from_slice(o.shape());
            }
            out_data.extend_from_slice(o.data());
        }
        return Tensor::from_vec(&out_shape, out_data);
    }

    assert_eq!(input.rank(), 3, "conv2d input must be rank 3 or 4, got {:?}", input.shape());
    assert_eq!(weight.rank(), 4, "conv2d weight must be C_out×C_in×K×K, got {:?}", weight.shape());
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, wc_in, k, k2) = (weight.shape()[0], weight.shape()[1], weight.shape()[2], weight.shape()[3]);
    assert_eq!(k, k2, "conv2d kernel must be square, got {:?}", weight.shape());
    assert_eq!(k % 2, 1, "conv2d kernel size must be odd, got {k}");
    assert_eq!(
        c_in, wc_in,
        "conv2d channel mismatch: input {} vs weight {}",
        shape_str(input.shape()),
        shape_str(weight.shape())
    );
    assert_eq!(bias.shape(), [c_out], "conv2d bias must be C_out={c_out}, got {:?}", bias.shape());
    assert!(h + 2 * padding >= k && w + 2 * padding >= k, "conv2d kernel {k} exceeds padded input {h}x{w}+2*{padding}");

    let oh = h + 2 * padding - k + 1;
    let ow = w + 2 * padding - k + 1;
    let mut out = Tensor::zeros(&[c_out, oh, ow]);

    for o in 0..c_out {
        let b = bias.data()[o];
        let out_plane = &mut out.data[o * oh * ow..(o + 1) * oh * ow];
        for v in out_plane.iter_mut() {
            *v = b;
        }
        for c in 0..c_in {
            let in_plane = &input.data()[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weight.data()[((o * c_in + c) * k + ky) * k + kx];
                    if wv == T::zero() {
                        continue;
                    }
                    // Output rows where tap (ky,kx) lands inside the input:
                    // 0 <= y + ky - padding < h, same for x.
                    let y_lo = padding.saturating_sub(ky);
                    let y_hi = (h + padding - ky).min(oh);
                    let x_lo = padding.saturating_sub(kx);
                    let x_hi = (w + padding - kx).min(ow);
                    for y in y_lo..y_hi {
                        let iy = y + ky - padding;
                        let in_row = &in_plane[iy * w..iy * w + w];
                        let out_row = &mut out.data[(o * oh + y) * ow..(o * oh + y) * ow + ow];
                        let shift = kx as isize - padding as isize;
                        for x in x_lo..x_hi {
                            let ix = (x as isize + shift) as usize;
                            out_row[x] += wv * in_row[ix];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Bilinear read of all `C` channels at fractional position `(y, x)`.
/// Contributions from grid cells outside `[0,H)×[0,W)` are zero.
pub fn bilinear_sample<T: Scalar>(input: &Tensor<T>, y: T, x: T) -> Vec<T> {
    assert_eq!(input.rank(), 3, "bilinear_sample input must be C×H×W, got {:?}", input.shape());
    let (c_n, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let mut out = vec![T::zero(); c_n];
    for (c, slot) in out.iter_mut().enumerate() {
        *slot = bilinear_plane(&input.data()[c * h * w..(c + 1) * h * w], h, w, y, x);
    }
    out
}

/// Single-channel bilinear read with the zero-border convention.
#[inline]
pub fn bilinear_plane<T: Scalar>(plane: &[T], h: usize, w: usize, y: T, x: T) -> T {
    let y0 = y.floor();
    let x0 = x.floor();
    let wy1 = y - y0;
    let wx1 = x - x0;
    let wy0 = T::one() - wy1;
    let wx0 = T::one() - wx1;
    let iy0 = y0.as_f64() as isize;
    let ix0 = x0.as_f64() as isize;

    let mut acc = T::zero();
    for (dy, wy) in [(0isize, wy0), (1, wy1)] {
        for (dx, wx) in [(0isize, wx0), (1, wx1)] {
            let gy = iy0 + dy;
            let gx = ix0 + dx;
            if gy >= 0 && (gy as usize) < h && gx >= 0 && (gx as usize) < w {
                acc += wy * wx * plane[gy as usize * w + gx as usize];
            }
        }
    }
    acc
}

/// Channel-to-space rearrangement: `r²C×H×W → C×rH×rW` with
/// `out(c, r·h+dy, r·w+dx) = in(c·r² + dy·r + dx, h, w)`.
pub fn pixel_shuffle<T: Scalar>(input: &Tensor<T>, r: usize) -> Tensor<T> {
    assert_eq!(input.rank(), 3, "pixel_shuffle input must be rank 3, got {:?}", input.shape());
    let (c_r2, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    assert!(r > 0 && c_r2 % (r * r) == 0, "pixel_shuffle channels {c_r2} not divisible by r²={}", r * r);
    let c = c_r2 / (r * r);
    let mut out = Tensor::zeros(&[c, r * h, r * w]);
    for oc in 0..c {
        for dy in 0..r {
            for dx in 0..r {
                let ic = oc * r * r + dy * r + dx;
                for y in 0..h {
                    for x in 0..w {
                        let v = input.get3(ic, y, x);
                        out.set3(oc, r * y + dy, r * x + dx, v);
                    }
                }
            }
        }
    }
    out
}

/// Inverse of [`pixel_shuffle`]: `C×rH×rW → r²C×H×W`.
pub fn pixel_unshuffle<T: Scalar>(input: &Tensor<T>, r: usize) -> Tensor<T> {
    assert_eq!(input.rank(), 3, "pixel_unshuffle input must be rank 3, got {:?}", input.shape());
    let (c, rh, rw) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    assert!(r > 0 && rh % r == 0 && rw % r == 0, "pixel_unshuffle spatial dims {rh}x{rw} not divisible by r={r}");
    let (h, w) = (rh / r, rw / r);
    let mut out = Tensor::zeros(&[c * r * r, h, w]);
    for oc in 0..c {
        for dy in 0..r {
            for dx in 0..r {
                let ic = oc * r * r + dy * r + dx;
                for y in 0..h {
                    for x in 0..w {
                        let v = input.get3(oc, r * y + dy, r * x + dx);
                        out.set3(ic, y, x, v);
                    }
                }
            }
        }
    }
    out
}

// ─── Activations ─────────────────────────────────────────────────────────

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// At exactly 0 the negative-side slope is chosen (fixed subgradient so the
/// checks are deterministic); same convention in [`leaky_relu`].
#[inline]
pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

#[inline]
pub fn leaky_relu<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        slope * x
    }
}

// ─── Tests ───────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn test_from_vec_rejects_length_mismatch() {
        let r = std::panic::catch_unwind(|| Tensor::from_vec(&[2, 2], vec![1.0f32; 3]));
        assert!(r.is_err(), "length 3 must not satisfy shape [2,2]");
    }

    #[test]
    fn test_conv2d_all_ones_tap_counts() {
        // 1×3×3 ones, 1×1×3×3 ones, padding 1: each output counts the taps
        // that overlap the input — 9 at the center, 4 at corners.
        let input = Tensor::from_vec(&[1, 3, 3], vec![1.0f64; 9]);
        let weight = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9]);
        let bias = Tensor::zeros(&[1]);
        let out = conv2d(&input, &weight, &bias, 1);
        assert_eq!(out.shape(), [1, 3, 3]);
        assert_eq!(out.get3(0, 1, 1), 9.0);
        for &(y, x) in &[(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert_eq!(out.get3(0, y, x), 4.0, "corner ({y},{x})");
        }
        for &(y, x) in &[(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert_eq!(out.get3(0, y, x), 6.0, "edge ({y},{x})");
        }
    }

    #[test]
    fn test_conv2d_delta_kernel_is_identity() {
        let mut rng = crate::train::seeded_rng(7);
        let input = Tensor::<f64>::uniform(&[3, 5, 4], -1.0, 1.0, &mut rng);
        // Delta kernel: 1 at the center tap of the matching channel.
        let k = 3;
        let mut weight = Tensor::zeros(&[3, 3, k, k]);
        for c in 0..3 {
            let idx = ((c * 3 + c) * k + 1) * k + 1;
            weight.data_mut()[idx] = 1.0;
        }
        let bias = Tensor::zeros(&[3]);
        let out = conv2d(&input, &weight, &bias, (k - 1) / 2);
        assert_eq!(out, input);
    }

    #[test]
    fn test_conv2d_channel_mismatch_panics_with_shapes() {
        let input = Tensor::from_vec(&[2, 3, 3], vec![0.0f32; 18]);
        let weight = Tensor::from_vec(&[1, 3, 3, 3], vec![0.0; 27]);
        let bias = Tensor::zeros(&[1]);
        let r = std::panic::catch_unwind(|| conv2d(&input, &weight, &bias, 1));
        let msg = *r.unwrap_err().downcast::<alloc::string::String>().unwrap();
        assert!(msg.contains("[2, 3, 3]") && msg.contains("[1, 3, 3, 3]"), "message must carry both shapes: {msg}");
    }

    #[test]
    fn test_conv2d_batched_matches_per_sample() {
        let mut rng = crate::train::seeded_rng(3);
        let batched = Tensor::<f64>::uniform(&[2, 3, 5, 5], -1.0, 1.0, &mut rng);
        let weight = Tensor::<f64>::uniform(&[4, 3, 3, 3], -0.5, 0.5, &mut rng);
        let bias = Tensor::<f64>::uniform(&[4], -0.1, 0.1, &mut rng);
        let out = conv2d(&batched, &weight, &bias, 1);
        assert_eq!(out.shape(), [2, 4, 5, 5]);
        for i in 0..2 {
            let sample = Tensor::from_vec(&[3, 5, 5], batched.data()[i * 75..(i + 1) * 75].to_vec());
            let per = conv2d(&sample, &weight, &bias, 1);
            assert_eq!(&out.data()[i * 100..(i + 1) * 100], per.data());
        }
    }

    #[test]
    fn test_bilinear_sample_integer_and_midpoint() {
        let input = Tensor::from_vec(&[1, 2, 2], vec![0.0f64, 1.0, 2.0, 3.0]);
        assert_eq!(bilinear_sample(&input, 1.0, 0.0), vec![2.0]);
        assert_eq!(bilinear_sample(&input, 0.5, 0.5), vec![1.5]);
        assert_eq!(bilinear_sample(&input, -2.0, -2.0), vec![0.0], "fully outside reads zero");
    }

    #[test]
    fn test_bilinear_sample_multi_channel() {
        let input = Tensor::from_vec(&[2, 2, 2], vec![0.0f64, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0]);
        assert_eq!(bilinear_sample(&input, 0.5, 0.5), vec![1.5, 11.5]);
    }

    #[test]
    fn test_pixel_shuffle_definition() {
        let input = Tensor::from_vec(&[4, 1, 1], vec![1.0f32, 2.0, 3.0, 4.0]);
        let out = pixel_shuffle(&input, 2);
        assert_eq!(out.shape(), [1, 2, 2]);
        assert_eq!(out.data(), [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn test_pixel_shuffle_roundtrip_all_r() {
        let mut rng = crate::train::seeded_rng(11);
        for r in [2usize, 3, 4] {
            let input = Tensor::<f32>::uniform(&[r * r * 2, 3, 5], -1.0, 1.0, &mut rng);
            let back = pixel_unshuffle(&pixel_shuffle(&input, r), r);
            assert_eq!(back, input, "r={r}");
        }
    }

    #[test]
    fn test_pixel_shuffle_shape_and_divisibility() {
        let input = Tensor::<f32>::zeros(&[16, 3, 3]);
        assert_eq!(pixel_shuffle(&input, 4).shape(), [1, 12, 12]);
        let bad = Tensor::<f32>::zeros(&[6, 3, 3]);
        assert!(std::panic::catch_unwind(|| pixel_shuffle(&bad, 2)).is_err());
    }

    #[test]
    fn test_activation_anchors() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!((0.0f64).tanh(), 0.0);
        assert_eq!(relu(-3.0f32), 0.0);
        assert_eq!(relu(2.5f32), 2.5);
        assert!((leaky_relu(-1.0f64, 0.1) + 0.1).abs() < 1e-15);
    }
}
