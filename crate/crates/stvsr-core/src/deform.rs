//! Deformable 2D convolution: kernel taps sample the input at positions
//! displaced by a learned, per-position offset field, evaluated with
//! bilinear interpolation (zero border), then the ordinary convolution
//! weights are applied. Single-level, ungrouped, offsets only (no
//! modulation masks).
//!
//! The offset field for kernel size K is a `(2·K·K)×H×W` tensor: channel
//! `2k` holds Δy and channel `2k+1` holds Δx for tap `k`, taps enumerated
//! row-major, displacements in pixel units of the feature grid.
//!
//! Also defined here: the two-layer offset predictor whose final layer is
//! zero-initialized so a fresh module starts from identity sampling.

use alloc::string::String;
use alloc::vec;
use rand::Rng;

use crate::params::{Conv2dLayer, Graph, ParamStore, WeightInit};
use crate::tape::Var;
use crate::tensor::{Scalar, Tensor};

/// Validates the offset-field contract against a feature map and kernel.
fn check_offset_shape<T: Scalar>(offsets: &Tensor<T>, k: usize, h: usize, w: usize) {
    assert_eq!(
        offsets.shape(),
        [2 * k * k, h, w],
        "offset field must be (2·K·K)×H×W = [{}, {h}, {w}] for K={k}, got {:?}",
        2 * k * k,
        offsets.shape()
    );
}

/// Forward deformable convolution. `input` is `C×H×W`, `offsets` is
/// `(2K²)×H×W`, `weight` is `C_out×C×K×K` (odd K), `bias` is `C_out`;
/// output is `C_out×H×W` (same-padding geometry).
pub fn deform_conv2d<T: Scalar>(
    input: &Tensor<T>,
    offsets: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Tensor<T> {
    assert_eq!(input.rank(), 3, "deform_conv2d input must be C×H×W, got {:?}", input.shape());
    assert_eq!(weight.rank(), 4, "deform_conv2d weight must be C_out×C×K×K, got {:?}", weight.shape());
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, k) = (weight.shape()[0], weight.shape()[2]);
    assert_eq!(weight.shape()[1], c_in, "deform_conv2d channel mismatch: input {:?} vs weight {:?}", input.shape(), weight.shape());
    assert_eq!(weight.shape()[3], k, "deform_conv2d kernel must be square, got {:?}", weight.shape());
    assert_eq!(k % 2, 1, "deform_conv2d kernel size must be odd, got {k}");
    check_offset_shape(offsets, k, h, w);
    assert_eq!(bias.shape(), [c_out], "deform_conv2d bias must be C_out={c_out}, got {:?}", bias.shape());

    let half = (k / 2) as isize;
    let taps = k * k;
    let plane = h * w;
    let mut out = Tensor::zeros(&[c_out, h, w]);
    // Per-position sample matrix: samples[c * taps + t].
    let mut samples = vec![T::zero(); c_in * taps];

    for y in 0..h {
        for x in 0..w {
            let pos = y * w + x;
            for t in 0..taps {
                let ry = (t / k) as isize - half;
                let rx = (t % k) as isize - half;
                let py = T::from_f64((y as isize + ry) as f64) + offsets.data()[2 * t * plane + pos];
                let px = T::from_f64((x as isize + rx) as f64) + offsets.data()[(2 * t + 1) * plane + pos];
                for c in 0..c_in {
                    samples[c * taps + t] =
                        crate::tensor::bilinear_plane(&input.data()[c * plane..(c + 1) * plane], h, w, py, px);
                }
            }
            for o in 0..c_out {
                let w_row = &weight.data()[o * c_in * taps..(o + 1) * c_in * taps];
                let mut acc = bias.data()[o];
                for (wv, sv) in w_row.iter().zip(&samples) {
                    acc += *wv * *sv;
                }
                out.data_mut()[o * plane + pos] = acc;
            }
        }
    }
    out
}

/// Gradients of [`deform_conv2d`] w.r.t. every argument.
pub struct DeformGrads<T> {
    pub input: Tensor<T>,
    pub offsets: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Reverse-mode rules. The bilinear read at `(py, px)` touches four grid
/// cells; its value gradient scatters into those cells and its positional
/// derivative (piecewise-linear in py/px) feeds the offset gradient.
pub fn deform_conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    offsets: &Tensor<T>,
    weight: &Tensor<T>,
    gout: &Tensor<T>,
) -> DeformGrads<T> {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, k) = (weight.shape()[0], weight.shape()[2]);
    let half = (k / 2) as isize;
    let taps = k * k;
    let plane = h * w;

    let mut gi = Tensor::zeros(input.shape());
    let mut goff = Tensor::zeros(offsets.shape());
    let mut gw = Tensor::zeros(weight.shape());
    let mut gb = Tensor::zeros(&[c_out]);

    for o in 0..c_out {
        gb.data_mut()[o] = gout.data()[o * plane..(o + 1) * plane].iter().copied().sum();
    }

    for y in 0..h {
        for x in 0..w {
            let pos = y * w + x;
            for t in 0..taps {
                let ry = (t / k) as isize - half;
                let rx = (t % k) as isize - half;
                let py = T::from_f64((y as isize + ry) as f64) + offsets.data()[2 * t * plane + pos];
                let px = T::from_f64((x as isize + rx) as f64) + offsets.data()[(2 * t + 1) * plane + pos];

                // Corner geometry shared across channels.
                let y0 = py.floor();
                let x0 = px.floor();
                let wy1 = py - y0;
                let wx1 = px - x0;
                let wy0 = T::one() - wy1;
                let wx0 = T::one() - wx1;
                let iy0 = y0.as_f64() as isize;
                let ix0 = x0.as_f64() as isize;

                let mut gdy_total = T::zero();
                let mut gdx_total = T::zero();

                for c in 0..c_in {
                    // dL/d(sample value for this channel & tap).
                    let mut gs = T::zero();
                    for o in 0..c_out {
                        gs += gout.data()[o * plane + pos] * weight.data()[(o * c_in + c) * taps + t];
                    }

                    let in_plane = &input.data()[c * plane..(c + 1) * plane];
                    let mut sample = T::zero();
                    let corner = |dy: isize, dx: isize, wy: T, wx: T, gi: &mut Tensor<T>| -> T {
                        let gy = iy0 + dy;
                        let gx = ix0 + dx;
                        if gy >= 0 && (gy as usize) < h && gx >= 0 && (gx as usize) < w {
                            let idx = gy as usize * w + gx as usize;
                            let v = in_plane[idx];
                            gi.data_mut()[c * plane + idx] += gs * wy * wx;
                            v
                        } else {
                            T::zero()
                        }
                    };
                    let v00 = corner(0, 0, wy0, wx0, &mut gi);
                    let v01 = corner(0, 1, wy0, wx1, &mut gi);
                    let v10 = corner(1, 0, wy1, wx0, &mut gi);
                    let v11 = corner(1, 1, wy1, wx1, &mut gi);
                    sample += wy0 * (wx0 * v00 + wx1 * v01) + wy1 * (wx0 * v10 + wx1 * v11);

                    // d(sample)/d(py) and /d(px): derivative of the bilinear
                    // weights; zero-border cells contribute zero value.
                    let dsdy = wx0 * (v10 - v00) + wx1 * (v11 - v01);
                    let dsdx = wy0 * (v01 - v00) + wy1 * (v11 - v10);
                    gdy_total += gs * dsdy;
                    gdx_total += gs * dsdx;

                    for o in 0..c_out {
                        gw.data_mut()[(o * c_in + c) * taps + t] += gout.data()[o * plane + pos] * sample;
                    }
                }

                goff.data_mut()[2 * t * plane + pos] += gdy_total;
                goff.data_mut()[(2 * t + 1) * plane + pos] += gdx_total;
            }
        }
    }

    DeformGrads { input: gi, offsets: goff, weight: gw, bias: gb }
}

// ─── Offset predictor ────────────────────────────────────────────────────

/// Two-layer offset predictor: 3×3 conv (C_in → C_in, same padding) →
/// leaky_relu(0.1) → 3×3 conv (C_in → 2·K·K). The final layer is
/// zero-initialized so a freshly built predictor maps everything to the
/// all-zero offset field (identity sampling).
pub struct OffsetPredictor {
    conv1: Conv2dLayer,
    conv2: Conv2dLayer,
    k: usize,
}

impl OffsetPredictor {
    pub fn init<T: Scalar, R: Rng>(store: &mut ParamStore<T>, rng: &mut R, prefix: &str, c_in: usize, k: usize) -> Self {
        assert!(c_in > 0 && k > 0, "offset predictor needs positive C_in and K");
        let conv1 = Conv2dLayer::init(store, rng, &name(prefix, "conv1"), c_in, c_in, 3, WeightInit::Uniform);
        let conv2 = Conv2dLayer::init(store, rng, &name(prefix, "conv2"), c_in, 2 * k * k, 3, WeightInit::Zeros);
        OffsetPredictor { conv1, conv2, k }
    }

    /// Predict an offset field for a `C_in×H×W` input.
    pub fn apply<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Var {
        let mid = self.conv1.apply(g, x);
        let mid = g.tape.leaky_relu(mid, T::from_f64(0.1));
        self.conv2.apply(g, mid)
    }

    pub fn kernel_size(&self) -> usize {
        self.k
    }
}

fn name(prefix: &str, leaf: &str) -> String {
    let mut s = String::from(prefix);
    s.push('.');
    s.push_str(leaf);
    s
}

// ─── Tests ───────────────────────────────────────────────────────────────
