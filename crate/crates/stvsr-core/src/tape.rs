//! Reverse-mode automatic differentiation over a recorded operation tape.
//!
//! Every differentiable computation runs through a [`Tape`]: operands live in
//! an arena of nodes addressed by [`Var`] handles, each operation appends one
//! record, and [`Tape::backward`] replays the records in reverse execution
//! order, accumulating vector-Jacobian products into every gradient-requiring
//! node. Backward replays propagate through a per-call scratch buffer and are
//! added into the persistent gradients at the end, so repeated calls without
//! a reset accumulate (and never double-count earlier passes).

use alloc::vec;
use alloc::vec::Vec;
// Resolves float intrinsics in the no_std build (libm); redundant when
// std is linked for tests.
#[allow(unused_imports)]
use num_traits::Float;

use crate::deform;
use crate::tensor::{self, Scalar, Tensor};

/// Handle into a tape's node arena.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Var(pub(crate) usize);

struct Node<T> {
    value: Tensor<T>,
    grad: Option<Tensor<T>>,
    requires_grad: bool,
}

enum Op<T> {
    Add { a: Var, b: Var, out: Var },
    Mul { a: Var, b: Var, out: Var },
    ScalarMul { a: Var, k: T, out: Var },
    Sum { a: Var, out: Var },
    Mean { a: Var, out: Var },
    Sigmoid { a: Var, out: Var },
    Tanh { a: Var, out: Var },
    Relu { a: Var, out: Var },
    LeakyRelu { a: Var, slope: T, out: Var },
    Conv2d { input: Var, weight: Var, bias: Option<Var>, padding: usize, out: Var },
    DeformConv2d { input: Var, offsets: Var, weight: Var, bias: Option<Var>, out: Var },
    PixelShuffle { a: Var, r: usize, out: Var },
    ConcatChannels { parts: Vec<Var>, out: Var },
    SliceChannels { a: Var, from: usize, out: Var },
    Charbonnier { pred: Var, gt: Var, eps: T, out: Var },
}

/// Gradient tape: node arena plus the operations recorded against it.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    ops: Vec<Op<T>>,
    /// Self-test hook: deliberately mis-scales the convolution weight
    /// gradient so the finite-difference suite has a negative control.
    pub corrupt_conv_weight_grad: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), ops: Vec::new(), corrupt_conv_weight_grad: false }
    }

    fn push(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, grad: None, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Insert a constant (gradient never requested).
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, false)
    }

    /// Insert a trainable leaf (gradient accumulated by backward).
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Drop all accumulated gradients (start of a fresh optimization step).
    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Whether a scratch gradient must be routed into `v`. `requires_grad`
    /// is propagated at record time (an output requires a gradient when any
    /// input does), so this one flag covers interior nodes too.
    #[inline]
    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn any_requires(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    // ─── Recorded operations ─────────────────────────────────────────────

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.shape(), vb.shape(), "add shape mismatch: {:?} vs {:?}", va.shape(), vb.shape());
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::from_vec(va.shape(), data);
        let rq = self.any_requires(&[a, b]);
        let out = self.push(value, rq);
        self.ops.push(Op::Add { a, b, out });
        out
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.shape(), vb.shape(), "mul shape mismatch: {:?} vs {:?}", va.shape(), vb.shape());
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
        let value = Tensor::from_vec(va.shape(), data);
        let rq = self.any_requires(&[a, b]);
        let out = self.push(value, rq);
        self.ops.push(Op::Mul { a, b, out });
        out
    }

    pub fn scalar_mul(&mut self, a: Var, k: T) -> Var {
        let value = self.nodes[a.0].value.map(|x| k * x);
        let rq = self.needs(a);
        let out = self.push(value, rq);
        self.ops.push(Op::ScalarMul { a, k, out });
        out
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: T = self.nodes[a.0].value.data().iter().copied().sum();
        let rq = self.needs(a);
        let out = self.push(Tensor::scalar(s), rq);
        self.ops.push(Op::Sum { a, out });
        out
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].value.numel();
        let s: T = self.nodes[a.0].value.data().iter().copied().sum();
        let rq = self.needs(a);
        let out = self.push(Tensor::scalar(s / T::from_f64(n as f64)), rq);
        self.ops.push(Op::Mean { a, out });
        out
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(tensor::sigmoid);
        let rq = self.needs(a);
        let out = self.push(value, rq);
        self.ops.push(Op::Sigmoid { a, out });
        out
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.tanh());
        let rq = self.needs(a);
        let out = self.push(value, rq);
        self.ops.push(Op::Tanh { a, out });
        out
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(tensor::relu);
        let rq = self.needs(a);
        let out = self.push(value, rq);
        self.ops.push(Op::Relu { a, out });
        out
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let value = self.nodes[a.0].value.map(|x| tensor::leaky_relu(x, slope));
        let rq = self.needs(a);
        let out = self.push(value, rq);
        self.ops.push(Op::LeakyRelu { a, slope, out });
        out
    }

    /// Cross-correlation, stride 1, zero padding (see [`tensor::conv2d`]).
    /// `bias = None` behaves as a zero bias.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Option<Var>, padding: usize) -> Var {
        let value = {
            let zero_bias;
            let bias_t = match bias {
                Some(b) => &self.nodes[b.0].value,
                None => {
                    zero_bias = Tensor::zeros(&[self.nodes[weight.0].value.shape()[0]]);
                    &zero_bias
                }
            };
            tensor::conv2d(&self.nodes[input.0].value, &self.nodes[weight.0].value, bias_t, padding)
        };
        let mut involved = vec![input, weight];
        involved.extend(bias);
        let rq = self.any_requires(&involved);
        let out = self.push(value, rq);
        self.ops.push(Op::Conv2d { input, weight, bias, padding, out });
        out
    }

    /// Deformable convolution with same-padding geometry (see
    /// [`deform::deform_conv2d`]).
    pub fn deform_conv2d(&mut self, input: Var, offsets: Var, weight: Var, bias: Option<Var>) -> Var {
        let value = {
            let zero_bias;
            let bias_t = match bias {
                Some(b) => &self.nodes[b.0].value,
                None => {
                    zero_bias = Tensor::zeros(&[self.nodes[weight.0].value.shape()[0]]);
                    &zero_bias
                }
            };
            deform::deform_conv2d(
                &self.nodes[input.0].value,
                &self.nodes[offsets.0].value,
                &self.nodes[weight.0].value,
                bias_t,
            )
        };
        let mut involved = vec![input, offsets, weight];
        involved.extend(bias);
        let rq = self.any_requires(&involved);
        let out = self.push(value, rq);
        self.ops.push(Op::DeformConv2d { input, offsets, weight, bias, out });
        out
    }

    pub fn pixel_shuffle(&mut self, a: Var, r: usize) -> Var {
        let value = tensor::pixel_shuffle(&self.nodes[a.0].value, r);
        let rq = self.needs(a);
        let out = self.push(value, rq);
        self.ops.push(Op::PixelShuffle { a, r, out });
        out
    }

    /// Concatenate rank-3 tensors along the channel axis; non-channel
    /// extents must agree.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_channels needs at least one input");
        let (h, w) = {
            let first = &self.nodes[parts[0].0].value;
            assert_eq!(first.rank(), 3, "concat_channels expects C×H×W inputs, got {:?}", first.shape());
            (first.shape()[1], first.shape()[2])
        };
        let mut c_total = 0;
        for &p in parts {
            let v = &self.nodes[p.0].value;
            assert_eq!(
                (v.shape()[1], v.shape()[2]),
                (h, w),
                "concat_channels spatial mismatch: {:?} vs {}x{}",
                v.shape(),
                h,
                w
            );
            c_total += v.shape()[0];
        }
        let mut data = Vec::with_capacity(c_total * h * w);
        for &p in parts {
            data.extend_from_slice(self.nodes[p.0].value.data());
        }
        let value = Tensor::from_vec(&[c_total, h, w], data);
        let rq = self.any_requires(parts);
        let out = self.push(value, rq);
        self.ops.push(Op::ConcatChannels { parts: parts.to_vec(), out });
        out
    }

    /// Copy out channels `from..to` of a rank-3 tensor.
    pub fn slice_channels(&mut self, a: Var, from: usize, to: usize) -> Var {
        let v = &self.nodes[a.0].value;
        assert_eq!(v.rank(), 3, "slice_channels expects C×H×W, got {:?}", v.shape());
        assert!(from < to && to <= v.shape()[0], "slice_channels range {from}..{to} out of {:?}", v.shape());
        let (h, w) = (v.shape()[1], v.shape()[2]);
        let data = v.data()[from * h * w..to * h * w].to_vec();
        let value = Tensor::from_vec(&[to - from, h, w], data);
        let rq = self.needs(a);
        let out = self.push(value, rq);
        self.ops.push(Op::SliceChannels { a, from, out });
        out
    }

    /// Charbonnier penalty: mean over all elements of `sqrt(diff² + eps²)`.
    /// Accumulation runs in f64 so the zero-residual anchor `loss == eps`
    /// holds bit-exactly in the f32 pipeline.
    pub fn charbonnier(&mut self, pred: Var, gt: Var, eps: T) -> Var {
        let (vp, vg) = (&self.nodes[pred.0].value, &self.nodes[gt.0].value);
        assert_eq!(vp.shape(), vg.shape(), "charbonnier shape mismatch: {:?} vs {:?}", vp.shape(), vg.shape());
        let e2 = eps.as_f64() * eps.as_f64();
        let sum: f64 = vp
            .data()
            .iter()
            .zip(vg.data())
            .map(|(&p, &g)| {
                let d = p.as_f64() - g.as_f64();
                (d * d + e2).sqrt()
            })
            .sum();
        let value = Tensor::scalar(T::from_f64(sum / vp.numel() as f64));
        let rq = self.any_requires(&[pred, gt]);
        let out = self.push(value, rq);
        self.ops.push(Op::Charbonnier { pred, gt, eps, out });
        out
    }

    // ─── Backward ────────────────────────────────────────────────────────

    /// Reverse-mode sweep from a scalar `loss`: accumulates `d loss / d v`
    /// into every gradient-requiring node reachable from it.
    pub fn backward(&mut self, loss: Var) {
        assert!(
            self.nodes[loss.0].value.is_scalar(),
            "backward requires a scalar loss, got shape {:?}",
            self.nodes[loss.0].value.shape()
        );

        let mut g: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        g[loss.0] = Some(Tensor::scalar(T::one()));

        for i in (0..self.ops.len()).rev() {
            self.replay(i, &mut g);
        }

        for (node, scratch) in self.nodes.iter_mut().zip(g) {
            if !node.requires_grad {
                continue;
            }
            if let Some(s) = scratch {
                match &mut node.grad {
                    Some(dst) => {
                        for (d, v) in dst.data_mut().iter_mut().zip(s.data()) {
                            *d += *v;
                        }
                    }
                    None => node.grad = Some(s),
                }
            }
        }
    }

    /// Accumulate `src` into the scratch slot for `v` (allocating zeros on
    /// first touch), if `v` participates in gradient flow.
    fn route(&self, g: &mut [Option<Tensor<T>>], v: Var, src: &[T]) {
        if !self.needs(v) {
            return;
        }
        let slot = g[v.0].get_or_insert_with(|| Tensor::zeros(self.nodes[v.0].value.shape()));
        debug_assert_eq!(slot.numel(), src.len());
        for (d, s) in slot.data_mut().iter_mut().zip(src) {
            *d += *s;
        }
    }

    /// Apply one recorded op's vector-Jacobian products to the scratch
    /// gradients.
    fn replay(&self, op_index: usize, g: &mut [Option<Tensor<T>>]) {
        match &self.ops[op_index] {
            Op::Add { a, b, out } => {
                let Some(go) = g[out.0].clone() else { return };
                self.route(g, *a, go.data());
                self.route(g, *b, go.data());
            }
            Op::Mul { a, b, out } => {
                let (a, b) = (*a, *b);
                let Some(go) = g[out.0].clone() else { return };
                if self.needs(a) {
                    let src: Vec<T> =
                        go.data().iter().zip(self.nodes[b.0].value.data()).map(|(&gv, &bv)| gv * bv).collect();
                    self.route(g, a, &src);
                }
                if self.needs(b) {
                    let src: Vec<T> =
                        go.data().iter().zip(self.nodes[a.0].value.data()).map(|(&gv, &av)| gv * av).collect();
                    self.route(g, b, &src);
                }
            }
            Op::ScalarMul { a, k, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let src: Vec<T> = go.data().iter().map(|&gv| *k * gv).collect();
                self.route(g, *a, &src);
            }
            Op::Sum { a, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let src = vec![go.data()[0]; self.nodes[a.0].value.numel()];
                self.route(g, *a, &src);
            }
            Op::Mean { a, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let n = self.nodes[a.0].value.numel();
                let src = vec![go.data()[0] / T::from_f64(n as f64); n];
                self.route(g, *a, &src);
            }
            Op::Sigmoid { a, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let src: Vec<T> = go
                    .data()
                    .iter()
                    .zip(self.nodes[out.0].value.data())
                    .map(|(&gv, &s)| gv * s * (T::one() - s))
                    .collect();
                self.route(g, *a, &src);
            }
            Op::Tanh { a, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let src: Vec<T> = go
                    .data()
                    .iter()
                    .zip(self.nodes[out.0].value.data())
                    .map(|(&gv, &t)| gv * (T::one() - t * t))
                    .collect();
                self.route(g, *a, &src);
            }
            Op::Relu { a, out } => {
                let Some(go) = g[out.0].clone() else { return };
                // At exactly 0 the negative side (slope 0) is chosen.
                let src: Vec<T> = go
                    .data()
                    .iter()
                    .zip(self.nodes[a.0].value.data())
                    .map(|(&gv, &x)| if x > T::zero() { gv } else { T::zero() })
                    .collect();
                self.route(g, *a, &src);
            }
            Op::LeakyRelu { a, slope, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let src: Vec<T> = go
                    .data()
                    .iter()
                    .zip(self.nodes[a.0].value.data())
                    .map(|(&gv, &x)| if x > T::zero() { gv } else { *slope * gv })
                    .collect();
                self.route(g, *a, &src);
            }
            Op::Conv2d { input, weight, bias, padding, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let (gi, gw, gb) = conv2d_backward(
                    &self.nodes[input.0].value,
                    &self.nodes[weight.0].value,
                    *padding,
                    &go,
                    self.needs(*input),
                    self.needs(*weight),
                );
                if let Some(mut gw) = gw {
                    if self.corrupt_conv_weight_grad {
                        for v in gw.data_mut() {
                            *v *= T::from_f64(1.01);
                        }
                    }
                    self.route(g, *weight, gw.data());
                }
                if let Some(gi) = gi {
                    self.route(g, *input, gi.data());
                }
                if let Some(b) = bias {
                    self.route(g, *b, gb.data());
                }
            }
            Op::DeformConv2d { input, offsets, weight, bias, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let grads = deform::deform_conv2d_backward(
                    &self.nodes[input.0].value,
                    &self.nodes[offsets.0].value,
                    &self.nodes[weight.0].value,
                    &go,
                );
                self.route(g, *input, grads.input.data());
                self.route(g, *offsets, grads.offsets.data());
                self.route(g, *weight, grads.weight.data());
                if let Some(b) = bias {
                    self.route(g, *b, grads.bias.data());
                }
            }
            Op::PixelShuffle { a, r, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let gi = tensor::pixel_unshuffle(&go, *r);
                self.route(g, *a, gi.data());
            }
            Op::ConcatChannels { parts, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let mut offset = 0usize;
                for &p in parts {
                    let n = self.nodes[p.0].value.numel();
                    self.route(g, p, &go.data()[offset..offset + n]);
                    offset += n;
                }
            }
            Op::SliceChannels { a, from, out } => {
                let (a, from) = (*a, *from);
                let Some(go) = g[out.0].clone() else { return };
                if !self.needs(a) {
                    return;
                }
                let (h, w) = (self.nodes[a.0].value.shape()[1], self.nodes[a.0].value.shape()[2]);
                let start = from * h * w;
                let slot = g[a.0].get_or_insert_with(|| Tensor::zeros(self.nodes[a.0].value.shape()));
                for (d, s) in slot.data_mut()[start..start + go.numel()].iter_mut().zip(go.data()) {
                    *d += *s;
                }
            }
            Op::Charbonnier { pred, gt, eps, out } => {
                let Some(go) = g[out.0].clone() else { return };
                let gv = go.data()[0].as_f64();
                let e2 = eps.as_f64() * eps.as_f64();
                let vp = &self.nodes[pred.0].value;
                let vg = &self.nodes[gt.0].value;
                let n = vp.numel() as f64;
                // d/d pred = diff / (N · sqrt(diff² + eps²)); gt gets the negation.
                let dpred: Vec<T> = vp
                    .data()
                    .iter()
                    .zip(vg.data())
                    .map(|(&p, &t)| {
                        let d = p.as_f64() - t.as_f64();
                        T::from_f64(gv * d / ((d * d + e2).sqrt() * n))
                    })
                    .collect();
                self.route(g, *pred, &dpred);
                if self.needs(*gt) {
                    let dgt: Vec<T> = dpred.iter().map(|&v| -v).collect();
                    self.route(g, *gt, &dgt);
                }
            }
        }
    }
}

/// dL/d(input), dL/d(weight), dL/d(bias) of [`tensor::conv2d`]. Rank-4
/// inputs are handled per sample with weight/bias gradients summed.
fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    padding: usize,
    gout: &Tensor<T>,
    need_input: bool,
    need_weight: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>, Tensor<T>) {
    if input.rank() == 4 {
        let n = input.shape()[0];
        let (c, h, w) = (input.shape()[1], input.shape()[2], input.shape()[3]);
        let in_plane = c * h * w;
        let out_plane = gout.numel() / n;
        let mut gi_all = need_input.then(|| Tensor::zeros(input.shape()));
        let mut gw_all = need_weight.then(|| Tensor::zeros(weight.shape()));
        let mut gb_all = Tensor::zeros(&[weight.shape()[0]]);
        for i in 0..n {
            let sample = Tensor::from_vec(&[c, h, w], input.data()[i * in_plane..(i + 1) * in_plane].to_vec());
            let go = Tensor::from_vec(
                &gout.shape()[1..],
                gout.data()[i * out_plane..(i + 1) * out_plane].to_vec(),
            );
            let (gi, gw, gb) = conv2d_backward(&sample, weight, padding, &go, need_input, need_weight);
            if let (Some(dst), Some(src)) = (gi_all.as_mut(), gi) {
                dst.data_mut()[i * in_plane..(i + 1) * in_plane].copy_from_slice(src.data());
            }
            if let (Some(dst), Some(src)) = (gw_all.as_mut(), gw) {
                for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                    *d += *s;
                }
            }
            for (d, s) in gb_all.data_mut().iter_mut().zip(gb.data()) {
                *d += *s;
            }
        }
        return (gi_all, gw_all, gb_all);
    }

    assert_eq!(input.rank(), 3, "conv2d backward expects rank-3 input, got {:?}", input.shape());
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (c_out, k) = (weight.shape()[0], weight.shape()[2]);
    let (oh, ow) = (gout.shape()[1], gout.shape()[2]);

    let mut gbias = Tensor::zeros(&[c_out]);
    for o in 0..c_out {
        gbias.data_mut()[o] = gout.data()[o * oh * ow..(o + 1) * oh * ow].iter().copied().sum();
    }

    let mut ginput = need_input.then(|| Tensor::zeros(&[c_in, h, w]));
    let mut gweight = need_weight.then(|| Tensor::zeros(weight.shape()));

    for o in 0..c_out {
        for c in 0..c_in {
            for ky in 0..k {
                for kx in 0..k {
                    let y_lo = padding.saturating_sub(ky);
                    let y_hi = (h + padding - ky).min(oh);
                    let x_lo = padding.saturating_sub(kx);
                    let x_hi = (w + padding - kx).min(ow);
                    let shift = kx as isize - padding as isize;
                    if let Some(gw) = gweight.as_mut() {
                        let mut total = T::zero();
                        for y in y_lo..y_hi {
                            let iy = y + ky - padding;
                            let in_row = &input.data()[(c * h + iy) * w..(c * h + iy) * w + w];
                            let go_row = &gout.data()[(o * oh + y) * ow..(o * oh + y) * ow + ow];
                            for x in x_lo..x_hi {
                                total += go_row[x] * in_row[(x as isize + shift) as usize];
                            }
                        }
                        gw.data_mut()[((o * c_in + c) * k + ky) * k + kx] += total;
                    }
                    if let Some(gi) = ginput.as_mut() {
                        let wv = weight.data()[((o * c_in + c) * k + ky) * k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        for y in y_lo..y_hi {
                            let iy = y + ky - padding;
                            let go_row = &gout.data()[(o * oh + y) * ow..(o * oh + y) * ow + ow];
                            let gi_row = &mut gi.data_mut()[(c * h + iy) * w..(c * h + iy) * w + w];
                            for x in x_lo..x_hi {
                                gi_row[(x as isize + shift) as usize] += wv * go_row[x];
                            }
                        }
                    }
                }
            }
        }
    }
    (ginput, gweight, gbias)
}

// ─── Tests ───────────────────────────────────────────────────────────────
