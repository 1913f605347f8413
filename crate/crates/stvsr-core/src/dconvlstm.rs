//! Convolutional LSTM over feature-map sequences, with optional
//! deformable alignment of the carried state.
//!
//! Before the gates fire, the previous hidden and cell maps can be
//! warped toward the current input by deformable convolutions whose
//! offsets are predicted from `[state, F_t]`. This lets the recurrence
//! track motion instead of mixing misaligned content. With alignment
//! disabled the module is a plain ConvLSTM.
//!
//! Gate equations (single fused 3×3 convolution producing 4C maps in
//! the order i, f, o, g over the input `concat(F_t, h_aligned)`):
//!
//! ```text
//! i = σ(z_i)   f = σ(z_f)   o = σ(z_o)   g = tanh(z_g)
//! c_t = f ⊙ c_aligned + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! The bidirectional runner applies the same parameters to the reversed
//! sequence and concatenates forward and backward hidden states per step.

use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;

use crate::deform::OffsetPredictor;
use crate::params::{Conv2dLayer, Graph, ParamStore, WeightInit};
use crate::tape::Var;
use crate::tensor::{Scalar, Tensor};

/// Hidden and cell maps carried between steps, both `C×H×W`.
#[derive(Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

struct Alignment {
    pred_h: OffsetPredictor,
    deform_h: Conv2dLayer,
    pred_c: OffsetPredictor,
    deform_c: Conv2dLayer,
}

/// Convolutional LSTM cell plus sequence runners.
pub struct DConvLstm {
    channels: usize,
    /// Fused gate convolution: `2C → 4C`, 3×3, gate order i, f, o, g.
    gates: Conv2dLayer,
    /// `Some` = deformable state alignment; `None` = vanilla ConvLSTM.
    alignment: Option<Alignment>,
}

impl DConvLstm {
    pub fn init<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        prefix: &str,
        channels: usize,
        aligned: bool,
    ) -> Self {
        let gates = Conv2dLayer::init(store, rng, &sub(prefix, "gates"), 2 * channels, 4 * channels, 3, WeightInit::Uniform);
        // Start the candidate gate g as a pass-through of the current
        // features: each of its rows is zeroed except for a centre tap on
        // the matching feature channel. With zero biases the sigmoids open
        // halfway, so the fresh cell already carries an exponential moving
        // average of tanh(F_t) and the reconstructor sees usable content
        // from the first step instead of waiting for transport to emerge
        // from small random weights.
        {
            let k = 3;
            let mid = k / 2;
            let w = store.get_mut(gates.weight).data_mut();
            let c_in = 2 * channels;
            for r in 0..channels {
                let row = 3 * channels + r;
                let row_base = row * c_in * k * k;
                for i in 0..c_in * k * k {
                    w[row_base + i] = T::zero();
                }
                w[row_base + (r * k + mid) * k + mid] = T::one();
            }
        }
        let alignment = aligned.then(|| Alignment {
            pred_h: OffsetPredictor::init(store, rng, &sub(prefix, "align_h.offset"), 2 * channels, 3),
            deform_h: Conv2dLayer::init(store, rng, &sub(prefix, "align_h.deform"), channels, channels, 3, WeightInit::Delta),
            pred_c: OffsetPredictor::init(store, rng, &sub(prefix, "align_c.offset"), 2 * channels, 3),
            deform_c: Conv2dLayer::init(store, rng, &sub(prefix, "align_c.deform"), channels, channels, 3, WeightInit::Delta),
        });
        DConvLstm { channels, gates, alignment }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_aligned(&self) -> bool {
        self.alignment.is_some()
    }

    /// Warp one carried state map toward the current input feature map.
    fn align_state<T: Scalar>(
        g: &mut Graph<T>,
        state: Var,
        feat: Var,
        pred: &OffsetPredictor,
        deform: &Conv2dLayer,
    ) -> Var {
        let pair = g.tape.concat_channels(&[state, feat]);
        let offsets = pred.apply(g, pair);
        let w = g.var(deform.weight);
        let b = deform.bias.map(|id| g.var(id));
        g.tape.deform_conv2d(state, offsets, w, b)
    }

    /// The aligned copy of `state` that [`DConvLstm::cell_step`] would gate
    /// against, when alignment is enabled — read access for state-tracking
    /// diagnostics.
    pub fn aligned_state<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        state: &LstmState,
        feat: Var,
    ) -> Option<LstmState> {
        self.alignment.as_ref().map(|a| LstmState {
            h: Self::align_state(g, state.h, feat, &a.pred_h, &a.deform_h),
            c: Self::align_state(g, state.c, feat, &a.pred_c, &a.deform_c),
        })
    }

    /// One recurrence step: align the incoming state (if enabled), fire
    /// the gates, and emit the new state.
    pub fn cell_step<T: Scalar>(&self, g: &mut Graph<T>, state: &LstmState, feat: Var) -> LstmState {
        let (ha, ca) = match &self.alignment {
            Some(a) => (
                Self::align_state(g, state.h, feat, &a.pred_h, &a.deform_h),
                Self::align_state(g, state.c, feat, &a.pred_c, &a.deform_c),
            ),
            None => (state.h, state.c),
        };
        let c = self.channels;
        let gate_in = g.tape.concat_channels(&[feat, ha]);
        let z = self.gates.apply(g, gate_in);
        let zi = g.tape.slice_channels(z, 0, c);
        let zf = g.tape.slice_channels(z, c, 2 * c);
        let zo = g.tape.slice_channels(z, 2 * c, 3 * c);
        let zg = g.tape.slice_channels(z, 3 * c, 4 * c);
        let i = g.tape.sigmoid(zi);
        let f = g.tape.sigmoid(zf);
        let o = g.tape.sigmoid(zo);
        let gg = g.tape.tanh(zg);
        let fc = g.tape.mul(f, ca);
        let ig = g.tape.mul(i, gg);
        let c_t = g.tape.add(fc, ig);
        let tc = g.tape.tanh(c_t);
        let h_t = g.tape.mul(o, tc);
        LstmState { h: h_t, c: c_t }
    }

    fn zero_state<T: Scalar>(&self, g: &mut Graph<T>, like: Var) -> LstmState {
        let shape = g.tape.value(like).shape().to_vec();
        assert_eq!(shape[0], self.channels, "feature maps must have {} channels, got {shape:?}", self.channels);
        let h = g.tape.leaf(Tensor::zeros(&shape));
        let c = g.tape.leaf(Tensor::zeros(&shape));
        LstmState { h, c }
    }

    /// Run left-to-right from a zero state; returns the hidden map per step.
    pub fn run_forward<T: Scalar>(&self, g: &mut Graph<T>, feats: &[Var]) -> Vec<Var> {
        assert!(!feats.is_empty(), "run_forward needs at least one feature map");
        let mut state = self.zero_state(g, feats[0]);
        let mut out = Vec::with_capacity(feats.len());
        for &f in feats {
            state = self.cell_step(g, &state, f);
            out.push(state.h);
        }
        out
    }

    /// Run both directions with the same parameters and concatenate the
    /// hidden states per step (forward half first): output maps are `2C`.
    pub fn run_bidirectional<T: Scalar>(&self, g: &mut Graph<T>, feats: &[Var]) -> Vec<Var> {
        let fwd = self.run_forward(g, feats);
        let rev_in: Vec<Var> = feats.iter().rev().copied().collect();
        let mut bwd = self.run_forward(g, &rev_in);
        bwd.reverse();
        fwd.iter().zip(&bwd).map(|(&hf, &hb)| g.tape.concat_channels(&[hf, hb])).collect()
    }
}

fn sub(prefix: &str, leaf: &str) -> String {
    let mut s = String::from(prefix);
    s.push('.');
    s.push_str(leaf);
    s
}

// ─── Tests ───────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::seeded_rng;
    use alloc::format;

    fn fresh(channels: usize, aligned: bool, seed: u64) -> (ParamStore<f64>, DConvLstm) {
        let mut store = ParamStore::new();
        let mut rng = seeded_rng(seed);
        let m = DConvLstm::init(&mut store, &mut rng, "lstm", channels, aligned);
        (store, m)
    }

    fn randomize(store: &mut ParamStore<f64>, lo: f64, hi: f64, seed: u64) {
        let mut rng = seeded_rng(seed);
        for id in store.ids().collect::<Vec<_>>() {
            let shape = store.get(id).shape().to_vec();
            *store.get_mut(id) = Tensor::uniform(&shape, lo, hi, &mut rng);
        }
    }

    #[test]
    fn test_zero_gate_weights_closed_form() {
        // All-zero gate parameters: i = f = o = σ(0) = 0.5, g = tanh(0) = 0.
        // With c_prev = 1: c_t = 0.5, h_t = 0.5·tanh(0.5).
        for aligned in [false, true] {
            let (mut store, m) = fresh(2, aligned, 101);
            let gw = store.find("lstm.gates.weight").unwrap();
            for v in store.get_mut(gw).data_mut().iter_mut() {
                *v = 0.0;
            }
            let mut rng = seeded_rng(102);
            let mut g = Graph::new(&store);
            let feat = g.tape.leaf(Tensor::uniform(&[2, 5, 5], -1.0, 1.0, &mut rng));
            let state = LstmState {
                h: g.tape.leaf(Tensor::zeros(&[2, 5, 5])),
                c: g.tape.leaf(Tensor::full(&[2, 5, 5], 1.0)),
            };
            let next = m.cell_step(&mut g, &state, feat);
            let want_h = 0.5 * (0.5f64).tanh();
            for &v in g.tape.value(next.c).data() {
                assert!((v - 0.5).abs() < 1e-9, "c_t = 0.5, got {v} (aligned={aligned})");
            }
            for &v in g.tape.value(next.h).data() {
                assert!((v - want_h).abs() < 1e-9, "h_t = 0.5·tanh(0.5), got {v} (aligned={aligned})");
            }
        }
    }

    #[test]
    fn test_cell_step_matches_gate_by_gate_oracle() {
        // Vanilla cell vs an independent straight-line computation.
        use crate::tensor::conv2d;
        let c = 3;
        let (mut store, m) = fresh(c, false, 103);
        randomize(&mut store, -0.3, 0.3, 104);
        let mut rng = seeded_rng(105);
        let feat = Tensor::<f64>::uniform(&[c, 6, 5], -1.0, 1.0, &mut rng);
        let h0 = Tensor::<f64>::uniform(&[c, 6, 5], -0.9, 0.9, &mut rng);
        let c0 = Tensor::<f64>::uniform(&[c, 6, 5], -1.5, 1.5, &mut rng);

        let mut g = Graph::new(&store);
        let state = LstmState { h: g.tape.leaf(h0.clone()), c: g.tape.leaf(c0.clone()) };
        let fv = g.tape.leaf(feat.clone());
        let next = m.cell_step(&mut g, &state, fv);

        let w = store.get(store.find("lstm.gates.weight").unwrap());
        let b = store.get(store.find("lstm.gates.bias").unwrap());
        let mut cat = feat.data().to_vec();
        cat.extend_from_slice(h0.data());
        let z = conv2d(&Tensor::from_vec(&[2 * c, 6, 5], cat), w, b, 1);
        let n = 6 * 5;
        let mut want_c = Tensor::<f64>::zeros(&[c, 6, 5]);
        let mut want_h = Tensor::<f64>::zeros(&[c, 6, 5]);
        for ch in 0..c {
            for p in 0..n {
                let zi = z.data()[ch * n + p];
                let zf = z.data()[(c + ch) * n + p];
                let zo = z.data()[(2 * c + ch) * n + p];
                let zg = z.data()[(3 * c + ch) * n + p];
                let (i, f, o) = (sigmoid(zi), sigmoid(zf), sigmoid(zo));
                let ct = f * c0.data()[ch * n + p] + i * zg.tanh();
                want_c.data_mut()[ch * n + p] = ct;
                want_h.data_mut()[ch * n + p] = o * ct.tanh();
            }
        }
        assert!(g.tape.value(next.c).max_abs_diff(&want_c) < 1e-6);
        assert!(g.tape.value(next.h).max_abs_diff(&want_h) < 1e-6);
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn test_aligned_cell_matches_oracle_with_raw_deform() {
        // Aligned cell vs oracle that warps h/c with the raw deformable
        // convolution routine before the gate math.
        use crate::deform::deform_conv2d;
        use crate::tensor::conv2d;
        let c = 2;
        let (mut store, m) = fresh(c, true, 107);
        randomize(&mut store, -0.25, 0.25, 108);
        let mut rng = seeded_rng(109);
        let feat = Tensor::<f64>::uniform(&[c, 5, 5], -1.0, 1.0, &mut rng);
        let h0 = Tensor::<f64>::uniform(&[c, 5, 5], -0.9, 0.9, &mut rng);
        let c0 = Tensor::<f64>::uniform(&[c, 5, 5], -1.2, 1.2, &mut rng);

        let mut g = Graph::new(&store);
        let state = LstmState { h: g.tape.leaf(h0.clone()), c: g.tape.leaf(c0.clone()) };
        let fv = g.tape.leaf(feat.clone());
        let next = m.cell_step(&mut g, &state, fv);

        let p = |n: &str| store.get(store.find(n).unwrap()).clone();
        let warp = |state_map: &Tensor<f64>, side: &str| -> Tensor<f64> {
            let mut cat = state_map.data().to_vec();
            cat.extend_from_slice(feat.data());
            let pair = Tensor::from_vec(&[2 * c, 5, 5], cat);
            let mid = conv2d(&pair, &p(&format!("lstm.{side}.offset.conv1.weight")), &p(&format!("lstm.{side}.offset.conv1.bias")), 1)
                .map(|v| crate::tensor::leaky_relu(v, 0.1));
            let off = conv2d(&mid, &p(&format!("lstm.{side}.offset.conv2.weight")), &p(&format!("lstm.{side}.offset.conv2.bias")), 1);
            deform_conv2d(state_map, &off, &p(&format!("lstm.{side}.deform.weight")), &p(&format!("lstm.{side}.deform.bias")))
        };
        let ha = warp(&h0, "align_h");
        let ca = warp(&c0, "align_c");
        let mut cat = feat.data().to_vec();
        cat.extend_from_slice(ha.data());
        let z = conv2d(&Tensor::from_vec(&[2 * c, 5, 5], cat), &p("lstm.gates.weight"), &p("lstm.gates.bias"), 1);
        let n = 25;
        let mut want_h = Tensor::<f64>::zeros(&[c, 5, 5]);
        for ch in 0..c {
            for pos in 0..n {
                let (i, f, o) = (
                    sigmoid(z.data()[ch * n + pos]),
                    sigmoid(z.data()[(c + ch) * n + pos]),
                    sigmoid(z.data()[(2 * c + ch) * n + pos]),
                );
                let ct = f * ca.data()[ch * n + pos] + i * z.data()[(3 * c + ch) * n + pos].tanh();
                want_h.data_mut()[ch * n + pos] = o * ct.tanh();
            }
        }
        assert!(g.tape.value(next.h).max_abs_diff(&want_h) < 1e-6);
    }

    #[test]
    fn test_hidden_entries_strictly_inside_unit_interval() {
        let (mut store, m) = fresh(3, true, 111);
        randomize(&mut store, -0.5, 0.5, 112);
        let mut rng = seeded_rng(113);
        let mut g = Graph::new(&store);
        let feats: Vec<Var> = (0..4).map(|_| g.tape.leaf(Tensor::uniform(&[3, 6, 6], -2.0, 2.0, &mut rng))).collect();
        for h in m.run_forward(&mut g, &feats) {
            for &v in g.tape.value(h).data() {
                assert!(v.abs() < 1.0, "|h| = |{v}| must stay below 1");
            }
        }
    }

    #[test]
    fn test_bidirectional_reversal_law() {
        // Feeding the reversed sequence must give the time-reversed output
        // with forward/backward halves swapped — bitwise.
        let c = 2;
        let (mut store, m) = fresh(c, true, 115);
        randomize(&mut store, -0.3, 0.3, 116);
        let mut rng = seeded_rng(117);
        let frames: Vec<Tensor<f64>> = (0..4).map(|_| Tensor::uniform(&[c, 5, 5], -1.0, 1.0, &mut rng)).collect();

        let mut g1 = Graph::new(&store);
        let f1: Vec<Var> = frames.iter().map(|t| g1.tape.leaf(t.clone())).collect();
        let out = m.run_bidirectional(&mut g1, &f1);

        let mut g2 = Graph::new(&store);
        let f2: Vec<Var> = frames.iter().rev().map(|t| g2.tape.leaf(t.clone())).collect();
        let out_rev = m.run_bidirectional(&mut g2, &f2);

        let n = 5 * 5;
        for t in 0..4 {
            let a = g1.tape.value(out[t]).data();
            let b = g2.tape.value(out_rev[4 - 1 - t]).data();
            // Forward half of one run equals backward half of the other.
            assert_eq!(&a[..c * n], &b[c * n..], "fwd(t={t}) == bwd(reversed)");
            assert_eq!(&a[c * n..], &b[..c * n], "bwd(t={t}) == fwd(reversed)");
        }
    }

    #[test]
    fn test_single_step_halves_identical() {
        let (mut store, m) = fresh(2, true, 119);
        randomize(&mut store, -0.3, 0.3, 120);
        let mut rng = seeded_rng(121);
        let mut g = Graph::new(&store);
        let f = g.tape.leaf(Tensor::uniform(&[2, 4, 4], -1.0, 1.0, &mut rng));
        let out = m.run_bidirectional(&mut g, &[f]);
        assert_eq!(out.len(), 1);
        let v = g.tape.value(out[0]);
        assert_eq!(v.shape(), &[4, 4, 4]);
        let n = 2 * 16;
        assert_eq!(&v.data()[..n], &v.data()[n..], "both directions see the same single step");
    }

    #[test]
    fn test_bidirectional_matches_manual_unroll() {
        let c = 2;
        let (mut store, m) = fresh(c, false, 123);
        randomize(&mut store, -0.4, 0.4, 124);
        let mut rng = seeded_rng(125);
        let frames: Vec<Tensor<f64>> = (0..3).map(|_| Tensor::uniform(&[c, 4, 4], -1.0, 1.0, &mut rng)).collect();

        let mut g = Graph::new(&store);
        let fv: Vec<Var> = frames.iter().map(|t| g.tape.leaf(t.clone())).collect();
        let out = m.run_bidirectional(&mut g, &fv);

        let mut g2 = Graph::new(&store);
        let fv2: Vec<Var> = frames.iter().map(|t| g2.tape.leaf(t.clone())).collect();
        let zero = |g: &mut Graph<f64>| LstmState {
            h: g.tape.leaf(Tensor::zeros(&[c, 4, 4])),
            c: g.tape.leaf(Tensor::zeros(&[c, 4, 4])),
        };
        let mut s = zero(&mut g2);
        let mut fwd = Vec::new();
        for &f in &fv2 {
            s = m.cell_step(&mut g2, &s, f);
            fwd.push(s.h);
        }
        let mut s = zero(&mut g2);
        let mut bwd = Vec::new();
        for &f in fv2.iter().rev() {
            s = m.cell_step(&mut g2, &s, f);
            bwd.push(s.h);
        }
        bwd.reverse();
        for t in 0..3 {
            let mut want = g2.tape.value(fwd[t]).data().to_vec();
            want.extend_from_slice(g2.tape.value(bwd[t]).data());
            assert_eq!(g.tape.value(out[t]).data(), &want[..], "step {t}");
        }
    }

    #[test]
    fn test_vanilla_variant_has_no_alignment_parameters() {
        let (store, m) = fresh(4, false, 127);
        assert!(!m.is_aligned());
        assert!(store.find("lstm.align_h.offset.conv1.weight").is_none());
        assert!(store.find("lstm.align_c.deform.weight").is_none());
        assert!(store.find("lstm.gates.weight").is_some());
    }

    #[test]
    fn test_gradient_reaches_gates_through_time() {
        let (mut store, m) = fresh(2, true, 129);
        randomize(&mut store, -0.3, 0.3, 130);
        let mut rng = seeded_rng(131);
        let mut g = Graph::new(&store);
        let feats: Vec<Var> = (0..3).map(|_| g.tape.leaf(Tensor::uniform(&[2, 4, 4], -1.0, 1.0, &mut rng))).collect();
        let out = m.run_bidirectional(&mut g, &feats);
        let total = {
            let s0 = g.tape.sum(out[0]);
            let s1 = g.tape.sum(out[1]);
            let s2 = g.tape.sum(out[2]);
            let a = g.tape.add(s0, s1);
            g.tape.add(a, s2)
        };
        g.tape.backward(total);
        for name in ["lstm.gates.weight", "lstm.align_h.deform.weight", "lstm.align_c.deform.weight", "lstm.align_h.offset.conv1.weight"] {
            let id = store.find(name).unwrap();
            let norm: f64 = g.grad(id).map(|t| t.data().iter().map(|v| v * v).sum::<f64>().sqrt()).unwrap_or(0.0);
            assert!(norm > 0.0, "{name} must receive gradient through the rollout");
        }
    }
}
