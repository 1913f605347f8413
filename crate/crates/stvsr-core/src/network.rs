//! The full space-time upscaling network.
//!
//! Pipeline, applied to a low-resolution RGB sequence of n+1 frames:
//!
//! 1. **Extractor** — 3×3 convolution (3→C) plus `k1` residual blocks,
//!    applied per frame.
//! 2. **Temporal interpolation** — synthesize the missing in-between
//!    feature maps (n+1 → 2n+1, originals untouched at even slots).
//! 3. **Recurrent aggregation** (optional) — convolutional LSTM over the
//!    2n+1 maps, unidirectional or bidirectional, with or without
//!    deformable state alignment. Bidirectional output (2C) is fused
//!    back to C by a 1×1 convolution.
//! 4. **Reconstructor** — `k2` residual blocks, then two ×2 upsampling
//!    stages (3×3 conv C→4C, pixel shuffle, leaky ReLU), then a final
//!    3×3 convolution C→3. Net spatial upscale ×4, no global skip.
//!
//! Every variant in [`Ablation`] shares this skeleton and differs only in
//! which stages are active, so checkpoints identify the variant by which
//! parameter names they contain.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;

use crate::dconvlstm::DConvLstm;
use crate::interp::{FeatureInterp, InterpModule};
use crate::params::{Conv2dLayer, Graph, ParamStore, WeightInit};
use crate::tape::Var;
use crate::tensor::{Scalar, Tensor};

/// Fixed spatial upscale factor (two ×2 pixel-shuffle stages).
pub const UPSCALE: usize = 4;

/// Robust loss epsilon used for training and self-tests.
pub const CHARBONNIER_EPS: f64 = 1e-3;

/// Which recurrent aggregator runs over the interpolated sequence.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Temporal {
    /// No recurrence: each feature map is reconstructed independently.
    None,
    /// Plain convolutional LSTM (no state alignment).
    ConvLstm,
    /// Convolutional LSTM with deformable state alignment.
    DConvLstm,
}

/// Network variant switches.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Ablation {
    pub interp: FeatureInterp,
    pub temporal: Temporal,
    pub bidirectional: bool,
}

impl Ablation {
    /// The five studied variants, weakest to strongest:
    ///
    /// | key | interpolation | aggregation                     |
    /// |-----|---------------|---------------------------------|
    /// | `a` | naive convs   | none                            |
    /// | `b` | deformable    | none                            |
    /// | `c` | deformable    | ConvLSTM (unidirectional)       |
    /// | `d` | deformable    | aligned ConvLSTM (unidirectional)|
    /// | `e` | deformable    | aligned ConvLSTM (bidirectional)|
    pub fn preset(key: char) -> Ablation {
        match key {
            'a' => Ablation { interp: FeatureInterp::Naive, temporal: Temporal::None, bidirectional: false },
            'b' => Ablation { interp: FeatureInterp::Deformable, temporal: Temporal::None, bidirectional: false },
            'c' => Ablation { interp: FeatureInterp::Deformable, temporal: Temporal::ConvLstm, bidirectional: false },
            'd' => Ablation { interp: FeatureInterp::Deformable, temporal: Temporal::DConvLstm, bidirectional: false },
            'e' => Ablation { interp: FeatureInterp::Deformable, temporal: Temporal::DConvLstm, bidirectional: true },
            _ => panic!("unknown ablation preset '{key}' (expected a..=e)"),
        }
    }
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation::preset('e')
    }
}

/// Structural hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct ModelConfig {
    /// Feature channels C.
    pub channels: usize,
    /// Residual blocks in the extractor.
    pub k1: usize,
    /// Residual blocks in the reconstructor.
    pub k2: usize,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    /// Small desk-scale configuration; see [`ModelConfig::full_scale`]
    /// for the publication-scale sizes.
    fn default() -> Self {
        ModelConfig { channels: 16, k1: 2, k2: 4, ablation: Ablation::default() }
    }
}

impl ModelConfig {
    /// Publication-scale sizes (C = 64, 5 extractor blocks, 40
    /// reconstruction blocks, full variant).
    pub fn full_scale() -> Self {
        ModelConfig { channels: 64, k1: 5, k2: 40, ablation: Ablation::preset('e') }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.channels == 0 {
            return Err("channels must be positive".into());
        }
        if self.ablation.bidirectional && self.ablation.temporal == Temporal::None {
            return Err("bidirectional requires a recurrent aggregator".into());
        }
        Ok(())
    }

    /// Reconstruct the configuration from a checkpoint's parameter names
    /// and shapes. The variant is identified by which entries exist; the
    /// sizes come from the extractor input convolution and block counts.
    pub fn infer_from_entries(entries: &[(String, Vec<usize>)]) -> Result<ModelConfig, String> {
        let find = |name: &str| entries.iter().find(|(n, _)| n == name);
        let (_, conv_in_shape) =
            find("extractor.conv_in.weight").ok_or("checkpoint lacks extractor.conv_in.weight")?;
        if conv_in_shape.len() != 4 || conv_in_shape[1] != 3 {
            return Err(format!("extractor.conv_in.weight has unexpected shape {conv_in_shape:?}"));
        }
        let channels = conv_in_shape[0];
        let count_blocks = |prefix: &str| -> usize {
            (0..)
                .take_while(|i| find(&format!("{prefix}.block{i}.conv1.weight")).is_some())
                .count()
        };
        let k1 = count_blocks("extractor");
        let k2 = count_blocks("recon");
        let interp = if find("interp.fwd.deform.weight").is_some() {
            FeatureInterp::Deformable
        } else if find("interp.fwd.naive.weight").is_some() {
            FeatureInterp::Naive
        } else {
            return Err("checkpoint lacks both interp.fwd.deform.weight and interp.fwd.naive.weight".into());
        };
        let temporal = if find("lstm.gates.weight").is_some() {
            if find("lstm.align_h.deform.weight").is_some() { Temporal::DConvLstm } else { Temporal::ConvLstm }
        } else {
            Temporal::None
        };
        let bidirectional = find("fusion.weight").is_some();
        let cfg = ModelConfig { channels, k1, k2, ablation: Ablation { interp, temporal, bidirectional } };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Pre-activation-free residual block: `x + conv2(relu(conv1(x)))`.
struct ResidualBlock {
    conv1: Conv2dLayer,
    conv2: Conv2dLayer,
}

impl ResidualBlock {
    fn init<T: Scalar, R: Rng>(store: &mut ParamStore<T>, rng: &mut R, prefix: &str, channels: usize) -> Self {
        let conv1 = Conv2dLayer::init(store, rng, &format!("{prefix}.conv1"), channels, channels, 3, WeightInit::Uniform);
        let conv2 = Conv2dLayer::init(store, rng, &format!("{prefix}.conv2"), channels, channels, 3, WeightInit::Uniform);
        ResidualBlock { conv1, conv2 }
    }

    fn apply<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Var {
        let a = self.conv1.apply(g, x);
        let r = g.tape.relu(a);
        let b = self.conv2.apply(g, r);
        g.tape.add(x, b)
    }
}

/// The assembled network. Holds parameter handles only; values live in
/// the [`ParamStore`] and gradients in the per-step [`Graph`].
pub struct SpaceTimeModel {
    pub cfg: ModelConfig,
    conv_in: Conv2dLayer,
    extract_blocks: Vec<ResidualBlock>,
    interp: InterpModule,
    lstm: Option<DConvLstm>,
    fusion: Option<Conv2dLayer>,
    recon_blocks: Vec<ResidualBlock>,
    up1: Conv2dLayer,
    up2: Conv2dLayer,
    conv_out: Conv2dLayer,
}

impl SpaceTimeModel {
    pub fn init<T: Scalar, R: Rng>(cfg: ModelConfig, store: &mut ParamStore<T>, rng: &mut R) -> Self {
        cfg.validate().expect("invalid model config");
        let c = cfg.channels;
        let conv_in = Conv2dLayer::init(store, rng, "extractor.conv_in", 3, c, 3, WeightInit::Uniform);
        let extract_blocks =
            (0..cfg.k1).map(|i| ResidualBlock::init(store, rng, &format!("extractor.block{i}"), c)).collect();
        let interp = InterpModule::init(store, rng, "interp", c, cfg.ablation.interp);
        let lstm = match cfg.ablation.temporal {
            Temporal::None => None,
            Temporal::ConvLstm => Some(DConvLstm::init(store, rng, "lstm", c, false)),
            Temporal::DConvLstm => Some(DConvLstm::init(store, rng, "lstm", c, true)),
        };
        let fusion = cfg.ablation.bidirectional.then(|| {
            let layer = Conv2dLayer::init(store, rng, "fusion", 2 * c, c, 1, WeightInit::Uniform);
            // Fuse by averaging the two directional states at first: channel
            // r reads 0.5 from its forward copy and 0.5 from its backward
            // copy. Training can then reweight the blend instead of having
            // to recover the signal from a random mix.
            let w = store.get_mut(layer.weight).data_mut();
            for v in w.iter_mut() {
                *v = T::zero();
            }
            let half = T::from_f64(0.5);
            for r in 0..c {
                w[r * 2 * c + r] = half;
                w[r * 2 * c + c + r] = half;
            }
            layer
        });
        let recon_blocks =
            (0..cfg.k2).map(|i| ResidualBlock::init(store, rng, &format!("recon.block{i}"), c)).collect();
        let up1 = Conv2dLayer::init(store, rng, "recon.up1", c, 4 * c, 3, WeightInit::Uniform);
        let up2 = Conv2dLayer::init(store, rng, "recon.up2", c, 4 * c, 3, WeightInit::Uniform);
        let conv_out = Conv2dLayer::init(store, rng, "recon.conv_out", c, 3, 3, WeightInit::Uniform);
        SpaceTimeModel { cfg, conv_in, extract_blocks, interp, lstm, fusion, recon_blocks, up1, up2, conv_out }
    }

    /// Per-frame shallow features: input convolution plus residual blocks.
    pub fn extract_features<T: Scalar>(&self, g: &mut Graph<T>, frames: &[Var]) -> Vec<Var> {
        frames
            .iter()
            .map(|&f| {
                let mut x = self.conv_in.apply(g, f);
                for b in &self.extract_blocks {
                    x = b.apply(g, x);
                }
                x
            })
            .collect()
    }

    /// Decode one aggregated feature map to a ×4 RGB frame.
    pub fn reconstruct_frame<T: Scalar>(&self, g: &mut Graph<T>, feat: Var) -> Var {
        let mut x = feat;
        for b in &self.recon_blocks {
            x = b.apply(g, x);
        }
        for up in [&self.up1, &self.up2] {
            let y = up.apply(g, x);
            let s = g.tape.pixel_shuffle(y, 2);
            x = g.tape.leaky_relu(s, T::from_f64(0.1));
        }
        self.conv_out.apply(g, x)
    }

    /// The dense feature sequence entering the aggregator: extracted
    /// per-frame features with synthesized midpoints interleaved (n+1
    /// frames in, 2n+1 maps out). Public for state-tracking diagnostics.
    pub fn interpolated_features<T: Scalar>(&self, g: &mut Graph<T>, lr_frames: &[Tensor<T>]) -> Vec<Var> {
        assert!(lr_frames.len() >= 2, "forward needs at least 2 input frames, got {}", lr_frames.len());
        for f in lr_frames {
            assert_eq!(f.rank(), 3, "input frames must be C×H×W, got rank {}", f.rank());
            assert_eq!(f.shape()[0], 3, "input frames must be RGB, got {} channels", f.shape()[0]);
        }
        let vars: Vec<Var> = lr_frames.iter().map(|f| g.tape.leaf(f.clone())).collect();
        let feats = self.extract_features(g, &vars);
        self.interp.interpolate_sequence(g, &feats)
    }

    /// The recurrent unit, when the variant has one.
    pub fn recurrence(&self) -> Option<&DConvLstm> {
        self.lstm.as_ref()
    }

    /// Full forward pass: n+1 low-resolution frames in, 2n+1 frames out
    /// at ×4 resolution (linear output, no activation).
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, lr_frames: &[Tensor<T>]) -> Vec<Var> {
        let dense = self.interpolated_features(g, lr_frames);
        let hidden: Vec<Var> = match &self.lstm {
            None => dense,
            Some(lstm) if self.cfg.ablation.bidirectional => {
                let both = lstm.run_bidirectional(g, &dense);
                let fusion = self.fusion.as_ref().expect("bidirectional model must have a fusion layer");
                both.into_iter().map(|h| fusion.apply(g, h)).collect()
            }
            Some(lstm) => lstm.run_forward(g, &dense),
        };
        hidden.into_iter().map(|h| self.reconstruct_frame(g, h)).collect()
    }

    /// Mean robust loss between the predicted sequence and the
    /// high-resolution targets (which must have length 2n+1).
    pub fn sequence_loss<T: Scalar>(&self, g: &mut Graph<T>, lr_frames: &[Tensor<T>], hr_frames: &[Tensor<T>]) -> Var {
        assert_eq!(
            hr_frames.len(),
            2 * lr_frames.len() - 1,
            "expected {} target frames for {} inputs, got {}",
            2 * lr_frames.len() - 1,
            lr_frames.len(),
            hr_frames.len()
        );
        let preds = self.forward(g, lr_frames);
        let mut total: Option<Var> = None;
        for (pred, hr) in preds.iter().zip(hr_frames) {
            assert_eq!(g.tape.value(*pred).shape(), hr.shape(), "prediction/target shape mismatch");
            let target = g.tape.leaf(hr.clone());
            let l = g.tape.charbonnier(*pred, target, T::from_f64(CHARBONNIER_EPS));
            total = Some(match total {
                None => l,
                Some(t) => g.tape.add(t, l),
            });
        }
        let sum = total.expect("at least one frame");
        g.tape.scalar_mul(sum, T::one() / T::from_f64(hr_frames.len() as f64))
    }
}

// ─── Tests ───────────────────────────────────────────────────────────────
