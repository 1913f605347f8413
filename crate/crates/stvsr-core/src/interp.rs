//! Feature temporal interpolation: synthesize the missing intermediate
//! feature map between two neighboring feature maps.
//!
//! Each neighbor passes through its own sampling branch (deformable
//! convolution driven by a predicted offset field — or a plain 3×3
//! convolution in the naive variant), then the two branch outputs are
//! blended by two learnable 1×1 convolution kernels:
//!
//! ```text
//! F_mid = α * T₁(F1, g₁([F1,F3])) + β * T₃(F3, g₃([F3,F1]))
//! ```
//!
//! The two branches share a network design but hold independent weights.
//! At initialization (zero offsets, delta sampling weights, α = β = 0.5·I)
//! the module computes the plain average of its neighbors.

use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;

use crate::deform::OffsetPredictor;
use crate::params::{Conv2dLayer, Graph, ParamStore, WeightInit};
use crate::tape::Var;
use crate::tensor::Scalar;

/// Which sampling machinery the branches use.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FeatureInterp {
    /// Plain 3×3 convolution on each neighbor (no spatial adaptivity).
    Naive,
    /// Offset-predicting deformable convolution on each neighbor.
    Deformable,
}

/// One sampling branch.
enum Branch {
    Deformable { predictor: OffsetPredictor, deform: Conv2dLayer },
    Naive { conv: Conv2dLayer },
}

impl Branch {
    fn init<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        prefix: &str,
        channels: usize,
        mode: FeatureInterp,
    ) -> Self {
        match mode {
            FeatureInterp::Deformable => {
                // Offsets are predicted from the concatenated pair (2C) and
                // the sampling weights start as the identity (delta kernel),
                // so a fresh branch reproduces its own input.
                let predictor = OffsetPredictor::init(store, rng, &sub(prefix, "offset"), 2 * channels, 3);
                let deform = Conv2dLayer::init(store, rng, &sub(prefix, "deform"), channels, channels, 3, WeightInit::Delta);
                Branch::Deformable { predictor, deform }
            }
            FeatureInterp::Naive => {
                let conv = Conv2dLayer::init(store, rng, &sub(prefix, "naive"), channels, channels, 3, WeightInit::Delta);
                Branch::Naive { conv }
            }
        }
    }

    /// Sample `own` under guidance of the ordered pair `(own, other)`.
    fn apply<T: Scalar>(&self, g: &mut Graph<T>, own: Var, other: Var) -> Var {
        match self {
            Branch::Deformable { predictor, deform } => {
                let pair = g.tape.concat_channels(&[own, other]);
                let offsets = predictor.apply(g, pair);
                let w = g.var(deform.weight);
                let b = deform.bias.map(|id| g.var(id));
                g.tape.deform_conv2d(own, offsets, w, b)
            }
            Branch::Naive { conv } => conv.apply(g, own),
        }
    }
}

/// Parameters of the pairwise interpolator: forward branch, backward
/// branch, and the 1×1 blend kernels (no bias).
pub struct InterpModule {
    forward: Branch,
    backward: Branch,
    alpha: Conv2dLayer,
    beta: Conv2dLayer,
    channels: usize,
}

impl InterpModule {
    pub fn init<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        prefix: &str,
        channels: usize,
        mode: FeatureInterp,
    ) -> Self {
        let forward = Branch::init(store, rng, &sub(prefix, "fwd"), channels, mode);
        let backward = Branch::init(store, rng, &sub(prefix, "bwd"), channels, mode);
        // Blend starts as plain temporal averaging: α = β = 0.5·I.
        let alpha = Conv2dLayer::init_no_bias(store, rng, &sub(prefix, "blend.alpha"), channels, channels, 1, WeightInit::ScaledIdentity(0.5));
        let beta = Conv2dLayer::init_no_bias(store, rng, &sub(prefix, "blend.beta"), channels, channels, 1, WeightInit::ScaledIdentity(0.5));
        InterpModule { forward, backward, alpha, beta, channels }
    }

    /// Synthesize the midpoint feature map of neighbors `f1` and `f3`.
    pub fn interpolate_pair<T: Scalar>(&self, g: &mut Graph<T>, f1: Var, f3: Var) -> Var {
        let (s1, s3) = (g.tape.value(f1).shape().to_vec(), g.tape.value(f3).shape().to_vec());
        assert_eq!(s1, s3, "interpolate_pair shape mismatch: {s1:?} vs {s3:?}");
        assert_eq!(s1[0], self.channels, "interpolate_pair expects {} channels, got {s1:?}", self.channels);
        let t1 = self.forward.apply(g, f1, f3);
        let t3 = self.backward.apply(g, f3, f1);
        let a = self.alpha.apply(g, t1);
        let b = self.beta.apply(g, t3);
        g.tape.add(a, b)
    }

    /// Interleave originals and synthesized midpoints: n+1 maps in,
    /// 2n+1 maps out, originals bitwise untouched at even indices.
    pub fn interpolate_sequence<T: Scalar>(&self, g: &mut Graph<T>, features: &[Var]) -> Vec<Var> {
        assert!(features.len() >= 2, "interpolate_sequence needs at least 2 feature maps, got {}", features.len());
        let mut out = Vec::with_capacity(2 * features.len() - 1);
        for (i, &f) in features.iter().enumerate() {
            if i > 0 {
                let mid = self.interpolate_pair(g, features[i - 1], f);
                out.push(mid);
            }
            out.push(f);
        }
        out
    }
}

fn sub(prefix: &str, leaf: &str) -> String {
    let mut s = String::from(prefix);
    s.push('.');
    s.push_str(leaf);
    s
}

// ─── Tests ───────────────────────────────────────────────────────────────
