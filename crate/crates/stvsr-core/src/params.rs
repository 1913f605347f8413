//! Named parameter registry and the conv-layer building block.
//!
//! Parameters persist across optimization steps in a [`ParamStore`]; each
//! training/inference pass seeds them into a fresh [`Graph`] (a tape plus
//! the parameter handles), records the computation, and reads gradients
//! back out by [`ParamId`]. Registration order is stable, names are unique
//! — that pair is the checkpoint contract.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
// Resolves float intrinsics in the no_std build (libm); redundant when
// std is linked for tests.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::tape::{Tape, Var};
use crate::tensor::{Scalar, Tensor};

/// Stable handle of one registered parameter tensor.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ParamId(pub(crate) usize);

/// Ordered, uniquely named parameter set.
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Tensor<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { names: Vec::new(), values: Vec::new() }
    }

    /// Register a parameter under a unique name.
    pub fn register(&mut self, name: &str, value: Tensor<T>) -> ParamId {
        assert!(
            !self.names.iter().any(|n| n == name),
            "parameter name registered twice: {name}"
        );
        self.names.push(name.to_string());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.values[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// `(name, tensor)` pairs in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(|s| s.as_str()).zip(self.values.iter())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Total scalar count across all parameters.
    pub fn numel(&self) -> usize {
        self.values.iter().map(|t| t.numel()).sum()
    }
}

/// One recorded computation: a tape pre-seeded with every parameter.
pub struct Graph<T> {
    pub tape: Tape<T>,
    param_vars: Vec<Var>,
}

impl<T: Scalar> Graph<T> {
    pub fn new(store: &ParamStore<T>) -> Self {
        let mut tape = Tape::new();
        let param_vars = store.values.iter().map(|t| tape.param(t.clone())).collect();
        Graph { tape, param_vars }
    }

    /// Tape variable bound to a stored parameter.
    pub fn var(&self, id: ParamId) -> Var {
        self.param_vars[id.0]
    }

    /// Gradient accumulated for a parameter by `tape.backward`.
    pub fn grad(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.tape.grad(self.param_vars[id.0])
    }
}

// ─── Conv layer ──────────────────────────────────────────────────────────

/// Weight initialization schemes used across the network.
#[derive(Clone, Copy, Debug)]
pub enum WeightInit {
    /// Fan-in scaled uniform: U(−1/√fan_in, 1/√fan_in).
    Uniform,
    /// All zeros (offset-predictor output layers: identity sampling at init).
    Zeros,
    /// Delta kernel: 1 at the center tap of the matching channel — the
    /// layer starts as the identity map (requires C_out = C_in, odd K).
    Delta,
    /// 1×1 kernel equal to s·I over channels.
    ScaledIdentity(f64),
}

/// 3×3 (or 1×1) convolution layer with same padding and a zero-initialized
/// bias, registered in a [`ParamStore`].
pub struct Conv2dLayer {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub padding: usize,
}

impl Conv2dLayer {
    /// Register weights (+ bias) for a K×K same-padding conv layer.
    pub fn init<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        init: WeightInit,
    ) -> Self {
        let weight = Self::make_weight(rng, c_in, c_out, k, init);
        let weight = store.register(&format2(name, "weight"), weight);
        let bias = store.register(&format2(name, "bias"), Tensor::zeros(&[c_out]));
        Conv2dLayer { weight, bias: Some(bias), padding: (k - 1) / 2 }
    }

    /// Same, but without a bias term (the 1×1 blend kernels).
    pub fn init_no_bias<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        init: WeightInit,
    ) -> Self {
        let weight = Self::make_weight(rng, c_in, c_out, k, init);
        let weight = store.register(&format2(name, "weight"), weight);
        Conv2dLayer { weight, bias: None, padding: (k - 1) / 2 }
    }

    fn make_weight<T: Scalar, R: Rng>(rng: &mut R, c_in: usize, c_out: usize, k: usize, init: WeightInit) -> Tensor<T> {
        assert!(k % 2 == 1, "conv layers use odd kernels, got {k}");
        match init {
            WeightInit::Uniform => {
                let bound = 1.0 / ((c_in * k * k) as f64).sqrt();
                Tensor::uniform(&[c_out, c_in, k, k], -bound, bound, rng)
            }
            WeightInit::Zeros => Tensor::zeros(&[c_out, c_in, k, k]),
            WeightInit::Delta => {
                assert_eq!(c_in, c_out, "delta init needs C_out = C_in");
                let mut t = Tensor::zeros(&[c_out, c_in, k, k]);
                let mid = k / 2;
                for c in 0..c_out {
                    let idx = ((c * c_in + c) * k + mid) * k + mid;
                    t.data_mut()[idx] = T::one();
                }
                t
            }
            WeightInit::ScaledIdentity(s) => {
                assert_eq!(k, 1, "scaled-identity init is for 1×1 kernels");
                assert_eq!(c_in, c_out, "scaled-identity init needs C_out = C_in");
                let mut t = Tensor::zeros(&[c_out, c_in, 1, 1]);
                for c in 0..c_out {
                    t.data_mut()[c * c_in + c] = T::from_f64(s);
                }
                t
            }
        }
    }

    pub fn apply<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Var {
        let w = g.var(self.weight);
        let b = self.bias.map(|id| g.var(id));
        g.tape.conv2d(x, w, b, self.padding)
    }
}

fn format2(prefix: &str, leaf: &str) -> String {
    let mut s = String::from(prefix);
    s.push('.');
    s.push_str(leaf);
    s
}

// ─── Tests ───────────────────────────────────────────────────────────────
