//! Adam optimization with a cosine-annealed learning rate, the training
//! loop, and the deterministic RNG used across the crate.

use alloc::vec::Vec;
// Resolves float intrinsics in the no_std build (libm); redundant when
// std is linked for tests.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{self, TrainingSample};
use crate::network::SpaceTimeModel;
use crate::params::{Graph, ParamStore};
use crate::tensor::{Scalar, Tensor};

/// Deterministic stream cipher RNG: same seed, same sequence, every build.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ─── Configuration ───────────────────────────────────────────────────────

/// Training hyperparameters (desk-scale defaults).
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// LR patch edge length; the HR crop is 4× this.
    pub patch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Random 90°-rotation / horizontal-flip augmentation per sample.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_max: 4e-4,
            lr_min: 1e-7,
            total_steps: 500,
            batch_size: 2,
            seed: 0,
            patch: 8,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) {
        assert!(self.lr_min < self.lr_max, "lr_min {} must be below lr_max {}", self.lr_min, self.lr_max);
        assert!(self.total_steps >= 1, "total_steps must be at least 1");
        assert!(self.batch_size >= 1, "batch_size must be at least 1");
    }
}

/// Cosine-annealed learning rate: a single arc from `lr_max` at step 0 to
/// `lr_min` at `total_steps`, no restarts. The convex-combination form makes
/// both endpoints exact.
pub fn cosine_lr(step: usize, cfg: &TrainConfig) -> f64 {
    assert!(step <= cfg.total_steps, "cosine_lr step {step} outside 0..={}", cfg.total_steps);
    let progress = step as f64 / cfg.total_steps as f64;
    let w = 0.5 * (1.0 + (core::f64::consts::PI * progress).cos());
    cfg.lr_max * w + cfg.lr_min * (1.0 - w)
}

// ─── Adam ────────────────────────────────────────────────────────────────

/// Per-parameter Adam moments, mirrored onto a [`ParamStore`].
pub struct AdamState<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    /// Completed update count (bias-correction exponent).
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(store: &ParamStore<T>) -> Self {
        let m = store.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        let v = store.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        AdamState { m, v, t: 0 }
    }
}

/// One in-place bias-corrected Adam update. `grads` must hold one gradient
/// per registered parameter, in registration order.
pub fn adam_step<T: Scalar>(
    store: &mut ParamStore<T>,
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
    cfg: &TrainConfig,
) {
    assert_eq!(grads.len(), store.len(), "adam_step needs a gradient for every parameter");
    state.t += 1;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    // Bias corrections for this step count.
    let c1 = T::from_f64(1.0 - cfg.beta1.powi(state.t as i32));
    let c2 = T::from_f64(1.0 - cfg.beta2.powi(state.t as i32));
    let lr_t = T::from_f64(lr);
    let eps = T::from_f64(cfg.eps);

    let ids: Vec<_> = store.ids().collect();
    for (idx, id) in ids.into_iter().enumerate() {
        let g = &grads[idx];
        let m = &mut state.m[idx];
        for (mv, &gv) in m.data_mut().iter_mut().zip(g.data()) {
            *mv = b1 * *mv + (one - b1) * gv;
        }
        let v = &mut state.v[idx];
        for (vv, &gv) in v.data_mut().iter_mut().zip(g.data()) {
            *vv = b2 * *vv + (one - b2) * gv * gv;
        }
        let p = store.get_mut(id);
        for ((pv, &mv), &vv) in p.data_mut().iter_mut().zip(state.m[idx].data()).zip(state.v[idx].data()) {
            let m_hat = mv / c1;
            let v_hat = vv / c2;
            *pv = *pv - lr_t * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

// ─── Training loop ───────────────────────────────────────────────────────

/// One `step<TAB>lr<TAB>loss` record per optimization step.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEntry {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Raised when the objective stops being finite; carries the abort point.
#[derive(Clone, Debug)]
pub struct DivergedError {
    pub step: usize,
    pub lr: f64,
}

impl core::fmt::Display for DivergedError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "non-finite loss at step {} (lr {:.3e})", self.step, self.lr)
    }
}

/// Train a model on a set of 7-frame HR clips. Every step draws
/// `batch_size` random crops, averages the Charbonnier losses, runs one
/// backward sweep, and applies Adam at the cosine-annealed rate. Fully
/// deterministic for a fixed seed. Returns the per-step loss log.
pub fn train_loop<T: Scalar>(
    model: &SpaceTimeModel,
    store: &mut ParamStore<T>,
    clips: &[Vec<Tensor<T>>],
    cfg: &TrainConfig,
) -> Result<Vec<LossEntry>, DivergedError> {
    cfg.validate();
    assert!(!clips.is_empty(), "training needs at least one clip");
    let mut rng = seeded_rng(cfg.seed);
    let mut adam = AdamState::new(store);
    let mut log = Vec::with_capacity(cfg.total_steps);

    for step in 0..cfg.total_steps {
        let lr = cosine_lr(step, cfg);
        let mut graph = Graph::new(store);
        let mut batch_loss = None;
        for _ in 0..cfg.batch_size {
            let clip = &clips[rng.gen_range(0..clips.len())];
            let TrainingSample { lr_input, hr_target } =
                data::make_training_sample(clip, cfg.patch, &mut rng, cfg.augment);
            let loss = model.sequence_loss(&mut graph, &lr_input, &hr_target);
            batch_loss = Some(match batch_loss {
                None => loss,
                Some(acc) => graph.tape.add(acc, loss),
            });
        }
        let total = batch_loss.expect("batch_size >= 1");
        let mean_loss =
            graph.tape.scalar_mul(total, T::from_f64(1.0 / cfg.batch_size as f64));
        let loss_value = graph.tape.value(mean_loss).data()[0].as_f64();
        if !loss_value.is_finite() {
            return Err(DivergedError { step, lr });
        }
        graph.tape.backward(mean_loss);

        let grads: Vec<Tensor<T>> = store
            .ids()
            .map(|id| graph.grad(id).cloned().unwrap_or_else(|| Tensor::zeros(store.get(id).shape())))
            .collect();
        adam_step(store, &grads, &mut adam, lr, cfg);
        log.push(LossEntry { step, lr, loss: loss_value });
    }
    Ok(log)
}

// ─── Tests ───────────────────────────────────────────────────────────────
