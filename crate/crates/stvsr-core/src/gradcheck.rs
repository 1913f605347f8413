//! Central finite-difference gradient checking.
//!
//! Every differentiable operation is validated against the oracle
//!
//! ```text
//! df/dx_j ≈ (f(x + h·e_j) − f(x − h·e_j)) / 2h
//! ```
//!
//! at 64-bit precision with h = 1e-5. Checks either sweep every element of
//! every input or probe a random subset (for whole-network checks). Callers
//! are responsible for choosing evaluation points away from the relu kinks
//! and integer sampling offsets where the derivative genuinely jumps.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;

use crate::params::{Graph, ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Default step size for the central difference.
pub const FD_STEP: f64 = 1e-5;

/// Element-level tolerance for single operations.
pub const OP_TOL: f64 = 1e-4;

/// Looser tolerance for whole-network compositions.
pub const NET_TOL: f64 = 1e-3;

/// Outcome of a gradient check: the worst relative error seen and how many
/// element comparisons were made.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub compared: usize,
    /// Human-readable location of the worst element.
    pub worst: String,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Relative error with a floor so near-zero gradient pairs compare on an
/// absolute scale.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

/// Check reverse-mode gradients of a scalar-valued computation against
/// central finite differences, sweeping every element of every input.
///
/// `f` records the computation on the given tape from the input variables
/// (in order) and returns the scalar output variable.
pub fn check_gradients(
    inputs: &[Tensor<f64>],
    f: impl Fn(&mut Tape<f64>, &[Var]) -> Var,
) -> GradCheckReport {
    let element_count: usize = inputs.iter().map(|t| t.numel()).sum();
    let all: Vec<(usize, usize)> =
        inputs.iter().enumerate().flat_map(|(i, t)| (0..t.numel()).map(move |j| (i, j))).collect();
    debug_assert_eq!(all.len(), element_count);
    check_elements(inputs, &f, &all)
}

/// Same oracle, probing only `n_probes` randomly chosen elements — for
/// compositions where a full sweep would be wasteful.
pub fn check_gradients_sampled<R: Rng>(
    inputs: &[Tensor<f64>],
    f: impl Fn(&mut Tape<f64>, &[Var]) -> Var,
    n_probes: usize,
    rng: &mut R,
) -> GradCheckReport {
    let mut picks = Vec::with_capacity(n_probes);
    for _ in 0..n_probes {
        let i = rng.gen_range(0..inputs.len());
        let j = rng.gen_range(0..inputs[i].numel());
        picks.push((i, j));
    }
    check_elements(inputs, &f, &picks)
}

/// Finite-difference check of a scalar objective recorded over a parameter
/// store: probes randomly chosen elements of every registered parameter and
/// of the extra `inputs`, comparing reverse-mode gradients from one backward
/// sweep against central differences of re-evaluated objectives.
///
/// This is the whole-module / whole-network oracle: `f` builds the objective
/// on a fresh graph each call and receives the input variables in order.
pub fn check_graph_gradients<R: Rng>(
    store: &mut ParamStore<f64>,
    inputs: &[Tensor<f64>],
    f: impl Fn(&mut Graph<f64>, &[Var]) -> Var,
    n_probes: usize,
    rng: &mut R,
) -> GradCheckReport {
    // Analytic pass: one graph, inputs registered as gradient-tracked.
    let ids: Vec<ParamId> = store.ids().collect();
    let mut g = Graph::new(store);
    let in_vars: Vec<Var> = inputs.iter().map(|t| g.tape.param(t.clone())).collect();
    let out = f(&mut g, &in_vars);
    assert!(
        g.tape.value(out).is_scalar(),
        "gradient check target must be scalar, got {:?}",
        g.tape.value(out).shape()
    );
    g.tape.backward(out);
    // Slot order: all parameters first, then the extra inputs.
    let mut analytic: Vec<Tensor<f64>> = ids
        .iter()
        .map(|&id| g.grad(id).cloned().unwrap_or_else(|| Tensor::zeros(store.get(id).shape())))
        .collect();
    for (&v, t) in in_vars.iter().zip(inputs) {
        analytic.push(g.tape.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())));
    }
    drop(g);

    let eval = |store: &ParamStore<f64>, inputs: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::new(store);
        let in_vars: Vec<Var> = inputs.iter().map(|t| g.tape.leaf(t.clone())).collect();
        let out = f(&mut g, &in_vars);
        g.tape.value(out).data()[0]
    };

    let sizes: Vec<usize> = analytic.iter().map(|t| t.numel()).collect();
    let total: usize = sizes.iter().sum();
    let mut work_inputs = inputs.to_vec();
    let mut report = GradCheckReport { max_rel_err: 0.0, compared: 0, worst: String::new() };
    for _ in 0..n_probes.min(total) {
        // Uniform over elements, then mapped back to (slot, offset).
        let mut flat = rng.gen_range(0..total);
        let mut slot = 0;
        while flat >= sizes[slot] {
            flat -= sizes[slot];
            slot += 1;
        }
        let nudge = |store: &mut ParamStore<f64>, work: &mut [Tensor<f64>], value: f64| {
            if slot < ids.len() {
                store.get_mut(ids[slot]).data_mut()[flat] = value;
            } else {
                work[slot - ids.len()].data_mut()[flat] = value;
            }
        };
        let orig = if slot < ids.len() {
            store.get(ids[slot]).data()[flat]
        } else {
            work_inputs[slot - ids.len()].data()[flat]
        };
        nudge(store, &mut work_inputs, orig + FD_STEP);
        let up = eval(store, &work_inputs);
        nudge(store, &mut work_inputs, orig - FD_STEP);
        let down = eval(store, &work_inputs);
        nudge(store, &mut work_inputs, orig);

        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[slot].data()[flat];
        let e = rel_err(a, numeric);
        report.compared += 1;
        if e > report.max_rel_err {
            report.max_rel_err = e;
            report.worst = format!(
                "slot {slot} element {flat}: analytic {a:.9e} vs numeric {numeric:.9e}"
            );
        }
    }
    report
}

fn check_elements(
    inputs: &[Tensor<f64>],
    f: &impl Fn(&mut Tape<f64>, &[Var]) -> Var,
    picks: &[(usize, usize)],
) -> GradCheckReport {
    // Analytic pass: one tape, all inputs as parameters.
    let mut tape = Tape::<f64>::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars);
    assert!(tape.value(out).is_scalar(), "gradient check target must be scalar, got {:?}", tape.value(out).shape());
    tape.backward(out);
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| tape.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    // Numeric pass: re-evaluate with one element nudged each way.
    let eval = |perturbed: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::<f64>::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).data()[0]
    };

    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut report = GradCheckReport { max_rel_err: 0.0, compared: 0, worst: String::new() };
    for &(i, j) in picks {
        let orig = work[i].data()[j];
        work[i].data_mut()[j] = orig + FD_STEP;
        let up = eval(&work);
        work[i].data_mut()[j] = orig - FD_STEP;
        let down = eval(&work);
        work[i].data_mut()[j] = orig;

        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[i].data()[j];
        let e = rel_err(a, numeric);
        report.compared += 1;
        if e > report.max_rel_err {
            report.max_rel_err = e;
            report.worst = format!("input {i} element {j}: analytic {a:.9e} vs numeric {numeric:.9e}");
        }
    }
    report
}

// ─── Tests ───────────────────────────────────────────────────────────────
