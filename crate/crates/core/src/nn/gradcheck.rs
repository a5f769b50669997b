//! Central finite-difference verification of tape gradients.
//!
//! `max_gradient_discrepancy` rebuilds the loss with every parameter entry
//! nudged by ±h and compares the numerical slope against one backward pass.
//! Model tests use it as an oracle that never shares code with the tape.

use super::graph::{NodeId, Tape};
use super::params::ParamSet;
use ndarray::Array2;

/// Numerical gradient of `loss` with respect to one parameter matrix.
pub fn numerical_gradient<F>(params: &ParamSet, name: &str, h: f64, loss: F) -> Array2<f64>
where
    F: Fn(&ParamSet) -> f64,
{
    let id = params.id(name);
    let dim = params.get(id).dim();
    let mut grad = Array2::zeros(dim);
    for r in 0..dim.0 {
        for c in 0..dim.1 {
            let mut plus = params.clone();
            plus.get_mut(id)[(r, c)] += h;
            let mut minus = params.clone();
            minus.get_mut(id)[(r, c)] -= h;
            grad[(r, c)] = (loss(&plus) - loss(&minus)) / (2.0 * h);
        }
    }
    grad
}

/// Largest relative disagreement between analytic and numerical gradients
/// over all parameters. `build` must construct the loss deterministically
/// from the parameter values alone.
pub fn max_gradient_discrepancy<F>(params: &ParamSet, h: f64, build: F) -> f64
where
    F: Fn(&ParamSet, &mut Tape) -> NodeId,
{
    let mut tape = Tape::new();
    let root = build(params, &mut tape);
    let grads = tape.backward(root, params);
    let loss = |p: &ParamSet| {
        let mut t = Tape::new();
        let node = build(p, &mut t);
        t.scalar(node)
    };

    let mut worst: f64 = 0.0;
    for id in params.ids() {
        let numeric = numerical_gradient(params, params.name(id), h, loss);
        let zero = Array2::zeros(numeric.dim());
        let analytic = grads.get(id).map_or(&zero, |g| g);
        for (a, n) in analytic.iter().zip(numeric.iter()) {
            let scale = a.abs().max(n.abs()).max(1.0);
            worst = worst.max((a - n).abs() / scale);
        }
    }
    worst
}
