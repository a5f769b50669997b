//! Minimal neural-network stack used by every learned model in this crate:
//! a reverse-mode tape over `ndarray` matrices, named parameter storage,
//! Adam, and layer helpers (MLPs, block-wise multi-head attention).
//!
//! The stack is deliberately dense, single threaded and `f64` so that runs
//! are bit-reproducible for a fixed seed and gradients can be validated
//! against central finite differences.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{max_gradient_discrepancy, numerical_gradient};
pub use graph::{NodeId, Tape};
pub use layers::{Linear, Mlp, MultiHeadAttention};
pub use params::{Gradients, ParamId, ParamSet};

#[cfg(test)]
mod tests {
    use super::gradcheck::max_gradient_discrepancy;
    use super::*;
    use ndarray::{array, Array2};

    /// One loss that routes through every differentiable op on the tape,
    /// checked against finite differences in a single sweep.
    #[test]
    fn every_op_backward_matches_finite_differences() {
        let mut params = ParamSet::new();
        params.insert(
            "a",
            Array2::from_shape_fn((4, 3), |(r, c)| ((r * 3 + c) as f64 * 0.41).sin() * 0.8),
        );
        params.insert(
            "b",
            Array2::from_shape_fn((3, 4), |(r, c)| ((r * 4 + c) as f64 * 0.23).cos() * 0.5),
        );
        params.insert("w", array![[0.7], [0.4], [-0.3], [0.9]]);
        params.insert("row", array![[0.1, -0.2, 0.3, 0.05]]);

        let worst = max_gradient_discrepancy(&params, 1e-5, |p, t| {
            let a = t.param(p, p.id("a"));
            let b = t.param(p, p.id("b"));
            let w = t.param(p, p.id("w"));
            let row = t.param(p, p.id("row"));

            let mm = t.matmul(a, b); // (4, 4)
            let with_row = t.add_row_broadcast(mm, row);
            let scaled_rows = t.rows_scale(with_row, w);
            let act = t.elu(scaled_rows);
            let sig = t.sigmoid(act);
            let soft = t.softmax_rows(act);
            let blended = t.mul(sig, soft);
            let summed = t.add(blended, act);
            let diffed = t.sub(summed, soft);
            let scaled = t.scale(diffed, 1.3);
            let shifted = t.add_scalar(scaled, 0.2);
            let clamped = t.clamp(shifted, -0.9, 0.9);
            let squared = t.square(clamped);
            let safe = t.add_scalar(squared, 1.0);
            let logs = t.ln(safe);
            let exps = t.exp(logs);

            let left = t.slice_cols(exps, 0, 2);
            let right = t.slice_cols(exps, 2, 4);
            let cat = t.concat_cols(&[left, right]);

            let nt = t.block_matmul_nt(cat, cat, 2); // blocks of 2 rows
            let attnish = t.softmax_rows(nt);
            let mixed = t.block_matmul_nn(attnish, cat, 2);

            let grouped = t.mean_rows_grouped(mixed, 2); // (2, 4)
            let per_row = t.sum_cols(grouped); // (2, 1)
            let total = t.sum_all(per_row);
            let anchor = t.mean_all(mixed);
            let both = t.add(total, anchor);
            t.scale(both, 0.5)
        });
        assert!(worst < 1e-7, "worst relative gradient error {worst}");
    }

    #[test]
    fn parameter_reuse_across_two_branches_accumulates() {
        let mut params = ParamSet::new();
        params.insert("w", array![[0.3, -0.6], [0.2, 0.9]]);
        let worst = max_gradient_discrepancy(&params, 1e-5, |p, t| {
            let w = t.param(p, p.id("w"));
            let sq = t.matmul(w, w); // w appears twice
            let s = t.sum_all(sq);
            let e = t.exp(s);
            t.mean_all(e)
        });
        assert!(worst < 1e-7, "worst relative gradient error {worst}");
    }
}
