//! Reusable building blocks: linear layers, ELU MLPs and multi-head
//! self-attention over stacked row blocks.

use super::graph::{NodeId, Tape};
use super::params::{ParamId, ParamSet};
use rand_chacha::ChaCha20Rng;

/// Fully connected layer, `y = x W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        Linear {
            w: params.glorot(&format!("{name}/w"), input, output, rng),
            b: params.zeros(&format!("{name}/b"), 1, output),
        }
    }

    pub fn apply(&self, params: &ParamSet, tape: &mut Tape, x: NodeId) -> NodeId {
        let w = tape.param(params, self.w);
        let b = tape.param(params, self.b);
        let xw = tape.matmul(x, w);
        tape.add_row_broadcast(xw, b)
    }
}

/// Stack of linear layers with ELU between them and a linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// `dims` lists layer widths including input and output,
    /// e.g. `[in, hidden, hidden, out]` builds three linear layers.
    pub fn new(params: &mut ParamSet, name: &str, dims: &[usize], rng: &mut ChaCha20Rng) -> Self {
        assert!(dims.len() >= 2, "mlp needs at least input and output dims");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, pair)| Linear::new(params, &format!("{name}/l{i}"), pair[0], pair[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn apply(&self, params: &ParamSet, tape: &mut Tape, x: NodeId) -> NodeId {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(params, tape, h);
            if i + 1 < self.layers.len() {
                h = tape.elu(h);
            }
        }
        h
    }
}

/// Multi-head self-attention applied independently to each block of `seq`
/// rows. Input and output are (N * seq, d_model).
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub heads: usize,
    pub d_model: usize,
    query: Linear,
    key: Linear,
    value: Linear,
    output: Linear,
}

impl MultiHeadAttention {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        d_model: usize,
        heads: usize,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        assert!(heads > 0 && d_model % heads == 0, "d_model must split evenly across heads");
        MultiHeadAttention {
            heads,
            d_model,
            query: Linear::new(params, &format!("{name}/q"), d_model, d_model, rng),
            key: Linear::new(params, &format!("{name}/k"), d_model, d_model, rng),
            value: Linear::new(params, &format!("{name}/v"), d_model, d_model, rng),
            output: Linear::new(params, &format!("{name}/o"), d_model, d_model, rng),
        }
    }

    /// Returns the attended sequence and, per head, the softmax weight node
    /// of shape (N * seq, seq) for introspection.
    pub fn apply(
        &self,
        params: &ParamSet,
        tape: &mut Tape,
        x: NodeId,
        seq: usize,
    ) -> (NodeId, Vec<NodeId>) {
        let q = self.query.apply(params, tape, x);
        let k = self.key.apply(params, tape, x);
        let v = self.value.apply(params, tape, x);
        let dh = self.d_model / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut contexts = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = h * dh..(h + 1) * dh;
            let qh = tape.slice_cols(q, cols.start, cols.end);
            let kh = tape.slice_cols(k, cols.start, cols.end);
            let vh = tape.slice_cols(v, cols.start, cols.end);
            let scores = tape.block_matmul_nt(qh, kh, seq);
            let scaled = tape.scale(scores, scale);
            let attn = tape.softmax_rows(scaled);
            weights.push(attn);
            contexts.push(tape.block_matmul_nn(attn, vh, seq));
        }
        let merged = tape.concat_cols(&contexts);
        (self.output.apply(params, tape, merged), weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::max_gradient_discrepancy;
    use ndarray::{array, Array2};
    use rand::SeedableRng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(7)
    }

    #[test]
    fn linear_matches_hand_computation() {
        let mut params = ParamSet::new();
        let layer = Linear::new(&mut params, "fc", 2, 2, &mut rng());
        *params.get_mut(layer.w) = array![[1.0, 2.0], [3.0, 4.0]];
        *params.get_mut(layer.b) = array![[0.5, -0.5]];
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0, 1.0]]);
        let y = layer.apply(&params, &mut tape, x);
        assert_eq!(tape.value(y), &array![[4.5, 5.5]]);
    }

    #[test]
    fn mlp_output_shape_and_gradients() {
        let mut params = ParamSet::new();
        let mlp = Mlp::new(&mut params, "mlp", &[3, 5, 2], &mut rng());
        let x = Array2::from_shape_fn((4, 3), |(r, c)| 0.3 * r as f64 - 0.2 * c as f64);
        let worst = max_gradient_discrepancy(&params, 1e-5, |p, tape| {
            let input = tape.constant(x.clone());
            let out = mlp.apply(p, tape, input);
            let sq = tape.square(out);
            tape.mean_all(sq)
        });
        assert!(worst < 1e-7, "gradient mismatch {worst}");
    }

    #[test]
    fn attention_preserves_shape() {
        let mut params = ParamSet::new();
        let attn = MultiHeadAttention::new(&mut params, "attn", 8, 2, &mut rng());
        let mut tape = Tape::new();
        let x = tape.constant(Array2::from_shape_fn((6, 8), |(r, c)| {
            ((r * 8 + c) as f64 * 0.71).sin() * 0.3
        }));
        let (y, weights) = attn.apply(&params, &mut tape, x, 3);
        assert_eq!(tape.shape(y), (6, 8));
        assert_eq!(weights.len(), 2);
        assert_eq!(tape.shape(weights[0]), (6, 3));
    }

    #[test]
    fn attention_weights_are_uniform_for_identical_rows() {
        // When every frame in a block is identical, no frame can stand out,
        // so each softmax row must be 1/seq.
        let mut params = ParamSet::new();
        let attn = MultiHeadAttention::new(&mut params, "attn", 4, 2, &mut rng());
        let mut tape = Tape::new();
        let x = tape.constant(Array2::from_shape_fn((4, 4), |(_, c)| [0.3, -0.1, 0.8, 0.2][c]));
        let (_, weights) = attn.apply(&params, &mut tape, x, 4);
        for &w in &weights {
            for v in tape.value(w).iter() {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut params = ParamSet::new();
        let attn = MultiHeadAttention::new(&mut params, "attn", 8, 4, &mut rng());
        let mut tape = Tape::new();
        let x = tape.constant(Array2::from_shape_fn((10, 8), |(r, c)| {
            ((r + 2 * c) as f64).cos()
        }));
        let (_, weights) = attn.apply(&params, &mut tape, x, 5);
        for &w in &weights {
            for row in tape.value(w).rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_gradients_match_finite_differences() {
        let mut params = ParamSet::new();
        let attn = MultiHeadAttention::new(&mut params, "attn", 4, 2, &mut rng());
        let x = Array2::from_shape_fn((4, 4), |(r, c)| ((r * 4 + c) as f64 * 0.37).sin());
        let worst = max_gradient_discrepancy(&params, 1e-5, |p, tape| {
            let input = tape.constant(x.clone());
            let (y, _) = attn.apply(p, tape, input, 2);
            let sq = tape.square(y);
            tape.mean_all(sq)
        });
        assert!(worst < 1e-7, "gradient mismatch {worst}");
    }
}
