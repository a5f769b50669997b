//! Tape-based reverse-mode differentiation on `Array2<f64>`.
//!
//! A [`Tape`] records every intermediate value together with the operation
//! that produced it. [`Tape::backward`] walks the record once in reverse and
//! accumulates gradients for all [`ParamSet`] entries that were pulled onto
//! the tape. Everything is dense, two-dimensional and double precision;
//! sequences are stacked row blocks, so a batch of B windows of S frames is
//! one (B * S, d) matrix and the block operations below act per window.

use super::params::{Gradients, ParamId, ParamSet};
use ndarray::{s, Array2, Axis};

/// Index of a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, #[allow(dead_code)] f64),
    MatMul(NodeId, NodeId),
    AddRowBroadcast(NodeId, NodeId),
    RowsScale(NodeId, NodeId),
    Elu(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Square(NodeId),
    Clamp(NodeId, f64, f64),
    SoftmaxRows(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    SumAll(NodeId),
    MeanAll(NodeId),
    SumCols(NodeId),
    MeanRowsGrouped(NodeId, usize),
    BlockMatMulNt(NodeId, NodeId, usize),
    BlockMatMulNn(NodeId, NodeId, usize),
    Detach(#[allow(dead_code)] NodeId),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Computation record. Build one per batch, run backward once, drop it.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let v = &self.nodes[id.0].value;
        (v.nrows(), v.ncols())
    }

    /// Scalar convenience for (1, 1) nodes such as losses.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.dim(), (1, 1), "node is not scalar");
        v[(0, 0)]
    }

    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// Pull a parameter onto the tape so gradients reach it.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        self.push(params.get(id).clone(), Op::Param(id))
    }

    fn binary_same_shape(&self, a: NodeId, b: NodeId, what: &str) {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "{what}: operand shapes differ"
        );
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, "add");
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, "sub");
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, "mul");
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a) + c;
        self.push(v, Op::AddScalar(a, c))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(
            self.shape(a).1,
            self.shape(b).0,
            "matmul: inner dimensions differ"
        );
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `x + row` where `row` is (1, d), broadcast over all rows of `x`.
    pub fn add_row_broadcast(&mut self, x: NodeId, row: NodeId) -> NodeId {
        assert_eq!(self.shape(row).0, 1, "add_row_broadcast: row must be 1 x d");
        assert_eq!(
            self.shape(x).1,
            self.shape(row).1,
            "add_row_broadcast: widths differ"
        );
        let v = self.value(x) + self.value(row);
        self.push(v, Op::AddRowBroadcast(x, row))
    }

    /// `x * w` with `w` of shape (B, 1) broadcast across the columns of `x`.
    pub fn rows_scale(&mut self, x: NodeId, w: NodeId) -> NodeId {
        assert_eq!(self.shape(w).1, 1, "rows_scale: weights must be B x 1");
        assert_eq!(
            self.shape(x).0,
            self.shape(w).0,
            "rows_scale: row counts differ"
        );
        let v = self.value(x) * self.value(w);
        self.push(v, Op::RowsScale(x, w))
    }

    pub fn elu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { x.exp() - 1.0 });
        self.push(v, Op::Elu(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::ln);
        self.push(v, Op::Ln(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        assert!(lo < hi, "clamp: empty interval");
        let v = self.value(a).mapv(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    /// Numerically stable softmax applied to each row independently.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let mut v = x.clone();
        for mut row in v.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|e| (e - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|e| e / sum);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat_cols: no inputs");
        let rows = self.shape(parts[0]).0;
        let width: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut v = Array2::zeros((rows, width));
        let mut at = 0;
        for &p in parts {
            let part = self.value(p);
            assert_eq!(part.nrows(), rows, "concat_cols: row counts differ");
            v.slice_mut(s![.., at..at + part.ncols()]).assign(part);
            at += part.ncols();
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        assert!(
            start < end && end <= self.shape(a).1,
            "slice_cols: range out of bounds"
        );
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start, end))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let v = Array2::from_elem((1, 1), x.sum() / x.len() as f64);
        self.push(v, Op::MeanAll(a))
    }

    /// Row-wise sum, (B, d) -> (B, 1).
    pub fn sum_cols(&mut self, a: NodeId) -> NodeId {
        let v = self
            .value(a)
            .sum_axis(Axis(1))
            .insert_axis(Axis(1))
            .to_owned();
        self.push(v, Op::SumCols(a))
    }

    /// Mean over consecutive groups of `group` rows, (B * group, d) -> (B, d).
    pub fn mean_rows_grouped(&mut self, a: NodeId, group: usize) -> NodeId {
        let x = self.value(a);
        assert!(group > 0 && x.nrows() % group == 0, "mean_rows_grouped: row count not divisible");
        let blocks = x.nrows() / group;
        let mut v = Array2::zeros((blocks, x.ncols()));
        for b in 0..blocks {
            let block = x.slice(s![b * group..(b + 1) * group, ..]);
            v.row_mut(b).assign(&(block.sum_axis(Axis(0)) / group as f64));
        }
        self.push(v, Op::MeanRowsGrouped(a, group))
    }

    /// Per block of `seq` rows: `A_i @ B_i^T`. Inputs are (N * seq, d),
    /// output is (N * seq, seq). Used for attention scores.
    pub fn block_matmul_nt(&mut self, a: NodeId, b: NodeId, seq: usize) -> NodeId {
        assert_eq!(self.shape(a), self.shape(b), "block_matmul_nt: shapes differ");
        let x = self.value(a);
        assert!(seq > 0 && x.nrows() % seq == 0, "block_matmul_nt: row count not divisible");
        let y = self.value(b);
        let blocks = x.nrows() / seq;
        let mut v = Array2::zeros((x.nrows(), seq));
        for i in 0..blocks {
            let r = i * seq..(i + 1) * seq;
            let prod = x.slice(s![r.clone(), ..]).dot(&y.slice(s![r.clone(), ..]).t());
            v.slice_mut(s![r, ..]).assign(&prod);
        }
        self.push(v, Op::BlockMatMulNt(a, b, seq))
    }

    /// Per block of `seq` rows: `S_i @ V_i` with `S` of width `seq`.
    /// `s` is (N * seq, seq), `v` is (N * seq, d), output (N * seq, d).
    pub fn block_matmul_nn(&mut self, sm: NodeId, v: NodeId, seq: usize) -> NodeId {
        let sv = self.value(sm);
        assert!(seq > 0 && sv.nrows() % seq == 0, "block_matmul_nn: row count not divisible");
        assert_eq!(sv.ncols(), seq, "block_matmul_nn: score width must equal seq");
        assert_eq!(
            sv.nrows(),
            self.value(v).nrows(),
            "block_matmul_nn: row counts differ"
        );
        let vv = self.value(v);
        let blocks = sv.nrows() / seq;
        let mut out = Array2::zeros((sv.nrows(), vv.ncols()));
        for i in 0..blocks {
            let r = i * seq..(i + 1) * seq;
            let prod = sv.slice(s![r.clone(), ..]).dot(&vv.slice(s![r.clone(), ..]));
            out.slice_mut(s![r, ..]).assign(&prod);
        }
        self.push(out, Op::BlockMatMulNn(sm, v, seq))
    }

    /// Forward identity that blocks gradient flow.
    pub fn detach(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).clone();
        self.push(v, Op::Detach(a))
    }

    /// Reverse sweep from a scalar `root`; returns parameter gradients.
    pub fn backward(&self, root: NodeId, params: &ParamSet) -> Gradients {
        self.backward_watched(root, params, &[]).0
    }

    /// Like [`Tape::backward`], additionally returning the adjoint of each
    /// watched node (e.g. an input constant, for sensitivity analysis).
    /// Watched nodes with no path to the root yield `None`.
    pub fn backward_watched(
        &self,
        root: NodeId,
        params: &ParamSet,
        watched: &[NodeId],
    ) -> (Gradients, Vec<Option<Array2<f64>>>) {
        assert_eq!(
            self.value(root).dim(),
            (1, 1),
            "backward root must be scalar"
        );
        let mut adj: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[root.0] = Some(Array2::from_elem((1, 1), 1.0));
        let mut grads = Gradients::new(params.len());
        let mut observed: Vec<Option<Array2<f64>>> = vec![None; watched.len()];

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            for (slot, w) in observed.iter_mut().zip(watched) {
                if w.0 == i {
                    *slot = Some(g.clone());
                }
            }
            match &self.nodes[i].op {
                Op::Constant | Op::Detach(_) => {}
                Op::Param(pid) => {
                    match &mut grads.by_param[pid.0] {
                        Some(acc) => *acc += &g,
                        slot => *slot = Some(g.clone()),
                    };
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, g.clone());
                    accumulate(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, *a, g.clone());
                    accumulate(&mut adj, *b, -g);
                }
                Op::Mul(a, b) => {
                    accumulate(&mut adj, *a, &g * self.value(*b));
                    accumulate(&mut adj, *b, &g * self.value(*a));
                }
                Op::Scale(a, c) => accumulate(&mut adj, *a, &g * *c),
                Op::AddScalar(a, _) => accumulate(&mut adj, *a, g),
                Op::MatMul(a, b) => {
                    accumulate(&mut adj, *a, g.dot(&self.value(*b).t()));
                    accumulate(&mut adj, *b, self.value(*a).t().dot(&g));
                }
                Op::AddRowBroadcast(x, row) => {
                    let row_grad = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut adj, *x, g);
                    accumulate(&mut adj, *row, row_grad);
                }
                Op::RowsScale(x, w) => {
                    let gw = (&g * self.value(*x))
                        .sum_axis(Axis(1))
                        .insert_axis(Axis(1));
                    accumulate(&mut adj, *x, &g * self.value(*w));
                    accumulate(&mut adj, *w, gw);
                }
                Op::Elu(a) => {
                    let y = &self.nodes[i].value;
                    let mut dx = g;
                    dx.zip_mut_with(y, |d, &o| {
                        if o <= 0.0 {
                            *d *= o + 1.0;
                        }
                    });
                    accumulate(&mut adj, *a, dx);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[i].value;
                    let dx = &g * &y.mapv(|s| s * (1.0 - s));
                    accumulate(&mut adj, *a, dx);
                }
                Op::Exp(a) => accumulate(&mut adj, *a, &g * &self.nodes[i].value),
                Op::Ln(a) => accumulate(&mut adj, *a, &g / self.value(*a)),
                Op::Square(a) => accumulate(&mut adj, *a, &g * &(self.value(*a) * 2.0)),
                Op::Clamp(a, lo, hi) => {
                    let mut dx = g;
                    dx.zip_mut_with(self.value(*a), |d, &x| {
                        if x < *lo || x > *hi {
                            *d = 0.0;
                        }
                    });
                    accumulate(&mut adj, *a, dx);
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[i].value;
                    let mut dx = g;
                    for (mut drow, yrow) in dx.rows_mut().into_iter().zip(y.rows()) {
                        let dot: f64 = drow.iter().zip(yrow.iter()).map(|(d, y)| d * y).sum();
                        for (d, &yv) in drow.iter_mut().zip(yrow.iter()) {
                            *d = (*d - dot) * yv;
                        }
                    }
                    accumulate(&mut adj, *a, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        let part = g.slice(s![.., at..at + w]).to_owned();
                        accumulate(&mut adj, p, part);
                        at += w;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let mut dx = Array2::zeros(self.value(*a).dim());
                    dx.slice_mut(s![.., *start..*end]).assign(&g);
                    accumulate(&mut adj, *a, dx);
                }
                Op::SumAll(a) => {
                    let dx = Array2::from_elem(self.value(*a).dim(), g[(0, 0)]);
                    accumulate(&mut adj, *a, dx);
                }
                Op::MeanAll(a) => {
                    let n = self.value(*a).len() as f64;
                    let dx = Array2::from_elem(self.value(*a).dim(), g[(0, 0)] / n);
                    accumulate(&mut adj, *a, dx);
                }
                Op::SumCols(a) => {
                    let (rows, cols) = self.shape(*a);
                    let mut dx = Array2::zeros((rows, cols));
                    for r in 0..rows {
                        dx.row_mut(r).fill(g[(r, 0)]);
                    }
                    accumulate(&mut adj, *a, dx);
                }
                Op::MeanRowsGrouped(a, group) => {
                    let (rows, cols) = self.shape(*a);
                    let mut dx = Array2::zeros((rows, cols));
                    for b in 0..rows / group {
                        let grow = g.row(b).mapv(|v| v / *group as f64);
                        for r in b * group..(b + 1) * group {
                            dx.row_mut(r).assign(&grow);
                        }
                    }
                    accumulate(&mut adj, *a, dx);
                }
                Op::BlockMatMulNt(a, b, seq) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let mut da = Array2::zeros(av.dim());
                    let mut db = Array2::zeros(bv.dim());
                    for idx in 0..av.nrows() / seq {
                        let r = idx * seq..(idx + 1) * seq;
                        let gb = g.slice(s![r.clone(), ..]);
                        da.slice_mut(s![r.clone(), ..])
                            .assign(&gb.dot(&bv.slice(s![r.clone(), ..])));
                        db.slice_mut(s![r.clone(), ..])
                            .assign(&gb.t().dot(&av.slice(s![r, ..])));
                    }
                    accumulate(&mut adj, *a, da);
                    accumulate(&mut adj, *b, db);
                }
                Op::BlockMatMulNn(sm, v, seq) => {
                    let sv = self.value(*sm);
                    let vv = self.value(*v);
                    let mut ds = Array2::zeros(sv.dim());
                    let mut dv = Array2::zeros(vv.dim());
                    for idx in 0..sv.nrows() / seq {
                        let r = idx * seq..(idx + 1) * seq;
                        let gb = g.slice(s![r.clone(), ..]);
                        ds.slice_mut(s![r.clone(), ..])
                            .assign(&gb.dot(&vv.slice(s![r.clone(), ..]).t()));
                        dv.slice_mut(s![r.clone(), ..])
                            .assign(&sv.slice(s![r.clone(), ..]).t().dot(&gb));
                    }
                    accumulate(&mut adj, *sm, ds);
                    accumulate(&mut adj, *v, dv);
                }
            }
        }
        (grads, observed)
    }
}

fn accumulate(adj: &mut [Option<Array2<f64>>], id: NodeId, g: Array2<f64>) {
    match &mut adj[id.0] {
        Some(acc) => *acc += &g,
        slot => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn matmul_forward_matches_hand_product() {
        let mut tape = Tape::new();
        let a = tape.constant(array![[1.0, 2.0], [3.0, 4.0]]);
        let b = tape.constant(array![[5.0], [6.0]]);
        let c = tape.matmul(a, b);
        assert_eq!(tape.value(c), &array![[17.0], [39.0]]);
    }

    #[test]
    fn matmul_backward_matches_hand_derivation() {
        // loss = sum(A @ B); dA = ones @ B^T, dB = A^T @ ones.
        let params = {
            let mut p = ParamSet::new();
            p.insert("a", array![[1.0, 2.0], [3.0, 4.0]]);
            p.insert("b", array![[5.0, 7.0], [6.0, 8.0]]);
            p
        };
        let mut tape = Tape::new();
        let a = tape.param(&params, params.id("a"));
        let b = tape.param(&params, params.id("b"));
        let c = tape.matmul(a, b);
        let loss = tape.sum_all(c);
        let grads = tape.backward(loss, &params);
        assert_eq!(
            grads.get(params.id("a")).unwrap(),
            &array![[12.0, 14.0], [12.0, 14.0]]
        );
        assert_eq!(
            grads.get(params.id("b")).unwrap(),
            &array![[4.0, 4.0], [6.0, 6.0]]
        );
    }

    #[test]
    fn softmax_rows_sum_to_one_and_order_preserved() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0, 2.0, 3.0], [-5.0, 0.0, 5.0]]);
        let y = tape.softmax_rows(x);
        for row in tape.value(y).rows() {
            assert!(close(row.sum(), 1.0));
            assert!(row.iter().all(|&v| v > 0.0));
        }
        let v = tape.value(y);
        assert!(v[(0, 0)] < v[(0, 1)] && v[(0, 1)] < v[(0, 2)]);
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut tape = Tape::new();
        let a = tape.constant(array![[1.0, 2.0, 3.0]]);
        let b = tape.constant(array![[1001.0, 1002.0, 1003.0]]);
        let sa = tape.softmax_rows(a);
        let sb = tape.softmax_rows(b);
        let (va, vb) = (tape.value(sa).clone(), tape.value(sb).clone());
        for (x, y) in va.iter().zip(vb.iter()) {
            assert!(close(*x, *y));
        }
    }

    #[test]
    fn elu_forward_piecewise() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[-1.0, 0.0, 2.0]]);
        let y = tape.elu(x);
        let v = tape.value(y);
        assert!(close(v[(0, 0)], (-1.0f64).exp() - 1.0));
        assert!(close(v[(0, 1)], 0.0));
        assert!(close(v[(0, 2)], 2.0));
    }

    #[test]
    fn sigmoid_midpoint_and_symmetry() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[0.0, 3.0, -3.0]]);
        let y = tape.sigmoid(x);
        let v = tape.value(y);
        assert!(close(v[(0, 0)], 0.5));
        assert!(close(v[(0, 1)] + v[(0, 2)], 1.0));
    }

    #[test]
    fn block_matmul_nt_matches_per_block_product() {
        let mut tape = Tape::new();
        // two blocks of seq = 2
        let a = tape.constant(array![[1.0, 0.0], [0.0, 1.0], [2.0, 0.0], [0.0, 3.0]]);
        let b = tape.constant(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]]);
        let c = tape.block_matmul_nt(a, b, 2);
        // block 0: I @ B0^T = B0^T
        assert_eq!(
            tape.value(c).slice(s![0..2, ..]).to_owned(),
            array![[1.0, 3.0], [2.0, 4.0]]
        );
        // block 1 row 0: (2, 0) . rows of B1 -> (10, 14)
        assert_eq!(
            tape.value(c).slice(s![2..4, ..]).to_owned(),
            array![[10.0, 14.0], [18.0, 24.0]]
        );
    }

    #[test]
    fn block_matmul_nn_applies_weights_per_block() {
        let mut tape = Tape::new();
        // identity scores reproduce values blockwise
        let sm = tape.constant(array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.5]]);
        let v = tape.constant(array![[1.0, 2.0], [3.0, 4.0], [10.0, 20.0], [30.0, 40.0]]);
        let out = tape.block_matmul_nn(sm, v, 2);
        assert_eq!(
            tape.value(out),
            &array![[1.0, 2.0], [3.0, 4.0], [20.0, 30.0], [20.0, 30.0]]
        );
    }

    #[test]
    fn concat_then_slice_round_trips() {
        let mut tape = Tape::new();
        let a = tape.constant(array![[1.0], [2.0]]);
        let b = tape.constant(array![[3.0, 4.0], [5.0, 6.0]]);
        let cat = tape.concat_cols(&[a, b]);
        assert_eq!(tape.shape(cat), (2, 3));
        let back = tape.slice_cols(cat, 1, 3);
        assert_eq!(tape.value(back), tape.value(b));
    }

    #[test]
    fn mean_rows_grouped_averages_blocks() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0, 2.0], [3.0, 4.0], [10.0, 10.0], [20.0, 30.0]]);
        let y = tape.mean_rows_grouped(x, 2);
        assert_eq!(tape.value(y), &array![[2.0, 3.0], [15.0, 20.0]]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut params = ParamSet::new();
        params.insert("w", array![[2.0]]);
        let mut tape = Tape::new();
        let w = tape.param(&params, params.id("w"));
        let d = tape.detach(w);
        let prod = tape.mul(w, d); // treated as w * const(2)
        let loss = tape.sum_all(prod);
        let grads = tape.backward(loss, &params);
        assert_eq!(grads.get(params.id("w")).unwrap(), &array![[2.0]]);
    }

    #[test]
    fn fan_out_accumulates_gradients() {
        // loss = sum(w + w) -> dw = 2
        let mut params = ParamSet::new();
        params.insert("w", array![[1.0, 1.0]]);
        let mut tape = Tape::new();
        let w = tape.param(&params, params.id("w"));
        let two = tape.add(w, w);
        let loss = tape.sum_all(two);
        let grads = tape.backward(loss, &params);
        assert_eq!(grads.get(params.id("w")).unwrap(), &array![[2.0, 2.0]]);
    }

    #[test]
    fn clamp_zeroes_gradient_outside_interval() {
        let mut params = ParamSet::new();
        params.insert("w", array![[-2.0, 0.5, 2.0]]);
        let mut tape = Tape::new();
        let w = tape.param(&params, params.id("w"));
        let c = tape.clamp(w, 0.0, 1.0);
        let loss = tape.sum_all(c);
        let grads = tape.backward(loss, &params);
        assert_eq!(grads.get(params.id("w")).unwrap(), &array![[0.0, 1.0, 0.0]]);
    }

    #[test]
    fn watched_input_gradient_of_linear_map_is_the_weight() {
        // y = sum(x @ w) -> dy/dx = ones @ w^T, i.e. each row of dx is w^T.
        let params = ParamSet::new();
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0, 2.0], [3.0, 4.0]]);
        let w = tape.constant(array![[5.0], [7.0]]);
        let y = tape.matmul(x, w);
        let loss = tape.sum_all(y);
        let (_, watched) = tape.backward_watched(loss, &params, &[x, w]);
        assert_eq!(watched[0].as_ref().unwrap(), &array![[5.0, 7.0], [5.0, 7.0]]);
        assert_eq!(watched[1].as_ref().unwrap(), &array![[4.0], [6.0]]);
    }

    #[test]
    fn unreachable_watched_node_yields_none() {
        let params = ParamSet::new();
        let mut tape = Tape::new();
        let used = tape.constant(array![[2.0]]);
        let orphan = tape.constant(array![[9.0]]);
        let loss = tape.sum_all(used);
        let (_, watched) = tape.backward_watched(loss, &params, &[orphan]);
        assert!(watched[0].is_none());
    }

    #[test]
    fn scalar_accessor_rejects_matrices() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0, 2.0]]);
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| tape.scalar(x)));
        assert!(result.is_err());
    }
}
