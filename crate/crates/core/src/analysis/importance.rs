//! Gradient-based joint-importance ranking.

use super::AnalysisError;
use crate::dataio::features::FeatureLayout;
use crate::dataio::window::MotionWindow;
use crate::kinematics::Skeleton;
use crate::nn::Tape;
use crate::rot::RotModel;
use crate::svae::SvaeModel;
use crate::timing::TimingModel;
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Input channel a row of the table refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImportanceChannel {
    Position,
    Rotation,
}

impl ImportanceChannel {
    pub fn label(self) -> &'static str {
        match self {
            ImportanceChannel::Position => "position",
            ImportanceChannel::Rotation => "rotation",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointImportanceRow {
    pub rank: usize,
    pub joint_name: String,
    pub channel: ImportanceChannel,
    pub magnitude: f64,
}

/// Ranked mean absolute input gradients, one rank sequence per channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointImportanceTable {
    pub rows: Vec<JointImportanceRow>,
}

impl JointImportanceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,joint,channel,magnitude\n");
        for row in &self.rows {
            writeln!(
                &mut out,
                "{},{},{},{:.6e}",
                row.rank,
                row.joint_name,
                row.channel.label(),
                row.magnitude
            )
            .expect("string writes cannot fail");
        }
        out
    }

    /// Rows of one channel, rank order.
    pub fn channel_rows(&self, channel: ImportanceChannel) -> Vec<&JointImportanceRow> {
        self.rows.iter().filter(|r| r.channel == channel).collect()
    }
}

/// A model whose output can be differentiated with respect to the primary
/// user's input features.
pub trait ImportanceModel {
    fn layout(&self) -> FeatureLayout;

    /// Signed gradient of the scalar-reduced output (sum over output
    /// dimensions) with respect to the primary features the model consumes;
    /// rows are the frames it reads, columns the per-frame feature width.
    fn primary_gradient(&self, window: &MotionWindow) -> Result<Array2<f64>, AnalysisError>;
}

impl ImportanceModel for SvaeModel {
    fn layout(&self) -> FeatureLayout {
        self.layout
    }

    /// Deterministic generation path: latent-controller mean into the
    /// decoder. The last seen frame also conditions the decoder directly, so
    /// its two gradient contributions are summed before taking magnitudes.
    fn primary_gradient(&self, window: &MotionWindow) -> Result<Array2<f64>, AnalysisError> {
        let h = window.h_seen().to_owned();
        let r = window.r_seen().to_owned();
        let seen = h.nrows();
        let pw = self.layout.primary_width();
        let one_hot = window.state.one_hot();
        let mut state_cols = Array2::zeros((seen, 3));
        for (i, v) in one_hot.iter().enumerate() {
            state_cols.column_mut(i).fill(*v);
        }
        let ctx = SvaeModel::context_row(h.view(), r.view());

        let mut tape = Tape::new();
        let h_node = tape.constant(h);
        let r_node = tape.constant(r);
        let s_node = tape.constant(state_cols);
        let input = tape.concat_cols(&[h_node, r_node, s_node]);
        let (mu, _lv, _) = self.encode_lc_nodes(&mut tape, input);
        let ctx_node = tape.constant(ctx);
        let (pred, _gates) = self.decode_nodes(&mut tape, mu, ctx_node);
        let out = tape.sum_all(pred);
        let (_, watched) = tape.backward_watched(out, &self.params, &[h_node, ctx_node]);

        let mut grad = watched[0].clone().unwrap_or_else(|| {
            Array2::zeros((seen, pw))
        });
        if let Some(ctx_grad) = &watched[1] {
            // Columns 0..pw of the context row are the last h frame.
            let mut last = grad.row_mut(seen - 1);
            for c in 0..pw {
                last[c] += ctx_grad[[0, c]];
            }
        }
        Ok(grad)
    }
}

impl ImportanceModel for RotModel {
    fn layout(&self) -> FeatureLayout {
        self.layout
    }

    /// Prior-mean decode: the deployed predictor conditions on the current
    /// frame only, so the gradient covers that single frame.
    fn primary_gradient(&self, window: &MotionWindow) -> Result<Array2<f64>, AnalysisError> {
        let pw = self.layout.primary_width();
        let joined = RotModel::join_past(window.h_seen(), window.r_seen());
        let last = joined.nrows() - 1;
        let ctx = joined.slice(s![last..last + 1, ..]).to_owned();

        let mut tape = Tape::new();
        let z = tape.constant(Array2::zeros((1, self.config.latent_dim)));
        let ctx_node = tape.constant(ctx);
        let pred = self.decode_nodes(&mut tape, z, ctx_node);
        let out = tape.sum_all(pred);
        let (_, watched) = tape.backward_watched(out, &self.params, &[ctx_node]);
        let ctx_grad = watched[0].clone().unwrap_or_else(|| Array2::zeros((1, joined.ncols())));
        Ok(ctx_grad.slice(s![0..1, ..pw]).to_owned())
    }
}

impl ImportanceModel for TimingModel {
    fn layout(&self) -> FeatureLayout {
        self.layout
    }

    fn primary_gradient(&self, window: &MotionWindow) -> Result<Array2<f64>, AnalysisError> {
        let seen = self.config.seen_len();
        let pw = self.layout.primary_width();
        let flat = Array2::from_shape_vec(
            (1, seen * pw),
            TimingModel::flatten_window(window.h_seen()),
        )
        .expect("row-major flatten matches the window size");

        let mut tape = Tape::new();
        let input = tape.constant(flat);
        let p = self.forward_nodes(&mut tape, input);
        let out = tape.sum_all(p);
        let (_, watched) = tape.backward_watched(out, &self.params, &[input]);
        let grad = watched[0].clone().unwrap_or_else(|| Array2::zeros((1, seen * pw)));
        Ok(grad
            .into_shape_with_order((seen, pw))
            .expect("gradient reshapes back to the window"))
    }
}

/// Average absolute input gradients per joint and channel over a dataset and
/// rank them, 1 = most influential. Ranks are assigned per channel; ties
/// resolve by skeleton order, so the result is deterministic.
pub fn joint_importance<M: ImportanceModel>(
    model: &M,
    dataset: &[MotionWindow],
    skeleton: &Skeleton,
) -> Result<JointImportanceTable, AnalysisError> {
    if dataset.is_empty() {
        return Err(AnalysisError::EmptyDataset);
    }
    let layout = model.layout();
    if skeleton.joint_count() != layout.joint_count {
        return Err(AnalysisError::SkeletonMismatch {
            skeleton: skeleton.joint_count(),
            layout: layout.joint_count,
        });
    }
    let joints = layout.joint_count;
    // Accumulate |gradient| sums and coordinate counts per (joint, channel).
    let mut pos_sum = vec![0.0f64; joints];
    let mut rot_sum = vec![0.0f64; joints];
    let mut pos_count = vec![0usize; joints];
    let mut rot_count = vec![0usize; joints];

    for window in dataset {
        let grad = model.primary_gradient(window)?;
        for row in grad.rows() {
            for j in 0..joints {
                for c in layout.joint_position_cols(j) {
                    pos_sum[j] += row[c].abs();
                    pos_count[j] += 1;
                }
                for c in layout.joint_rotation_cols(j) {
                    rot_sum[j] += row[c].abs();
                    rot_count[j] += 1;
                }
            }
        }
    }

    let names = skeleton.joint_names();
    let mut rows = Vec::with_capacity(2 * joints);
    for (channel, sums, counts) in [
        (ImportanceChannel::Position, &pos_sum, &pos_count),
        (ImportanceChannel::Rotation, &rot_sum, &rot_count),
    ] {
        let mut magnitudes: Vec<(usize, f64)> = (0..joints)
            .map(|j| (j, sums[j] / counts[j] as f64))
            .collect();
        magnitudes.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite magnitudes"));
        for (rank0, (j, magnitude)) in magnitudes.into_iter().enumerate() {
            rows.push(JointImportanceRow {
                rank: rank0 + 1,
                joint_name: names[j].clone(),
                channel,
                magnitude,
            });
        }
    }
    Ok(JointImportanceTable { rows })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataio::window::make_windows;
    use crate::kinematics::synthetic_skeleton;
    use crate::nn::ParamSet;

    /// Linear probe: output = sum of (weights * primary features of every
    /// seen frame), so its input gradient is exactly the weight matrix.
    pub(crate) struct LinearProbe {
        pub layout: FeatureLayout,
        pub weights: Array2<f64>,
    }

    impl ImportanceModel for LinearProbe {
        fn layout(&self) -> FeatureLayout {
            self.layout
        }

        fn primary_gradient(&self, window: &MotionWindow) -> Result<Array2<f64>, AnalysisError> {
            let h = window.h_seen().to_owned();
            let mut tape = Tape::new();
            let input = tape.constant(h);
            let w = tape.constant(self.weights.clone());
            let weighted = tape.mul(input, w);
            let out = tape.sum_all(weighted);
            let params = ParamSet::new();
            let (_, watched) = tape.backward_watched(out, &params, &[input]);
            Ok(watched[0].clone().expect("input reaches the output"))
        }
    }

    fn probe_fixture() -> (Vec<MotionWindow>, Skeleton, FeatureLayout, usize) {
        let corpus = crate::rot::train::tests::fixture_corpus();
        let skeleton = synthetic_skeleton();
        let layout = FeatureLayout {
            joint_count: skeleton.joint_count(),
        };
        let t = 3usize;
        let mut windows = Vec::new();
        for clip in &corpus {
            windows.extend(make_windows(clip, t).unwrap());
        }
        (windows, skeleton, layout, t)
    }

    #[test]
    fn linear_probe_recovers_the_analytic_coefficient() {
        let (windows, skeleton, layout, t) = probe_fixture();
        let wrist = skeleton.joint_index("left_wrist").unwrap();
        let mut weights = Array2::zeros((t + 1, layout.primary_width()));
        for row in 0..t + 1 {
            for c in layout.joint_position_cols(wrist) {
                weights[[row, c]] = 5.0;
            }
        }
        let probe = LinearProbe {
            layout,
            weights,
        };
        let table = joint_importance(&probe, &windows, &skeleton).unwrap();

        let pos = table.channel_rows(ImportanceChannel::Position);
        assert_eq!(pos[0].joint_name, "left_wrist");
        assert_eq!(pos[0].rank, 1);
        assert!((pos[0].magnitude - 5.0).abs() < 1e-6);
        // Every other joint contributes nothing.
        for row in &pos[1..] {
            assert!(row.magnitude.abs() < 1e-12);
        }
        for row in table.channel_rows(ImportanceChannel::Rotation) {
            assert!(row.magnitude.abs() < 1e-12);
        }
    }

    #[test]
    fn ignored_joint_ranks_last_with_zero_magnitude() {
        let (windows, skeleton, layout, t) = probe_fixture();
        // Weight every position coordinate except the head's.
        let head = skeleton.joint_index("head").unwrap();
        let mut weights = Array2::zeros((t + 1, layout.primary_width()));
        for row in 0..t + 1 {
            for j in 0..layout.joint_count {
                if j == head {
                    continue;
                }
                for c in layout.joint_position_cols(j) {
                    weights[[row, c]] = 1.0 + j as f64;
                }
            }
        }
        let probe = LinearProbe {
            layout,
            weights,
        };
        let table = joint_importance(&probe, &windows, &skeleton).unwrap();
        let pos = table.channel_rows(ImportanceChannel::Position);
        let last = pos.last().unwrap();
        assert_eq!(last.joint_name, "head");
        assert_eq!(last.rank, layout.joint_count);
        assert_eq!(last.magnitude, 0.0);
    }

    #[test]
    fn table_is_invariant_to_dataset_order_and_duplication() {
        let (windows, skeleton, layout, t) = probe_fixture();
        let mut weights = Array2::zeros((t + 1, layout.primary_width()));
        for row in 0..t + 1 {
            for c in 0..layout.primary_width() {
                weights[[row, c]] = ((row * 31 + c * 7) % 13) as f64 * 0.1;
            }
        }
        let probe = LinearProbe {
            layout,
            weights,
        };
        let base = joint_importance(&probe, &windows, &skeleton).unwrap();

        let mut reversed = windows.clone();
        reversed.reverse();
        let shuffled = joint_importance(&probe, &reversed, &skeleton).unwrap();

        let mut doubled = windows.clone();
        doubled.extend(windows.iter().cloned());
        let dup = joint_importance(&probe, &doubled, &skeleton).unwrap();

        for (a, b) in base.rows.iter().zip(shuffled.rows.iter()) {
            assert_eq!(a.joint_name, b.joint_name);
            assert!((a.magnitude - b.magnitude).abs() < 1e-12);
        }
        for (a, b) in base.rows.iter().zip(dup.rows.iter()) {
            assert_eq!(a.joint_name, b.joint_name);
            assert!((a.magnitude - b.magnitude).abs() < 1e-12);
        }
    }

    #[test]
    fn ranks_are_a_permutation_and_magnitudes_non_increasing() {
        let (windows, skeleton, layout, t) = probe_fixture();
        let mut weights = Array2::zeros((t + 1, layout.primary_width()));
        for row in 0..t + 1 {
            for c in 0..layout.primary_width() {
                weights[[row, c]] = ((c * 17 + row) % 7) as f64 * 0.3 - 0.5;
            }
        }
        let probe = LinearProbe {
            layout,
            weights,
        };
        let table = joint_importance(&probe, &windows, &skeleton).unwrap();
        for channel in [ImportanceChannel::Position, ImportanceChannel::Rotation] {
            let rows = table.channel_rows(channel);
            assert_eq!(rows.len(), layout.joint_count);
            let mut seen_ranks: Vec<usize> = rows.iter().map(|r| r.rank).collect();
            seen_ranks.sort_unstable();
            assert_eq!(seen_ranks, (1..=layout.joint_count).collect::<Vec<_>>());
            for pair in rows.windows(2) {
                assert!(pair[0].magnitude >= pair[1].magnitude);
                assert!(pair[1].magnitude >= 0.0);
            }
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let skeleton = synthetic_skeleton();
        let layout = FeatureLayout {
            joint_count: skeleton.joint_count(),
        };
        let probe = LinearProbe {
            layout,
            weights: Array2::zeros((4, layout.primary_width())),
        };
        assert!(matches!(
            joint_importance(&probe, &[], &skeleton),
            Err(AnalysisError::EmptyDataset)
        ));
    }

    #[test]
    fn trained_models_produce_complete_tables() {
        // Smoke-test the three deployed-model gradient paths.
        let corpus = crate::rot::train::tests::fixture_corpus();
        let skeleton = synthetic_skeleton();
        let mut windows = Vec::new();
        for clip in &corpus {
            windows.extend(make_windows(clip, 3).unwrap());
        }
        let eval: Vec<MotionWindow> = windows.iter().take(6).cloned().collect();

        let rot_cfg = crate::rot::train::tests::quick_config();
        let rot_model = crate::rot::train_rot(&corpus, &rot_cfg).unwrap();
        let table = joint_importance(&rot_model, &eval, &skeleton).unwrap();
        assert_eq!(table.rows.len(), 2 * skeleton.joint_count());

        let timing_cfg = crate::timing::TimingConfig {
            hidden_dim: 8,
            t: 3,
            epochs: 3,
            ..Default::default()
        };
        let timing_model = crate::timing::train_timing(&corpus, &timing_cfg).unwrap();
        let table = joint_importance(&timing_model, &eval, &skeleton).unwrap();
        assert_eq!(table.rows.len(), 2 * skeleton.joint_count());
        assert!(table.rows.iter().any(|r| r.magnitude > 0.0));

        let svae_cfg = crate::svae::SvaeConfig {
            latent_dim: 4,
            hidden_dim: 8,
            num_experts: 2,
            t: 3,
            attention_heads: 2,
            stage1_epochs: 2,
            rollout_len: 4,
            ..Default::default()
        };
        let svae_model = crate::svae::train_stage1(&corpus, &svae_cfg).unwrap();
        let table = joint_importance(&svae_model, &eval, &skeleton).unwrap();
        assert_eq!(table.rows.len(), 2 * skeleton.joint_count());
        assert!(table.rows.iter().any(|r| r.magnitude > 0.0));
        let csv = table.to_csv();
        assert!(csv.starts_with("rank,joint,channel,magnitude\n"));
        assert_eq!(csv.lines().count(), 1 + 2 * skeleton.joint_count());
    }
}
