//! CVAE over past motion windows: encoder, decoder and prediction.

use super::{RegionOfTransfer, RotConfig, RotError};
use crate::dataio::features::FeatureLayout;
use crate::nn::{Linear, Mlp, MultiHeadAttention, NodeId, ParamSet, Tape};
use crate::seeds::sub_rng;
use nalgebra::Vector3;
use ndarray::{s, Array2, ArrayView2};

/// Bound applied to predicted log-variances before exponentiation.
const LOG_VAR_RANGE: (f64, f64) = (-12.0, 8.0);

struct Arch {
    embed: Linear,
    attention: MultiHeadAttention,
    head: Mlp,
    decoder: Mlp,
}

/// Region-of-transfer predictor: attention encoder over the past window plus
/// target, MLP decoder over latent plus current frame.
pub struct RotModel {
    pub config: RotConfig,
    pub layout: FeatureLayout,
    pub params: ParamSet,
    pub log: Vec<super::RotTrainingRecord>,
    arch: Arch,
}

impl RotModel {
    pub fn new(config: RotConfig, layout: FeatureLayout) -> Result<Self, RotError> {
        config.validate()?;
        let mut rng = sub_rng(config.seed, "rot/init");
        let mut params = ParamSet::new();
        let arch = Self::build_arch(&mut params, &config, &layout, &mut rng);
        Ok(RotModel {
            config,
            layout,
            params,
            log: Vec::new(),
            arch,
        })
    }

    fn build_arch(
        params: &mut ParamSet,
        cfg: &RotConfig,
        layout: &FeatureLayout,
        rng: &mut rand_chacha::ChaCha20Rng,
    ) -> Arch {
        let frame_w = layout.frame_width();
        let d = cfg.embed_dim();
        Arch {
            embed: Linear::new(params, "enc/embed", frame_w + 6, d, rng),
            attention: MultiHeadAttention::new(params, "enc/attn", d, cfg.attention_heads, rng),
            head: Mlp::new(
                params,
                "enc/head",
                &[d, cfg.hidden_dim, 2 * cfg.latent_dim],
                rng,
            ),
            decoder: Mlp::new(
                params,
                "dec/mlp",
                &[cfg.latent_dim + frame_w, cfg.hidden_dim, cfg.hidden_dim, 6],
                rng,
            ),
        }
    }

    /// Posterior statistics; `input` is (B * (t+1), frame_width + 6) rows of
    /// the joined window with the 6-DoF target broadcast onto each frame.
    pub(crate) fn encode_nodes(&self, tape: &mut Tape, input: NodeId) -> (NodeId, NodeId) {
        let latent = self.config.latent_dim;
        let embedded = self.arch.embed.apply(&self.params, tape, input);
        let activated = tape.elu(embedded);
        let (attended, _) =
            self.arch
                .attention
                .apply(&self.params, tape, activated, self.config.seen_len());
        let pooled = tape.mean_rows_grouped(attended, self.config.seen_len());
        let stats = self.arch.head.apply(&self.params, tape, pooled);
        let mu = tape.slice_cols(stats, 0, latent);
        let lv_raw = tape.slice_cols(stats, latent, 2 * latent);
        let lv = tape.clamp(lv_raw, LOG_VAR_RANGE.0, LOG_VAR_RANGE.1);
        (mu, lv)
    }

    /// Decode `z` (B, latent) conditioned on the current frame (B, frame_w).
    pub(crate) fn decode_nodes(&self, tape: &mut Tape, z: NodeId, context: NodeId) -> NodeId {
        let input = tape.concat_cols(&[z, context]);
        self.arch.decoder.apply(&self.params, tape, input)
    }

    fn check_window(
        what: &'static str,
        view: ArrayView2<f64>,
        rows: usize,
        cols: usize,
    ) -> Result<(), RotError> {
        if view.dim() != (rows, cols) {
            return Err(RotError::ShapeMismatch {
                what,
                expected: format!("{rows}x{cols}"),
                got: format!("{}x{}", view.nrows(), view.ncols()),
            });
        }
        Ok(())
    }

    /// Join the two past windows into one (t+1, frame_width) matrix.
    pub(crate) fn join_past(h: ArrayView2<f64>, r: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(h.nrows(), r.nrows(), "window row counts must match");
        let mut out = Array2::zeros((h.nrows(), h.ncols() + r.ncols()));
        out.slice_mut(s![.., ..h.ncols()]).assign(&h);
        out.slice_mut(s![.., h.ncols()..]).assign(&r);
        out
    }

    /// Predict the RoT from the past `t+1` frames of both participants,
    /// decoding the prior mean so the output is deterministic.
    pub fn predict_rot(
        &self,
        h_past: ArrayView2<f64>,
        r_past: ArrayView2<f64>,
    ) -> Result<RegionOfTransfer, RotError> {
        let rows = self.config.seen_len();
        Self::check_window("h_past", h_past, rows, self.layout.primary_width())?;
        Self::check_window("r_past", r_past, rows, FeatureLayout::ROBOT_WIDTH)?;
        let joined = Self::join_past(h_past, r_past);
        let context = joined.row(rows - 1).to_owned().insert_axis(ndarray::Axis(0));

        let mut tape = Tape::new();
        let z = tape.constant(Array2::zeros((1, self.config.latent_dim)));
        let context = tape.constant(context);
        let out = self.decode_nodes(&mut tape, z, context);
        let out = tape.value(out);
        let position = Vector3::new(out[[0, 0]], out[[0, 1]], out[[0, 2]]);
        let direction = Vector3::new(out[[0, 3]], out[[0, 4]], out[[0, 5]]);
        RegionOfTransfer::new(position, direction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    pub(crate) fn tiny_config() -> RotConfig {
        RotConfig {
            latent_dim: 4,
            hidden_dim: 10,
            t: 3,
            beta: 0.05,
            attention_heads: 2,
            epochs: 40,
            lr_start: 3e-3,
            lr_end: 1e-4,
            lr_decay_start_epoch: 15,
            batch_size: 8,
            window_stride: 1,
            seed: 11,
        }
    }

    #[test]
    fn prediction_is_deterministic_with_unit_direction() {
        let layout = FeatureLayout { joint_count: 2 };
        let cfg = tiny_config();
        let model = RotModel::new(cfg.clone(), layout).unwrap();
        let rows = cfg.seen_len();
        let h = Array2::from_shape_fn((rows, layout.primary_width()), |(i, j)| {
            0.1 * (i as f64) - 0.03 * (j as f64)
        });
        let r = Array2::from_shape_fn((rows, FeatureLayout::ROBOT_WIDTH), |(i, j)| {
            0.05 * (i as f64 + j as f64).sin()
        });
        let a = model.predict_rot(h.view(), r.view()).unwrap();
        let b = model.predict_rot(h.view(), r.view()).unwrap();
        assert_eq!(a, b);
        assert!((a.direction.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wrong_window_shapes_are_rejected() {
        let layout = FeatureLayout { joint_count: 2 };
        let cfg = tiny_config();
        let model = RotModel::new(cfg.clone(), layout).unwrap();
        let h = Array2::zeros((cfg.seen_len() + 1, layout.primary_width()));
        let r = Array2::zeros((cfg.seen_len(), FeatureLayout::ROBOT_WIDTH));
        assert!(matches!(
            model.predict_rot(h.view(), r.view()),
            Err(RotError::ShapeMismatch { what: "h_past", .. })
        ));
        let h = Array2::zeros((cfg.seen_len(), layout.primary_width()));
        let r = Array2::zeros((cfg.seen_len(), FeatureLayout::ROBOT_WIDTH + 1));
        assert!(matches!(
            model.predict_rot(h.view(), r.view()),
            Err(RotError::ShapeMismatch { what: "r_past", .. })
        ));
    }
}
