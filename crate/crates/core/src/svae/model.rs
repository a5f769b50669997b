//! Model definition: encoders, latent controller and mixture decoder.

use super::{SvaeConfig, SvaeError};
use crate::dataio::clip::HandoverState;
use crate::dataio::features::FeatureLayout;
use crate::nn::{Linear, Mlp, MultiHeadAttention, NodeId, ParamSet, Tape};
use crate::seeds::sub_rng;
use nalgebra::Vector3;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Parameter-name prefix of the full-window encoder; stage 2 freezes it.
pub const ENCODER_PREFIX: &str = "enc_full/";

/// Bound applied to predicted log-variances before exponentiation.
const LOG_VAR_RANGE: (f64, f64) = (-12.0, 8.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingStage {
    Stage1,
    Stage2,
}

/// Diagonal Gaussian over the latent space.
#[derive(Debug, Clone)]
pub struct LatentDistribution {
    pub mu: Array1<f64>,
    pub log_var: Array1<f64>,
}

impl LatentDistribution {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mean(&self) -> Array1<f64> {
        self.mu.clone()
    }

    /// Reparameterized draw, z = mu + exp(log_var / 2) * eps.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Array1<f64> {
        Array1::from_iter(self.mu.iter().zip(self.log_var.iter()).map(|(&m, &lv)| {
            let eps: f64 = rng.sample(StandardNormal);
            m + (lv / 2.0).exp() * eps
        }))
    }
}

struct EncoderArch {
    embed: Linear,
    attention: MultiHeadAttention,
    head: Mlp,
}

struct Arch {
    full: EncoderArch,
    lc: EncoderArch,
    experts: Vec<Mlp>,
    gating: Mlp,
}

/// Trajectory generator with full-window encoder, latent controller and
/// mixture-of-experts decoder.
pub struct SvaeModel {
    pub config: SvaeConfig,
    pub layout: FeatureLayout,
    pub params: ParamSet,
    pub stage: TrainingStage,
    pub log: Vec<super::train::TrainingRecord>,
    arch: Arch,
}

fn build_encoder(
    params: &mut ParamSet,
    prefix: &str,
    frame_width: usize,
    cfg: &SvaeConfig,
    rng: &mut rand_chacha::ChaCha20Rng,
) -> EncoderArch {
    let d = cfg.embed_dim();
    EncoderArch {
        embed: Linear::new(params, &format!("{prefix}embed"), frame_width, d, rng),
        attention: MultiHeadAttention::new(
            params,
            &format!("{prefix}attn"),
            d,
            cfg.attention_heads,
            rng,
        ),
        head: Mlp::new(
            params,
            &format!("{prefix}head"),
            &[d, cfg.hidden_dim, 2 * cfg.latent_dim],
            rng,
        ),
    }
}

impl SvaeModel {
    pub fn new(config: SvaeConfig, layout: FeatureLayout) -> Result<Self, SvaeError> {
        config.validate()?;
        let mut rng = sub_rng(config.seed, "svae/init");
        let mut params = ParamSet::new();
        let frame_w = layout.frame_width();
        let full = build_encoder(&mut params, ENCODER_PREFIX, frame_w, &config, &mut rng);
        let lc = build_encoder(&mut params, "lc/", frame_w + 3, &config, &mut rng);
        let expert_in = config.latent_dim + frame_w;
        let experts = (0..config.num_experts)
            .map(|k| {
                Mlp::new(
                    &mut params,
                    &format!("dec/expert{k}"),
                    &[expert_in, config.hidden_dim, config.hidden_dim, 3],
                    &mut rng,
                )
            })
            .collect();
        let gating = Mlp::new(
            &mut params,
            "dec/gate",
            &[expert_in, config.hidden_dim, config.num_experts],
            &mut rng,
        );
        Ok(SvaeModel {
            config,
            layout,
            params,
            stage: TrainingStage::Stage1,
            log: Vec::new(),
            arch: Arch {
                full,
                lc,
                experts,
                gating,
            },
        })
    }

    fn encode_nodes(
        &self,
        enc: &EncoderArch,
        tape: &mut Tape,
        input: NodeId,
        seq: usize,
    ) -> (NodeId, NodeId, Vec<NodeId>) {
        let latent = self.config.latent_dim;
        let embedded = enc.embed.apply(&self.params, tape, input);
        let activated = tape.elu(embedded);
        let (attended, weights) = enc.attention.apply(&self.params, tape, activated, seq);
        let pooled = tape.mean_rows_grouped(attended, seq);
        let stats = enc.head.apply(&self.params, tape, pooled);
        let mu = tape.slice_cols(stats, 0, latent);
        let lv_raw = tape.slice_cols(stats, latent, 2 * latent);
        let lv = tape.clamp(lv_raw, LOG_VAR_RANGE.0, LOG_VAR_RANGE.1);
        (mu, lv, weights)
    }

    /// Full-window posterior; `input` is (B * (2T+1), frame_width).
    pub(crate) fn encode_full_nodes(&self, tape: &mut Tape, input: NodeId) -> (NodeId, NodeId) {
        let (mu, lv, _) = self.encode_nodes(&self.arch.full, tape, input, self.config.full_len());
        (mu, lv)
    }

    /// Latent-controller posterior; `input` is (B * (T+1), frame_width + 3).
    pub(crate) fn encode_lc_nodes(
        &self,
        tape: &mut Tape,
        input: NodeId,
    ) -> (NodeId, NodeId, Vec<NodeId>) {
        self.encode_nodes(&self.arch.lc, tape, input, self.config.seen_len())
    }

    /// Mixture decode; `z` is (B, latent), `context` (B, frame_width).
    /// Returns the (B, 3) prediction and the (B, num_experts) gates.
    pub(crate) fn decode_nodes(
        &self,
        tape: &mut Tape,
        z: NodeId,
        context: NodeId,
    ) -> (NodeId, NodeId) {
        let input = tape.concat_cols(&[z, context]);
        let logits = self.arch.gating.apply(&self.params, tape, input);
        let gates = tape.softmax_rows(logits);
        let mut combined: Option<NodeId> = None;
        for (k, expert) in self.arch.experts.iter().enumerate() {
            let out_k = expert.apply(&self.params, tape, input);
            let gate_k = tape.slice_cols(gates, k, k + 1);
            let weighted = tape.rows_scale(out_k, gate_k);
            combined = Some(match combined {
                Some(acc) => tape.add(acc, weighted),
                None => weighted,
            });
        }
        (combined.expect("at least one expert"), gates)
    }

    fn check_window(
        &self,
        what: &'static str,
        view: ArrayView2<f64>,
        rows: usize,
        cols: usize,
    ) -> Result<(), SvaeError> {
        if view.dim() != (rows, cols) {
            return Err(SvaeError::ShapeMismatch {
                what,
                expected: format!("{rows}x{cols}"),
                got: format!("{}x{}", view.nrows(), view.ncols()),
            });
        }
        Ok(())
    }

    /// Concatenate primary and robot windows into one (rows, frame_width)
    /// matrix.
    pub(crate) fn join_windows(h: ArrayView2<f64>, r: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(h.nrows(), r.nrows(), "window row counts must match");
        let mut out = Array2::zeros((h.nrows(), h.ncols() + r.ncols()));
        out.slice_mut(s![.., ..h.ncols()]).assign(&h);
        out.slice_mut(s![.., h.ncols()..]).assign(&r);
        out
    }

    /// Append a broadcast one-hot handover state to a joined window.
    pub(crate) fn join_windows_with_state(
        h: ArrayView2<f64>,
        r: ArrayView2<f64>,
        state: HandoverState,
    ) -> Array2<f64> {
        let joined = Self::join_windows(h, r);
        let one_hot = state.one_hot();
        let mut out = Array2::zeros((joined.nrows(), joined.ncols() + 3));
        out.slice_mut(s![.., ..joined.ncols()]).assign(&joined);
        for (i, v) in one_hot.iter().enumerate() {
            out.column_mut(joined.ncols() + i).fill(*v);
        }
        out
    }

    fn distribution_from(tape: &Tape, mu: NodeId, lv: NodeId) -> LatentDistribution {
        LatentDistribution {
            mu: tape.value(mu).row(0).to_owned(),
            log_var: tape.value(lv).row(0).to_owned(),
        }
    }

    /// Encode a complete window (2T+1 frames of both participants).
    pub fn encode_full(
        &self,
        h_full: ArrayView2<f64>,
        r_full: ArrayView2<f64>,
    ) -> Result<LatentDistribution, SvaeError> {
        let rows = self.config.full_len();
        self.check_window("h_full", h_full, rows, self.layout.primary_width())?;
        self.check_window("r_full", r_full, rows, FeatureLayout::ROBOT_WIDTH)?;
        let mut tape = Tape::new();
        let input = tape.constant(Self::join_windows(h_full, r_full));
        let (mu, lv) = self.encode_full_nodes(&mut tape, input);
        Ok(Self::distribution_from(&tape, mu, lv))
    }

    /// Encode the seen half of a window plus the handover state.
    pub fn encode_lc(
        &self,
        h_seen: ArrayView2<f64>,
        r_seen: ArrayView2<f64>,
        state: HandoverState,
    ) -> Result<LatentDistribution, SvaeError> {
        self.encode_lc_with_attention(h_seen, r_seen, state)
            .map(|(dist, _)| dist)
    }

    /// As [`SvaeModel::encode_lc`], also returning per-head attention
    /// weights of shape (T+1, T+1).
    pub fn encode_lc_with_attention(
        &self,
        h_seen: ArrayView2<f64>,
        r_seen: ArrayView2<f64>,
        state: HandoverState,
    ) -> Result<(LatentDistribution, Vec<Array2<f64>>), SvaeError> {
        let rows = self.config.seen_len();
        self.check_window("h_seen", h_seen, rows, self.layout.primary_width())?;
        self.check_window("r_seen", r_seen, rows, FeatureLayout::ROBOT_WIDTH)?;
        let mut tape = Tape::new();
        let input = tape.constant(Self::join_windows_with_state(h_seen, r_seen, state));
        let (mu, lv, weights) = self.encode_lc_nodes(&mut tape, input);
        let attn = weights.iter().map(|&w| tape.value(w).clone()).collect();
        Ok((Self::distribution_from(&tape, mu, lv), attn))
    }

    /// Decoder conditioning vector: the most recent frame of both windows.
    pub(crate) fn context_row(h_seen: ArrayView2<f64>, r_seen: ArrayView2<f64>) -> Array2<f64> {
        let last = h_seen.nrows() - 1;
        Self::join_windows(
            h_seen.slice(s![last..last + 1, ..]),
            r_seen.slice(s![last..last + 1, ..]),
        )
    }

    /// Decode one next end-effector position from a latent sample.
    pub fn decode(
        &self,
        z: &Array1<f64>,
        h_seen: ArrayView2<f64>,
        r_seen: ArrayView2<f64>,
    ) -> Result<Vector3<f64>, SvaeError> {
        let (out, _) = self.decode_inspect(z, h_seen, r_seen)?;
        Ok(out)
    }

    /// Decode returning the gate simplex alongside the position.
    pub fn decode_inspect(
        &self,
        z: &Array1<f64>,
        h_seen: ArrayView2<f64>,
        r_seen: ArrayView2<f64>,
    ) -> Result<(Vector3<f64>, Vec<f64>), SvaeError> {
        let (out, gates) = self.decode_tape(z, h_seen, r_seen, |_, _| {})?;
        Ok((out, gates))
    }

    /// Per-expert outputs and gates, for mixture diagnostics.
    pub fn decode_parts(
        &self,
        z: &Array1<f64>,
        h_seen: ArrayView2<f64>,
        r_seen: ArrayView2<f64>,
    ) -> Result<(Vec<f64>, Vec<Vector3<f64>>), SvaeError> {
        let mut experts = Vec::new();
        let (_, gates) = self.decode_tape(z, h_seen, r_seen, |tape, input| {
            for expert in &self.arch.experts {
                let out = expert.apply(&self.params, tape, input);
                let row = tape.value(out).row(0).to_owned();
                experts.push(Vector3::new(row[0], row[1], row[2]));
            }
        })?;
        Ok((gates, experts))
    }

    fn decode_tape(
        &self,
        z: &Array1<f64>,
        h_seen: ArrayView2<f64>,
        r_seen: ArrayView2<f64>,
        mut extra: impl FnMut(&mut Tape, NodeId),
    ) -> Result<(Vector3<f64>, Vec<f64>), SvaeError> {
        if z.len() != self.config.latent_dim {
            return Err(SvaeError::ShapeMismatch {
                what: "z",
                expected: format!("{}", self.config.latent_dim),
                got: format!("{}", z.len()),
            });
        }
        let rows = self.config.seen_len();
        self.check_window("h_seen", h_seen, rows, self.layout.primary_width())?;
        self.check_window("r_seen", r_seen, rows, FeatureLayout::ROBOT_WIDTH)?;
        let mut tape = Tape::new();
        let z_node = tape.constant(z.clone().insert_axis(Axis(0)));
        let ctx = tape.constant(Self::context_row(h_seen, r_seen));
        let input = tape.concat_cols(&[z_node, ctx]);
        let (out, gates) = self.decode_nodes(&mut tape, z_node, ctx);
        extra(&mut tape, input);
        let row = tape.value(out).row(0);
        let gates = tape.value(gates).row(0).to_vec();
        Ok((Vector3::new(row[0], row[1], row[2]), gates))
    }

    /// Hex digest over the full-window encoder parameters, for the stage-2
    /// freeze contract.
    pub fn encoder_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, value) in self.params.iter() {
            if !name.starts_with(ENCODER_PREFIX) {
                continue;
            }
            hasher.update(name.as_bytes());
            hasher.update((value.nrows() as u64).to_le_bytes());
            hasher.update((value.ncols() as u64).to_le_bytes());
            for v in value.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        format!("{:x}", hasher.finalize())
    }
}
