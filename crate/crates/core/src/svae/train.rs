//! Two-stage training.
//!
//! Stage 1 fits the full-window encoder and the mixture decoder with the
//! ELBO, warming up on reconstruction alone before enabling the KL term,
//! and ramping scheduled sampling so the decoder increasingly consumes its
//! own (detached) predictions over rollout chunks of `rollout_len` steps.
//! Stage 2 freezes the full encoder bit-for-bit and trains the latent
//! controller (and decoder) to align with it: first on the latent KL alone,
//! then on reconstruction plus KL.

use super::loss::{kl_between_node, kl_standard_node, recon_node, reparameterize, sample_eps};
use super::model::{SvaeModel, TrainingStage, ENCODER_PREFIX};
use super::schedule::{sched_sampling_p, LrSchedule};
use super::{SvaeConfig, SvaeError};
use crate::dataio::clip::{HandoverState, MotionClip};
use crate::dataio::features::{ClipFeatures, FeatureLayout};
use crate::nn::{Adam, AdamConfig, NodeId, Tape};
use crate::seeds::sub_rng;
use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// JSON has no NaN literal, so the alignment-only recon is null on disk.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        let opt = if value.is_nan() { None } else { Some(*value) };
        opt.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::NAN))
    }
}

/// One epoch of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub stage: u8,
    pub epoch: usize,
    pub lr: f64,
    pub p: f64,
    /// NaN during stage-2 alignment-only epochs (reconstruction unused).
    #[serde(with = "nan_as_null")]
    pub recon: f64,
    pub kl: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy)]
struct Chunk {
    clip: usize,
    start: usize,
}

struct TrainClip {
    /// (frames, frame_width): primary features then robot features.
    joined: Array2<f64>,
    states: Vec<HandoverState>,
}

/// Pre-extracted features plus the rollout-chunk index.
struct ChunkSet {
    clips: Vec<TrainClip>,
    chunks: Vec<Chunk>,
    layout: FeatureLayout,
    t: usize,
    steps: usize,
}

impl ChunkSet {
    fn build(corpus: &[MotionClip], cfg: &SvaeConfig) -> Result<Self, SvaeError> {
        let layout = corpus_layout(corpus)?;
        let t = cfg.t;
        let steps = cfg.rollout_len;
        let mut clips = Vec::new();
        let mut chunks = Vec::new();
        for clip in corpus {
            if clip.len() < 2 * t + 2 {
                continue;
            }
            let features = ClipFeatures::compute(clip)?;
            let joined = SvaeModel::join_windows(features.primary.view(), features.robot.view());
            let states: Vec<HandoverState> =
                clip.annotations.iter().map(|a| a.state).collect();
            let last_center = clip.len() - t - 2;
            let clip_index = clips.len();
            clips.push(TrainClip { joined, states });
            if last_center < t + steps - 1 {
                continue;
            }
            for start in (t..=last_center - (steps - 1)).step_by(steps) {
                chunks.push(Chunk {
                    clip: clip_index,
                    start,
                });
            }
        }
        if chunks.is_empty() {
            return Err(SvaeError::EmptyCorpus);
        }
        Ok(ChunkSet {
            clips,
            chunks,
            layout,
            t,
            steps,
        })
    }

    fn frame_width(&self) -> usize {
        self.layout.frame_width()
    }

    fn primary_width(&self) -> usize {
        self.layout.primary_width()
    }

    /// Stack full windows (2T+1 rows per chunk) at `start + step`.
    fn gather_full(&self, batch: &[Chunk], step: usize) -> Array2<f64> {
        let rows = 2 * self.t + 1;
        let mut out = Array2::zeros((batch.len() * rows, self.frame_width()));
        for (b, chunk) in batch.iter().enumerate() {
            let c = chunk.start + step;
            out.slice_mut(s![b * rows..(b + 1) * rows, ..])
                .assign(&self.clips[chunk.clip].joined.slice(s![c - self.t..=c + self.t, ..]));
        }
        out
    }

    /// Stack seen windows plus the one-hot center state per chunk.
    fn gather_lc(&self, batch: &[Chunk], step: usize) -> Array2<f64> {
        let rows = self.t + 1;
        let w = self.frame_width();
        let mut out = Array2::zeros((batch.len() * rows, w + 3));
        for (b, chunk) in batch.iter().enumerate() {
            let c = chunk.start + step;
            let clip = &self.clips[chunk.clip];
            out.slice_mut(s![b * rows..(b + 1) * rows, ..w])
                .assign(&clip.joined.slice(s![c - self.t..=c, ..]));
            let one_hot = clip.states[c].one_hot();
            for (i, v) in one_hot.iter().enumerate() {
                out.slice_mut(s![b * rows..(b + 1) * rows, w + i]).fill(*v);
            }
        }
        out
    }

    /// One row per chunk from the joined matrix, column range `cols`,
    /// at frame `start + step + shift`.
    fn gather_cols(
        &self,
        batch: &[Chunk],
        step: usize,
        shift: usize,
        cols: std::ops::Range<usize>,
    ) -> Array2<f64> {
        let mut out = Array2::zeros((batch.len(), cols.len()));
        for (b, chunk) in batch.iter().enumerate() {
            let c = chunk.start + step + shift;
            out.row_mut(b)
                .assign(&self.clips[chunk.clip].joined.slice(s![c, cols.clone()]));
        }
        out
    }
}

fn corpus_layout(corpus: &[MotionClip]) -> Result<FeatureLayout, SvaeError> {
    let first = corpus.first().ok_or(SvaeError::EmptyCorpus)?;
    let layout = FeatureLayout {
        joint_count: first.skeleton.joint_count(),
    };
    for clip in corpus {
        if clip.skeleton.joint_count() != layout.joint_count {
            return Err(SvaeError::ShapeMismatch {
                what: "corpus joint count",
                expected: format!("{}", layout.joint_count),
                got: format!("{} in clip {}", clip.skeleton.joint_count(), clip.name),
            });
        }
    }
    Ok(layout)
}

#[derive(Clone, Copy)]
enum StagePlan {
    Stage1 { include_kl: bool },
    Stage2 { align_only: bool },
}

struct EpochPlan {
    lr: f64,
    p: f64,
    beta: f64,
    stage: StagePlan,
}

/// Scalar outcome of one batch: (loss, recon, kl).
struct BatchValues {
    loss: f64,
    recon: f64,
    kl: f64,
}

fn run_batch(
    model: &SvaeModel,
    data: &ChunkSet,
    batch: &[Chunk],
    plan: &EpochPlan,
    rng: &mut ChaCha20Rng,
) -> (Tape, NodeId, BatchValues) {
    let mut tape = Tape::new();
    let latent = model.config.latent_dim;
    let pw = data.primary_width();
    let fw = data.frame_width();
    let inv_steps = 1.0 / data.steps as f64;

    let mut recon_sum: Option<NodeId> = None;
    let mut kl_sum: Option<NodeId> = None;
    let mut prev_pred: Option<NodeId> = None;

    for step in 0..data.steps {
        let full = tape.constant(data.gather_full(batch, step));
        let (mu_full, lv_full) = model.encode_full_nodes(&mut tape, full);

        let (z, kl_step, decode_this_step) = match plan.stage {
            StagePlan::Stage1 { .. } => {
                let eps = tape.constant(sample_eps(rng, batch.len(), latent));
                let z = reparameterize(&mut tape, mu_full, lv_full, eps);
                let kl = kl_standard_node(&mut tape, mu_full, lv_full);
                (z, kl, true)
            }
            StagePlan::Stage2 { align_only } => {
                let lc = tape.constant(data.gather_lc(batch, step));
                let (mu_lc, lv_lc, _) = model.encode_lc_nodes(&mut tape, lc);
                let kl = kl_between_node(&mut tape, mu_full, lv_full, mu_lc, lv_lc);
                let eps = tape.constant(sample_eps(rng, batch.len(), latent));
                let z = reparameterize(&mut tape, mu_lc, lv_lc, eps);
                (z, kl, !align_only)
            }
        };
        kl_sum = Some(match kl_sum {
            Some(acc) => tape.add(acc, kl_step),
            None => kl_step,
        });
        if !decode_this_step {
            continue;
        }

        let h_row = tape.constant(data.gather_cols(batch, step, 0, 0..pw));
        let gt_pos = tape.constant(data.gather_cols(batch, step, 0, pw..pw + 3));
        let rot_row = tape.constant(data.gather_cols(batch, step, 0, pw + 3..fw));
        let context = match prev_pred {
            None => tape.concat_cols(&[h_row, gt_pos, rot_row]),
            Some(prev) => {
                // Per-chunk coin: feed back the model's own (detached)
                // prediction with probability p, ground truth otherwise.
                let coins: Vec<f64> = (0..batch.len())
                    .map(|_| if rng.gen::<f64>() < plan.p { 1.0 } else { 0.0 })
                    .collect();
                let mask =
                    tape.constant(Array2::from_shape_vec((batch.len(), 1), coins.clone())
                        .expect("mask shape"));
                let inv = tape.constant(
                    Array2::from_shape_vec(
                        (batch.len(), 1),
                        coins.iter().map(|c| 1.0 - c).collect(),
                    )
                    .expect("mask shape"),
                );
                let fed = tape.detach(prev);
                let from_model = tape.rows_scale(fed, mask);
                let from_data = tape.rows_scale(gt_pos, inv);
                let mixed = tape.add(from_model, from_data);
                tape.concat_cols(&[h_row, mixed, rot_row])
            }
        };

        let (pred, _gates) = model.decode_nodes(&mut tape, z, context);
        let target = tape.constant(data.gather_cols(batch, step, 1, pw..pw + 3));
        let recon_step = recon_node(&mut tape, pred, target);
        recon_sum = Some(match recon_sum {
            Some(acc) => tape.add(acc, recon_step),
            None => recon_step,
        });
        prev_pred = Some(pred);
    }

    let kl_mean = tape.scale(kl_sum.expect("at least one step"), inv_steps);
    let (loss, recon_value) = match (plan.stage, recon_sum) {
        (StagePlan::Stage2 { align_only: true }, _) | (_, None) => (kl_mean, f64::NAN),
        (stage, Some(recon)) => {
            let recon_mean = tape.scale(recon, inv_steps);
            let include_kl = !matches!(stage, StagePlan::Stage1 { include_kl: false });
            let loss = if include_kl {
                let weighted = tape.scale(kl_mean, plan.beta);
                tape.add(recon_mean, weighted)
            } else {
                recon_mean
            };
            (loss, tape.scalar(recon_mean))
        }
    };
    let values = BatchValues {
        loss: tape.scalar(loss),
        recon: recon_value,
        kl: tape.scalar(kl_mean),
    };
    (tape, loss, values)
}

fn run_epoch(
    model: &mut SvaeModel,
    data: &ChunkSet,
    adam: &mut Adam,
    rng: &mut ChaCha20Rng,
    plan: &EpochPlan,
    stage: u8,
    epoch: usize,
) -> Result<(f64, f64, f64), SvaeError> {
    let mut order: Vec<usize> = (0..data.chunks.len()).collect();
    order.shuffle(rng);
    let cap = model.config.chunks_per_epoch;
    if cap > 0 && cap < order.len() {
        order.truncate(cap);
    }
    let batch_size = model.config.batch_size;
    let mut sums = (0.0, 0.0, 0.0);
    let mut weight = 0.0;
    for (bi, ids) in order.chunks(batch_size).enumerate() {
        let batch: Vec<Chunk> = ids.iter().map(|&i| data.chunks[i]).collect();
        let (tape, loss, values) = run_batch(model, data, &batch, plan, rng);
        if !values.loss.is_finite() {
            return Err(SvaeError::NonFiniteLoss {
                stage,
                epoch,
                batch: bi,
            });
        }
        let grads = tape.backward(loss, &model.params);
        adam.step(&mut model.params, &grads, plan.lr);
        let w = batch.len() as f64;
        sums.0 += values.loss * w;
        sums.1 += values.recon * w;
        sums.2 += values.kl * w;
        weight += w;
    }
    Ok((sums.1 / weight, sums.2 / weight, sums.0 / weight))
}

/// Stage 1: fit encoder and decoder on complete windows.
pub fn train_stage1(corpus: &[MotionClip], cfg: &SvaeConfig) -> Result<SvaeModel, SvaeError> {
    cfg.validate()?;
    let layout = corpus_layout(corpus)?;
    let mut model = SvaeModel::new(cfg.clone(), layout)?;
    let data = ChunkSet::build(corpus, cfg)?;
    let mut adam = Adam::new(&model.params, AdamConfig::default());
    let schedule = LrSchedule {
        lr_start: cfg.lr_start,
        lr_end: cfg.lr_end,
        decay_start_epoch: cfg.lr_decay_start_epoch,
        total_epochs: cfg.stage1_epochs,
    };
    let mut rng = sub_rng(cfg.seed, "svae/stage1");
    for epoch in 0..cfg.stage1_epochs {
        let plan = EpochPlan {
            lr: schedule.at(epoch),
            p: sched_sampling_p(epoch, cfg.sched_sampling_ramp_epochs),
            beta: cfg.beta,
            stage: StagePlan::Stage1 {
                include_kl: epoch >= cfg.recon_only_epochs,
            },
        };
        let (recon, kl, loss) = run_epoch(&mut model, &data, &mut adam, &mut rng, &plan, 1, epoch)?;
        model.log.push(TrainingRecord {
            stage: 1,
            epoch,
            lr: plan.lr,
            p: plan.p,
            recon,
            kl,
            loss,
        });
    }
    Ok(model)
}

/// Stage 2: freeze the full encoder and align the latent controller.
/// Scheduled sampling stays fully autoregressive (p = 1) here.
pub fn train_stage2(
    mut model: SvaeModel,
    corpus: &[MotionClip],
    cfg: &SvaeConfig,
) -> Result<SvaeModel, SvaeError> {
    cfg.validate()?;
    let arch_matches = {
        let m = &model.config;
        m.latent_dim == cfg.latent_dim
            && m.hidden_dim == cfg.hidden_dim
            && m.num_experts == cfg.num_experts
            && m.t == cfg.t
            && m.attention_heads == cfg.attention_heads
    };
    if !arch_matches {
        return Err(SvaeError::Config(
            "stage-2 config changes the architecture of the stage-1 model".into(),
        ));
    }
    model.config = cfg.clone();
    model.stage = TrainingStage::Stage2;
    model.params.freeze_prefix(ENCODER_PREFIX);
    let data = ChunkSet::build(corpus, cfg)?;
    let mut adam = Adam::new(&model.params, AdamConfig::default());
    let schedule = LrSchedule {
        lr_start: cfg.lr_start,
        lr_end: cfg.lr_end,
        decay_start_epoch: cfg.lr_decay_start_epoch,
        total_epochs: cfg.stage2_epochs,
    };
    let mut rng = sub_rng(cfg.seed, "svae/stage2");
    for epoch in 0..cfg.stage2_epochs {
        let plan = EpochPlan {
            lr: schedule.at(epoch),
            p: 1.0,
            beta: cfg.beta,
            stage: StagePlan::Stage2 {
                align_only: epoch < cfg.stage2_kl_only_epochs,
            },
        };
        let (recon, kl, loss) = run_epoch(&mut model, &data, &mut adam, &mut rng, &plan, 2, epoch)?;
        model.log.push(TrainingRecord {
            stage: 2,
            epoch,
            lr: plan.lr,
            p: plan.p,
            recon,
            kl,
            loss,
        });
    }
    Ok(model)
}
