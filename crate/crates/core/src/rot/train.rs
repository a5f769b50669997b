//! Training: segment labeling, example assembly and the optimization loop.

use super::model::RotModel;
use super::{rot_ground_truth, RegionOfTransfer, RotConfig, RotError, PALM_JOINT};
use crate::dataio::annotations::{segment_handovers, HandoverSegment};
use crate::dataio::clip::{HandoverState, MotionClip};
use crate::dataio::features::{ClipFeatures, FeatureLayout};
use crate::dataio::window::{make_windows_strided, MotionWindow};
use crate::nn::{Adam, AdamConfig, Tape};
use crate::seeds::sub_rng;
use crate::svae::loss::{kl_standard_node, reparameterize, sample_eps};
use crate::svae::schedule::{lr_schedule, LrSchedule};
use nalgebra::Vector3;
use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// One optimization-log row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RotTrainingRecord {
    pub epoch: usize,
    pub lr: f64,
    pub recon: f64,
    pub kl: f64,
    pub loss: f64,
}

/// A past window paired with the RoT of its enclosing segment.
#[derive(Debug, Clone)]
pub struct RotExample {
    pub window: MotionWindow,
    pub target: RegionOfTransfer,
}

fn palm_position(features: &ClipFeatures, palm: usize, frame: usize) -> Vector3<f64> {
    let cols = features.layout.joint_position_cols(palm);
    Vector3::new(
        features.primary[[frame, cols.start]],
        features.primary[[frame, cols.start + 1]],
        features.primary[[frame, cols.start + 2]],
    )
}

/// Ground-truth RoT per handover segment of a clip: the frame with minimal
/// palm-to-palm distance is the transfer instant (ties resolve to the
/// earliest frame), and its RoT labels the whole segment.
pub fn segment_rot_targets(
    clip: &MotionClip,
) -> Result<Vec<(HandoverSegment, RegionOfTransfer)>, RotError> {
    let palm = clip
        .skeleton
        .joint_index(PALM_JOINT)
        .ok_or_else(|| RotError::MissingPalmJoint(PALM_JOINT.into()))?;
    let features = ClipFeatures::compute(clip)?;
    segment_handovers(clip)?
        .into_iter()
        .map(|seg| {
            let transfer = (seg.start..=seg.end)
                .min_by(|&a, &b| {
                    let da = (palm_position(&features, palm, a) - features.ee_relative(a)).norm();
                    let db = (palm_position(&features, palm, b) - features.ee_relative(b)).norm();
                    da.partial_cmp(&db).expect("finite distances")
                })
                .expect("segments are non-empty");
            let rot = rot_ground_truth(
                palm_position(&features, palm, transfer),
                features.ee_relative(transfer),
                seg.kind,
            )?;
            Ok((seg, rot))
        })
        .collect()
}

/// Pair every handover window of the corpus with its segment's RoT.
pub fn build_examples(
    corpus: &[MotionClip],
    t: usize,
    stride: usize,
) -> Result<Vec<RotExample>, RotError> {
    let mut examples = Vec::new();
    for clip in corpus {
        if clip.len() < 2 * t + 2 {
            continue;
        }
        let targets = segment_rot_targets(clip)?;
        for window in make_windows_strided(clip, t, stride)? {
            if window.state == HandoverState::Idle {
                continue;
            }
            let target = targets
                .iter()
                .find(|(seg, _)| seg.start <= window.center && window.center <= seg.end)
                .map(|(_, rot)| *rot)
                .expect("non-idle window lies in some segment");
            examples.push(RotExample { window, target });
        }
    }
    Ok(examples)
}

/// Stack a batch for the encoder: joined past windows with the 6-DoF target
/// appended to every row. Also returns the decoder contexts and targets.
fn stack_batch(
    examples: &[RotExample],
    indices: &[usize],
    layout: &FeatureLayout,
    seen: usize,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let frame_w = layout.frame_width();
    let b = indices.len();
    let mut enc = Array2::zeros((b * seen, frame_w + 6));
    let mut ctx = Array2::zeros((b, frame_w));
    let mut target = Array2::zeros((b, 6));
    for (row, &i) in indices.iter().enumerate() {
        let ex = &examples[i];
        let joined = RotModel::join_past(ex.window.h_seen(), ex.window.r_seen());
        let vec6 = ex.target.as_vec6();
        let base = row * seen;
        enc.slice_mut(s![base..base + seen, ..frame_w])
            .assign(&joined);
        for (k, v) in vec6.iter().enumerate() {
            enc.slice_mut(s![base..base + seen, frame_w + k]).fill(*v);
        }
        ctx.row_mut(row).assign(&joined.row(seen - 1));
        for (k, v) in vec6.iter().enumerate() {
            target[[row, k]] = *v;
        }
    }
    (enc, ctx, target)
}

/// Train the CVAE: reconstruction is half the mean squared 6-DoF error and
/// the KL term pulls the posterior toward the unit Gaussian prior.
pub fn train_rot(corpus: &[MotionClip], cfg: &RotConfig) -> Result<RotModel, RotError> {
    cfg.validate()?;
    let examples = build_examples(corpus, cfg.t, cfg.window_stride)?;
    if examples.is_empty() {
        return Err(RotError::EmptyCorpus);
    }
    let layout = examples[0].window.clip_features().layout;
    let mut model = RotModel::new(cfg.clone(), layout)?;
    let mut adam = Adam::new(&model.params, AdamConfig::default());
    let mut rng = sub_rng(cfg.seed, "rot/train");
    let schedule = LrSchedule {
        lr_start: cfg.lr_start,
        lr_end: cfg.lr_end,
        decay_start_epoch: cfg.lr_decay_start_epoch,
        total_epochs: cfg.epochs,
    };
    let seen = cfg.seen_len();

    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, &schedule);
        order.shuffle(&mut rng);
        let mut recon_sum = 0.0;
        let mut kl_sum = 0.0;
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (enc, ctx, target) = stack_batch(&examples, batch, &layout, seen);
            let eps = sample_eps(&mut rng, batch.len(), cfg.latent_dim);

            let mut tape = Tape::new();
            let enc_in = tape.constant(enc);
            let ctx_in = tape.constant(ctx);
            let target_in = tape.constant(target);
            let (mu, lv) = model.encode_nodes(&mut tape, enc_in);
            let eps_in = tape.constant(eps);
            let z = reparameterize(&mut tape, mu, lv, eps_in);
            let pred = model.decode_nodes(&mut tape, z, ctx_in);

            let diff = tape.sub(pred, target_in);
            let sq = tape.square(diff);
            let per_row = tape.sum_cols(sq);
            let mean_sq = tape.mean_all(per_row);
            let recon = tape.scale(mean_sq, 0.5);
            let kl = kl_standard_node(&mut tape, mu, lv);
            let weighted_kl = tape.scale(kl, cfg.beta);
            let loss = tape.add(recon, weighted_kl);

            let loss_v = tape.scalar(loss);
            let recon_v = tape.scalar(recon);
            let kl_v = tape.scalar(kl);
            if !loss_v.is_finite() {
                return Err(RotError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            let (grads, _) = tape.backward_watched(loss, &model.params, &[]);
            adam.step(&mut model.params, &grads, lr);

            recon_sum += recon_v * batch.len() as f64;
            kl_sum += kl_v * batch.len() as f64;
            loss_sum += loss_v * batch.len() as f64;
            count += batch.len();
        }
        model.log.push(RotTrainingRecord {
            epoch,
            lr,
            recon: recon_sum / count as f64,
            kl: kl_sum / count as f64,
            loss: loss_sum / count as f64,
        });
    }
    Ok(model)
}
