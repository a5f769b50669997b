//! Training loop over center-frame-labeled windows.

use super::model::TimingModel;
use super::{TimingConfig, TimingError, BCE_EPSILON};
use crate::dataio::clip::{HandoverState, MotionClip};
use crate::dataio::window::{make_windows_strided, MotionWindow};
use crate::nn::{Adam, AdamConfig, Tape};
use crate::seeds::sub_rng;
use crate::svae::schedule::{lr_schedule, LrSchedule};
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// One optimization-log row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimingTrainingRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

fn window_label(window: &MotionWindow) -> f64 {
    if window.state == HandoverState::Idle {
        0.0
    } else {
        1.0
    }
}

fn collect_windows(
    corpus: &[MotionClip],
    t: usize,
    stride: usize,
) -> Result<Vec<MotionWindow>, TimingError> {
    let mut windows = Vec::new();
    for clip in corpus {
        if clip.len() < 2 * t + 2 {
            continue;
        }
        windows.extend(make_windows_strided(clip, t, stride)?);
    }
    Ok(windows)
}

fn stack_batch(
    windows: &[MotionWindow],
    indices: &[usize],
    input_dim: usize,
) -> (Array2<f64>, Array2<f64>) {
    let b = indices.len();
    let mut input = Array2::zeros((b, input_dim));
    let mut labels = Array2::zeros((b, 1));
    for (row, &i) in indices.iter().enumerate() {
        let flat = TimingModel::flatten_window(windows[i].h_seen());
        for (col, v) in flat.into_iter().enumerate() {
            input[[row, col]] = v;
        }
        labels[[row, 0]] = window_label(&windows[i]);
    }
    (input, labels)
}

/// Train the classifier with mean binary cross-entropy. Windows are labeled
/// handover iff their center frame lies in a handover segment. With
/// `balance_classes`, positive terms are weighted by the negative/positive
/// window ratio.
pub fn train_timing(corpus: &[MotionClip], cfg: &TimingConfig) -> Result<TimingModel, TimingError> {
    cfg.validate()?;
    let windows = collect_windows(corpus, cfg.t, cfg.window_stride)?;
    if windows.is_empty() {
        return Err(TimingError::EmptyCorpus);
    }
    let layout = windows[0].clip_features().layout;
    let mut model = TimingModel::new(cfg.clone(), layout)?;
    let input_dim = model.input_dim();
    let mut adam = Adam::new(&model.params, AdamConfig::default());
    let mut rng = sub_rng(cfg.seed, "timing/train");
    let schedule = LrSchedule {
        lr_start: cfg.lr_start,
        lr_end: cfg.lr_end,
        decay_start_epoch: cfg.lr_decay_start_epoch,
        total_epochs: cfg.epochs,
    };

    let positive_weight = if cfg.balance_classes {
        let positives = windows.iter().filter(|w| window_label(w) > 0.5).count();
        let negatives = windows.len() - positives;
        if positives == 0 || negatives == 0 {
            1.0
        } else {
            negatives as f64 / positives as f64
        }
    } else {
        1.0
    };

    let mut order: Vec<usize> = (0..windows.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, &schedule);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (input, labels) = stack_batch(&windows, batch, input_dim);

            let mut tape = Tape::new();
            let x = tape.constant(input);
            let y = tape.constant(labels);
            let p_raw = model.forward_nodes(&mut tape, x);
            let p = tape.clamp(p_raw, BCE_EPSILON, 1.0 - BCE_EPSILON);
            let ln_p = tape.ln(p);
            let pos_term = tape.mul(y, ln_p);
            let pos_term = tape.scale(pos_term, positive_weight);
            let neg_p = tape.scale(p, -1.0);
            let one_minus_p = tape.add_scalar(neg_p, 1.0);
            let ln_q = tape.ln(one_minus_p);
            let neg_y = tape.scale(y, -1.0);
            let one_minus_y = tape.add_scalar(neg_y, 1.0);
            let neg_term = tape.mul(one_minus_y, ln_q);
            let sum = tape.add(pos_term, neg_term);
            let mean = tape.mean_all(sum);
            let loss = tape.scale(mean, -1.0);

            let loss_v = tape.scalar(loss);
            if !loss_v.is_finite() {
                return Err(TimingError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            let (grads, _) = tape.backward_watched(loss, &model.params, &[]);
            adam.step(&mut model.params, &grads, lr);

            loss_sum += loss_v * batch.len() as f64;
            count += batch.len();
        }
        model.log.push(TimingTrainingRecord {
            epoch,
            lr,
            loss: loss_sum / count as f64,
        });
    }
    Ok(model)
}
