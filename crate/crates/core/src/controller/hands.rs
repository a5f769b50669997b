//! Data-driven controller: the timing classifier gates autoregressive
//! trajectory generation.

use super::ControllerError;
use crate::dataio::clip::HandoverState;
use crate::svae::{generate_next, SvaeModel};
use crate::timing::{classify, TimingModel};
use nalgebra::Vector3;
use ndarray::{s, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// 6D encoding of the identity rotation (first two rotation-matrix columns).
const IDENTITY_6D: [f64; 6] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandsStatus {
    /// Accumulating the first second of history.
    Buffering,
    /// History full, classifier has not fired yet.
    Holding,
    /// Classifier fired; generating motion every tick.
    Generating,
    /// Within the stop distance; absorbing.
    Stopped,
}

impl HandsStatus {
    pub fn label(self) -> &'static str {
        match self {
            HandsStatus::Buffering => "buffering",
            HandsStatus::Holding => "holding",
            HandsStatus::Generating => "generating",
            HandsStatus::Stopped => "stopped",
        }
    }
}

/// One gating decision on fully buffered history: evaluate the classifier on
/// the most recent primary window; when it fires, generate the next
/// end-effector position, otherwise report the hold. Returns the proposed
/// position and whether a handover was detected.
pub fn hands_step(
    timing: &TimingModel,
    svae: &SvaeModel,
    h_history: ArrayView2<f64>,
    r_history: ArrayView2<f64>,
    scenario: HandoverState,
) -> Result<(Option<Vector3<f64>>, bool), ControllerError> {
    let needed = timing.config.seen_len().max(svae.config.seen_len());
    let got = h_history.nrows();
    if got < needed || r_history.nrows() < needed {
        return Err(ControllerError::InsufficientHistory {
            got: got.min(r_history.nrows()),
            needed,
        });
    }
    let timing_window = h_history.slice(s![got - timing.config.seen_len().., ..]);
    let likelihood = timing.predict_likelihood(timing_window)?;
    if !classify(likelihood)? {
        return Ok((None, false));
    }
    let seen = svae.config.seen_len();
    let h_window = h_history.slice(s![h_history.nrows() - seen.., ..]);
    let r_window = r_history.slice(s![r_history.nrows() - seen.., ..]);
    let next = generate_next(svae, h_window, r_window, scenario)?;
    Ok((Some(next), true))
}

/// Buffers history, holds the rest pose until the classifier fires, then
/// follows generated motion until within the stop distance of the palm.
/// Detection latches: once generation starts the classifier is not
/// consulted again.
pub struct HandsController<'a> {
    timing: &'a TimingModel,
    svae: &'a SvaeModel,
    scenario: HandoverState,
    stop_distance: f64,
    capacity: usize,
    h_hist: VecDeque<Vec<f64>>,
    r_hist: VecDeque<[f64; 9]>,
    status: HandsStatus,
}

impl<'a> HandsController<'a> {
    pub fn new(
        timing: &'a TimingModel,
        svae: &'a SvaeModel,
        scenario: HandoverState,
        stop_distance: f64,
    ) -> Result<Self, ControllerError> {
        if !(stop_distance > 0.0) {
            return Err(ControllerError::Config(
                "stop_distance must be positive".into(),
            ));
        }
        if timing.layout != svae.layout {
            return Err(ControllerError::Config(
                "timing and generator models disagree on the feature layout".into(),
            ));
        }
        Ok(HandsController {
            timing,
            svae,
            scenario,
            stop_distance,
            capacity: timing.config.seen_len().max(svae.config.seen_len()),
            h_hist: VecDeque::new(),
            r_hist: VecDeque::new(),
            status: HandsStatus::Buffering,
        })
    }

    pub fn status(&self) -> HandsStatus {
        self.status
    }

    fn window_arrays(&self) -> (Array2<f64>, Array2<f64>) {
        let w = self.h_hist[0].len();
        let mut h = Array2::zeros((self.h_hist.len(), w));
        for (i, row) in self.h_hist.iter().enumerate() {
            h.row_mut(i).assign(&ndarray::ArrayView1::from(&row[..]));
        }
        let mut r = Array2::zeros((self.r_hist.len(), 9));
        for (i, row) in self.r_hist.iter().enumerate() {
            r.row_mut(i).assign(&ndarray::ArrayView1::from(&row[..]));
        }
        (h, r)
    }

    /// One tick: record the observed frame and current end-effector, then
    /// hold, generate, or stop. Returns the next end-effector position, the
    /// status after the tick, and whether a handover is detected.
    pub fn step(
        &mut self,
        h_row: ArrayView1<f64>,
        user_hand: Vector3<f64>,
        ee: Vector3<f64>,
    ) -> Result<(Vector3<f64>, HandsStatus, bool), ControllerError> {
        let width = self.timing.layout.primary_width();
        if h_row.len() != width {
            return Err(ControllerError::ShapeMismatch {
                what: "h_row",
                expected: format!("{width}"),
                got: format!("{}", h_row.len()),
            });
        }
        self.h_hist.push_back(h_row.to_vec());
        let mut r_row = [0.0; 9];
        r_row[..3].copy_from_slice(&[ee.x, ee.y, ee.z]);
        r_row[3..].copy_from_slice(&IDENTITY_6D);
        self.r_hist.push_back(r_row);
        if self.h_hist.len() > self.capacity {
            self.h_hist.pop_front();
            self.r_hist.pop_front();
        }

        if self.status == HandsStatus::Stopped {
            return Ok((ee, self.status, true));
        }
        if self.h_hist.len() < self.capacity {
            return Ok((ee, HandsStatus::Buffering, false));
        }

        let (h, r) = self.window_arrays();
        let next = if self.status == HandsStatus::Generating {
            // Latched: keep generating without re-consulting the classifier.
            let seen = self.svae.config.seen_len();
            let h_win = h.slice(s![h.nrows() - seen.., ..]);
            let r_win = r.slice(s![r.nrows() - seen.., ..]);
            Some(generate_next(self.svae, h_win, r_win, self.scenario)?)
        } else {
            let (proposal, detected) =
                hands_step(self.timing, self.svae, h.view(), r.view(), self.scenario)?;
            if !detected {
                self.status = HandsStatus::Holding;
                return Ok((ee, self.status, false));
            }
            self.status = HandsStatus::Generating;
            proposal
        };

        if (ee - user_hand).norm() <= self.stop_distance {
            self.status = HandsStatus::Stopped;
            return Ok((ee, self.status, true));
        }
        let next = next.expect("generation path always proposes a position");
        if (next - user_hand).norm() <= self.stop_distance {
            self.status = HandsStatus::Stopped;
        }
        Ok((next, self.status, true))
    }
}
