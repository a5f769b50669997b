//! The classifier network: three fully-connected layers and a sigmoid.

use super::{TimingConfig, TimingError};
use crate::dataio::features::FeatureLayout;
use crate::nn::{Mlp, NodeId, ParamSet, Tape};
use crate::seeds::sub_rng;
use ndarray::{Array2, ArrayView2};

/// Binary handover classifier over flattened primary-motion windows.
pub struct TimingModel {
    pub config: TimingConfig,
    pub layout: FeatureLayout,
    pub params: ParamSet,
    pub log: Vec<super::TimingTrainingRecord>,
    net: Mlp,
}

impl TimingModel {
    pub fn new(config: TimingConfig, layout: FeatureLayout) -> Result<Self, TimingError> {
        config.validate()?;
        let mut rng = sub_rng(config.seed, "timing/init");
        let mut params = ParamSet::new();
        let input = config.seen_len() * layout.primary_width();
        let net = Mlp::new(
            &mut params,
            "net",
            &[input, config.hidden_dim, config.hidden_dim, 1],
            &mut rng,
        );
        Ok(TimingModel {
            config,
            layout,
            params,
            log: Vec::new(),
            net,
        })
    }

    /// Network input width.
    pub fn input_dim(&self) -> usize {
        self.config.seen_len() * self.layout.primary_width()
    }

    /// Sigmoid likelihoods for a batch of flattened windows (B, input_dim).
    pub(crate) fn forward_nodes(&self, tape: &mut Tape, input: NodeId) -> NodeId {
        let logits = self.net.apply(&self.params, tape, input);
        tape.sigmoid(logits)
    }

    /// Flatten a (t+1, primary_width) window row-major into one input row.
    pub(crate) fn flatten_window(h_past: ArrayView2<f64>) -> Vec<f64> {
        h_past.iter().copied().collect()
    }

    /// Likelihood that a handover is in progress given the primary user's
    /// past t+1 frames. Deterministic.
    pub fn predict_likelihood(&self, h_past: ArrayView2<f64>) -> Result<f64, TimingError> {
        let rows = self.config.seen_len();
        let cols = self.layout.primary_width();
        if h_past.dim() != (rows, cols) {
            return Err(TimingError::ShapeMismatch {
                what: "h_past",
                expected: format!("{rows}x{cols}"),
                got: format!("{}x{}", h_past.nrows(), h_past.ncols()),
            });
        }
        let flat = Array2::from_shape_vec((1, rows * cols), Self::flatten_window(h_past))
            .expect("row-major flatten matches the window size");
        let mut tape = Tape::new();
        let input = tape.constant(flat);
        let out = self.forward_nodes(&mut tape, input);
        Ok(tape.value(out)[[0, 0]])
    }
}
