//! Inference: single-step generation and autoregressive rollout.

use super::model::SvaeModel;
use super::SvaeError;
use crate::dataio::clip::HandoverState;
use nalgebra::Vector3;
use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

/// Deterministic next-position generation: the latent controller's mean
/// latent decoded against the current context.
pub fn generate_next(
    model: &SvaeModel,
    h_seen: ArrayView2<f64>,
    r_seen: ArrayView2<f64>,
    state: HandoverState,
) -> Result<Vector3<f64>, SvaeError> {
    let dist = model.encode_lc(h_seen, r_seen, state)?;
    model.decode(&dist.mean(), h_seen, r_seen)
}

/// Stochastic variant: the latent is a reparameterized draw.
pub fn sample_next<R: Rng>(
    model: &SvaeModel,
    h_seen: ArrayView2<f64>,
    r_seen: ArrayView2<f64>,
    state: HandoverState,
    rng: &mut R,
) -> Result<Vector3<f64>, SvaeError> {
    let dist = model.encode_lc(h_seen, r_seen, state)?;
    model.decode(&dist.sample(rng), h_seen, r_seen)
}

/// Rollout result with the robot window used at every step, for
/// instrumentation.
#[derive(Debug, Clone)]
pub struct RolloutTrace {
    pub positions: Vec<Vector3<f64>>,
    /// The (T+1, 9) robot window consumed at each step.
    pub windows: Vec<Array2<f64>>,
}

/// Autoregressive rollout: each generated position is appended to the robot
/// window (oldest frame dropped) and the EE rotation features are carried
/// forward unchanged from the last observed frame.
///
/// `h_stream` must hold at least `steps + T` frames of primary features;
/// step s consumes rows [s, s+T]. `states` supplies the handover state per
/// step.
pub fn rollout(
    model: &SvaeModel,
    h_stream: ArrayView2<f64>,
    r_init_window: ArrayView2<f64>,
    steps: usize,
    states: &[HandoverState],
) -> Result<Vec<Vector3<f64>>, SvaeError> {
    rollout_traced(model, h_stream, r_init_window, steps, states).map(|t| t.positions)
}

/// As [`rollout`], returning the per-step robot windows as well.
pub fn rollout_traced(
    model: &SvaeModel,
    h_stream: ArrayView2<f64>,
    r_init_window: ArrayView2<f64>,
    steps: usize,
    states: &[HandoverState],
) -> Result<RolloutTrace, SvaeError> {
    let t = model.config.t;
    let needed = steps + t + 1;
    if h_stream.nrows() < needed {
        return Err(SvaeError::StreamTooShort {
            steps,
            needed,
            got: h_stream.nrows(),
        });
    }
    if states.len() < steps {
        return Err(SvaeError::StreamTooShort {
            steps,
            needed: steps,
            got: states.len(),
        });
    }
    if r_init_window.dim() != (t + 1, 9) {
        return Err(SvaeError::ShapeMismatch {
            what: "r_init_window",
            expected: format!("{}x9", t + 1),
            got: format!("{}x{}", r_init_window.nrows(), r_init_window.ncols()),
        });
    }
    let mut window = r_init_window.to_owned();
    let mut trace = RolloutTrace {
        positions: Vec::with_capacity(steps),
        windows: Vec::with_capacity(steps),
    };
    for step in 0..steps {
        let h_seen = h_stream.slice(s![step..step + t + 1, ..]);
        trace.windows.push(window.clone());
        let next = generate_next(model, h_seen, window.view(), states[step])?;
        let rotation = window.row(t).slice(s![3..9]).to_owned();
        for row in 0..t {
            let shifted = window.row(row + 1).to_owned();
            window.row_mut(row).assign(&shifted);
        }
        window[(t, 0)] = next.x;
        window[(t, 1)] = next.y;
        window[(t, 2)] = next.z;
        window.row_mut(t).slice_mut(s![3..9]).assign(&rotation);
        trace.positions.push(next);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::clip::{Activity, Frame, FrameAnnotation, MotionClip};
    use crate::dataio::features::ClipFeatures;
    use crate::kinematics::{synthetic_skeleton, Pose};
    use crate::seeds::sub_rng;
    use crate::svae::train::{tests::quick_config, train_stage1, train_stage2};
    use crate::svae::SvaeConfig;
    use nalgebra::Matrix3;

    /// Clips with a constant EE position (per clip) so a trained model's
    /// rollout should hold still.
    fn constant_ee_corpus() -> Vec<MotionClip> {
        let positions = [
            Vector3::new(0.1, 0.0, 0.2),
            Vector3::new(-0.1, 0.15, 0.3),
            Vector3::new(0.2, -0.1, 0.1),
        ];
        positions
            .iter()
            .enumerate()
            .map(|(k, ee)| {
                let skeleton = synthetic_skeleton();
                let frames: Vec<Frame> = (0..40)
                    .map(|i| {
                        let mut pose =
                            Pose::rest(&skeleton, Vector3::zeros(), Matrix3::identity());
                        pose.joint_angles[1] = vec![0.2 * (i as f64 * 0.3).sin(), 0.0, 0.0];
                        Frame {
                            pose,
                            ee_position: *ee,
                            ee_rotation: Matrix3::identity(),
                        }
                    })
                    .collect();
                MotionClip {
                    name: format!("const{k}"),
                    activity: Activity::MountMicrophone,
                    pair_id: k as u32,
                    fps: 25.0,
                    skeleton,
                    frames,
                    annotations: vec![FrameAnnotation::idle(); 40],
                }
            })
            .collect()
    }

    fn trained_model() -> &'static (crate::svae::SvaeModel, Vec<MotionClip>) {
        static MODEL: std::sync::OnceLock<(crate::svae::SvaeModel, Vec<MotionClip>)> =
            std::sync::OnceLock::new();
        MODEL.get_or_init(|| {
            let corpus = constant_ee_corpus();
            let cfg = SvaeConfig {
                stage1_epochs: 160,
                stage2_epochs: 40,
                stage2_kl_only_epochs: 10,
                lr_decay_start_epoch: 80,
                ..quick_config()
            };
            let model = train_stage1(&corpus, &cfg).unwrap();
            let model = train_stage2(model, &corpus, &cfg).unwrap();
            (model, corpus)
        })
    }

    #[test]
    fn zero_steps_yield_empty_trajectory() {
        let (model, corpus) = trained_model();
        let features = ClipFeatures::compute(&corpus[0]).unwrap();
        let t = model.config.t;
        let h = features.primary.slice(s![..t + 1, ..]);
        let r = features.robot.slice(s![..t + 1, ..]);
        let out = rollout(model, h, r, 0, &[]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn short_stream_is_rejected() {
        let (model, corpus) = trained_model();
        let features = ClipFeatures::compute(&corpus[0]).unwrap();
        let t = model.config.t;
        let h = features.primary.slice(s![..t + 2, ..]);
        let r = features.robot.slice(s![..t + 1, ..]);
        let states = vec![HandoverState::Idle; 10];
        assert!(matches!(
            rollout(model, h, r, 10, &states),
            Err(SvaeError::StreamTooShort { .. })
        ));
    }

    #[test]
    fn trained_copy_model_holds_position_over_25_steps() {
        let (model, corpus) = trained_model();
        let features = ClipFeatures::compute(&corpus[1]).unwrap();
        let t = model.config.t;
        let steps = 25;
        let h = features.primary.slice(s![..steps + t + 1, ..]);
        let r = features.robot.slice(s![..t + 1, ..]);
        let states = vec![HandoverState::Idle; steps];
        let target = features.ee_relative(t);
        let out = rollout(model, h, r, steps, &states).unwrap();
        for (i, p) in out.iter().enumerate() {
            assert!(
                (p - target).norm() < 3e-2,
                "step {i}: drifted to {p:?} from {target:?}"
            );
        }
    }

    #[test]
    fn rollout_window_contains_previously_generated_positions() {
        let (model, corpus) = trained_model();
        let features = ClipFeatures::compute(&corpus[2]).unwrap();
        let t = model.config.t;
        let steps = 12;
        let h = features.primary.slice(s![..steps + t + 1, ..]);
        let r = features.robot.slice(s![..t + 1, ..]);
        let states = vec![HandoverState::Idle; steps];
        let trace = rollout_traced(model, h, r, steps, &states).unwrap();
        assert_eq!(trace.windows.len(), steps);
        for s in 1..steps {
            // The freshest row of this step's window is last step's output.
            let prev = trace.positions[s - 1];
            let w = &trace.windows[s];
            assert_eq!(w[(t, 0)], prev.x);
            assert_eq!(w[(t, 1)], prev.y);
            assert_eq!(w[(t, 2)], prev.z);
            // Older rows shift by exactly one frame per step.
            for row in 0..t {
                assert_eq!(
                    trace.windows[s].row(row),
                    trace.windows[s - 1].row(row + 1)
                );
            }
        }
    }

    #[test]
    fn deterministic_generation_and_seeded_sampling() {
        let (model, corpus) = trained_model();
        let features = ClipFeatures::compute(&corpus[0]).unwrap();
        let t = model.config.t;
        let h = features.primary.slice(s![..t + 1, ..]);
        let r = features.robot.slice(s![..t + 1, ..]);
        let a = generate_next(model, h, r, HandoverState::Idle).unwrap();
        let b = generate_next(model, h, r, HandoverState::Idle).unwrap();
        assert_eq!(a, b);
        let mut rng1 = sub_rng(3, "rollout/test");
        let mut rng2 = sub_rng(3, "rollout/test");
        let s1 = sample_next(model, h, r, HandoverState::Idle, &mut rng1).unwrap();
        let s2 = sample_next(model, h, r, HandoverState::Idle, &mut rng2).unwrap();
        assert_eq!(s1, s2);
        // Different draws move the output.
        let s3 = sample_next(model, h, r, HandoverState::Idle, &mut rng1).unwrap();
        assert_ne!(s1, s3);
    }
}
