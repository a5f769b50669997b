//! Deterministic synthetic handover corpus.
//!
//! Each clip scripts a primary user performing one of the 13 activities with
//! oscillatory right-arm motion while a hip-mounted robot end-effector rests
//! 0.25 m to the user's right. Handovers alternate between handing over and
//! taking back: the user shows a reach cue shortly before the segment starts,
//! the end-effector travels on a minimum-jerk path from rest to a sampled
//! transfer point and back, and annotations mark the segment frames. The
//! end-effector is generated in canonical hip coordinates (x front, y up,
//! z right) and mounted on the hip yaw frame, so heading normalization
//! recovers the clean scripted path exactly.
//!
//! Activities differ along three parameters: vertical zone (torso or head),
//! proximity (on-body or mid-air) and range of motion (small, medium,
//! large), which drive posture bases, oscillation amplitude and where
//! transfer points are sampled.

use crate::dataio::clip::{
    Activity, Frame, FrameAnnotation, HandoverState, MotionClip, Possession,
};
use crate::dataio::minjerk::min_jerk_position;
use crate::dataio::split::Corpus;
use crate::dataio::DataError;
use crate::kinematics::{rot_x, rot_y, synthetic_skeleton, Pose, Skeleton};
use crate::seeds::sub_rng;
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::{FRAC_PI_2, TAU};

/// Handover duration distribution (seconds).
pub const DURATION_MEAN: f64 = 2.244;
pub const DURATION_STD: f64 = 0.854;
pub const DURATION_MIN: f64 = 0.8;
pub const DURATION_MAX: f64 = 6.0;

/// Transfer-envelope extents in canonical hip coordinates (meters).
pub const ROT_FRONT_MAX: f64 = 0.5;
pub const ROT_UP_MAX: f64 = 0.8;
pub const ROT_RIGHT_MAX: f64 = 0.45;

const CUE_SECONDS: f64 = 0.6;
const TAIL_SECONDS: f64 = 1.2;

/// Robot end-effector resting point in canonical hip coordinates: level with
/// the hip, 0.25 m to the right.
pub fn ee_rest() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, 0.25)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerticalZone {
    Torso,
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proximity {
    OnBody,
    MidAir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeOfMotion {
    Small,
    Medium,
    Large,
}

/// Position of an activity in the vertical x proximity x range grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivityParams {
    pub vertical: VerticalZone,
    pub proximity: Proximity,
    pub range: RangeOfMotion,
}

/// Grid coordinates of each manual activity; the neutral pose has none.
pub fn activity_params(activity: Activity) -> Option<ActivityParams> {
    use Activity::*;
    use Proximity::*;
    use RangeOfMotion::*;
    use VerticalZone::*;
    let p = |vertical, proximity, range| {
        Some(ActivityParams {
            vertical,
            proximity,
            range,
        })
    };
    match activity {
        MountMicrophone => p(Torso, OnBody, Small),
        SunscreenFace => p(Head, OnBody, Small),
        LotionChest => p(Torso, OnBody, Medium),
        ShampooHair => p(Head, OnBody, Medium),
        WashTorso => p(Torso, OnBody, Large),
        BlowDryHair => p(Head, OnBody, Large),
        StraightenPictureLow => p(Torso, MidAir, Small),
        StraightenPictureHigh => p(Head, MidAir, Small),
        HammerNail => p(Torso, MidAir, Medium),
        CleanWindow => p(Head, MidAir, Medium),
        PaintWallLow => p(Torso, MidAir, Large),
        PaintWallHigh => p(Head, MidAir, Large),
        NeutralPose => None,
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub clips_per_activity: usize,
    pub handovers_per_clip: usize,
    /// Number of participant pairs clips are attributed to, round-robin.
    pub n_pairs: u32,
    pub fps: f64,
    /// Standard deviation of the per-frame joint-angle jitter (radians).
    pub noise: f64,
    pub activities: Vec<Activity>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            clips_per_activity: 2,
            handovers_per_clip: 3,
            n_pairs: 6,
            fps: 25.0,
            noise: 0.01,
            activities: Activity::ALL.to_vec(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.clips_per_activity == 0 {
            return Err(DataError::Config("clips_per_activity must be >= 1".into()));
        }
        if self.handovers_per_clip == 0 {
            return Err(DataError::Config("handovers_per_clip must be >= 1".into()));
        }
        if self.n_pairs == 0 {
            return Err(DataError::Config("n_pairs must be >= 1".into()));
        }
        if self.fps <= 0.0 {
            return Err(DataError::Config("fps must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(DataError::Config("noise must be finite and >= 0".into()));
        }
        if self.activities.is_empty() {
            return Err(DataError::Config("activities list is empty".into()));
        }
        Ok(())
    }
}

/// One handover duration in seconds, Normal(2.244, 0.854^2) clamped to
/// [0.8, 6].
pub fn sample_handover_duration(rng: &mut ChaCha20Rng) -> f64 {
    let normal = Normal::new(DURATION_MEAN, DURATION_STD).expect("valid duration distribution");
    normal.sample(rng).clamp(DURATION_MIN, DURATION_MAX)
}

/// Sample a transfer point in canonical hip coordinates inside the envelope
/// octant, biased by the activity parameters (head-zone activities sit
/// higher, mid-air activities further out).
pub fn sample_rot_target(rng: &mut ChaCha20Rng, params: Option<ActivityParams>) -> Vector3<f64> {
    let (front_range, up_range) = match params {
        Some(p) => {
            let front = match p.proximity {
                Proximity::OnBody => (0.08, 0.30),
                Proximity::MidAir => (0.22, 0.50),
            };
            let up = match p.vertical {
                VerticalZone::Torso => (0.02, 0.45),
                VerticalZone::Head => (0.30, 0.78),
            };
            (front, up)
        }
        None => ((0.08, 0.40), (0.02, 0.60)),
    };
    for _ in 0..200 {
        let f = rng.gen_range(front_range.0..front_range.1);
        let u = rng.gen_range(up_range.0..up_range.1);
        let r = rng.gen_range(0.05..ROT_RIGHT_MAX);
        let radial = (f / ROT_FRONT_MAX).powi(2)
            + (u / ROT_UP_MAX).powi(2)
            + (r / ROT_RIGHT_MAX).powi(2);
        if radial <= 1.0 {
            return Vector3::new(f, u, r);
        }
    }
    // Pathological ranges only; land on a safe interior point.
    Vector3::new(
        0.5 * (front_range.0 + front_range.1) * 0.6,
        0.5 * (up_range.0 + up_range.1) * 0.6,
        0.15,
    )
}

struct HandoverPlan {
    cue_start: usize,
    seg_start: usize,
    out_end: usize,
    hold_end: usize,
    seg_end: usize,
    kind: HandoverState,
    rot: Vector3<f64>,
}

struct ArmPosture {
    shoulder: [f64; 3],
    elbow: [f64; 3],
    wrist: [f64; 3],
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Reach posture pointing the right arm at a transfer point; a smooth
/// injective map so the pose encodes where the handover will happen.
fn reach_posture(rot: &Vector3<f64>) -> ArmPosture {
    let front = rot.x / ROT_FRONT_MAX;
    let up = rot.y / ROT_UP_MAX;
    let right = rot.z / ROT_RIGHT_MAX;
    ArmPosture {
        shoulder: [-(0.2 + 0.9 * up), 0.4 * right, 0.5 + 0.8 * front],
        elbow: [-0.2, 0.0, (0.9 - 1.2 * front).max(0.05)],
        wrist: [0.1 * up, 0.0, 0.0],
    }
}

struct ActivityScript {
    base: ArmPosture,
    amplitude: f64,
    frequency: f64,
    head_amp: f64,
    phases: [f64; 6],
}

impl ActivityScript {
    fn new(params: Option<ActivityParams>, rng: &mut ChaCha20Rng) -> Self {
        let mut phases = [0.0; 6];
        for p in phases.iter_mut() {
            *p = rng.gen_range(0.0..TAU);
        }
        match params {
            Some(p) => {
                let shoulder_raise = match p.vertical {
                    VerticalZone::Torso => -0.5,
                    VerticalZone::Head => -1.1,
                };
                let (swing, elbow_bend) = match p.proximity {
                    Proximity::OnBody => (0.25, 1.0),
                    Proximity::MidAir => (0.7, 0.4),
                };
                let (amplitude, frequency) = match p.range {
                    RangeOfMotion::Small => (0.12, 1.1),
                    RangeOfMotion::Medium => (0.30, 0.8),
                    RangeOfMotion::Large => (0.55, 0.55),
                };
                let head_amp = match p.vertical {
                    VerticalZone::Torso => 0.02,
                    VerticalZone::Head => 0.10,
                };
                ActivityScript {
                    base: ArmPosture {
                        shoulder: [shoulder_raise, 0.0, swing],
                        elbow: [-0.1, 0.0, elbow_bend],
                        wrist: [0.0, 0.0, 0.0],
                    },
                    amplitude,
                    frequency,
                    head_amp,
                    phases,
                }
            }
            None => ActivityScript {
                base: ArmPosture {
                    shoulder: [-0.05, 0.0, 0.05],
                    elbow: [0.0, 0.0, 0.1],
                    wrist: [0.0, 0.0, 0.0],
                },
                amplitude: 0.03,
                frequency: 0.25,
                head_amp: 0.01,
                phases,
            },
        }
    }

    fn posture(&self, time: f64) -> ArmPosture {
        let w = TAU * self.frequency;
        let a = self.amplitude;
        let p = &self.phases;
        ArmPosture {
            shoulder: [
                self.base.shoulder[0] + a * (w * time + p[0]).sin(),
                self.base.shoulder[1] + 0.1 * a * (0.5 * w * time + p[1]).sin(),
                self.base.shoulder[2] + 0.4 * a * (w * time + p[2]).sin(),
            ],
            elbow: [
                self.base.elbow[0],
                self.base.elbow[1],
                self.base.elbow[2] + 0.6 * a * (w * time + p[3]).sin(),
            ],
            wrist: [
                self.base.wrist[0] + 0.15 * a * (1.7 * w * time + p[4]).sin(),
                0.0,
                0.0,
            ],
        }
    }
}

fn set_joint(
    pose: &mut Pose,
    j: usize,
    angles: &[f64; 3],
    noise: Option<&Normal<f64>>,
    rng: &mut ChaCha20Rng,
) {
    // dof order is (z, x, y) on every synthetic joint.
    pose.joint_angles[j] = angles
        .iter()
        .map(|a| a + noise.map_or(0.0, |d| d.sample(rng)))
        .collect();
}

fn blend_posture(a: &ArmPosture, b: &ArmPosture, t: f64) -> ArmPosture {
    let mix = |x: &[f64; 3], y: &[f64; 3]| {
        [
            lerp(x[0], y[0], t),
            lerp(x[1], y[1], t),
            lerp(x[2], y[2], t),
        ]
    };
    ArmPosture {
        shoulder: mix(&a.shoulder, &b.shoulder),
        elbow: mix(&a.elbow, &b.elbow),
        wrist: mix(&a.wrist, &b.wrist),
    }
}

struct JointIds {
    spine: usize,
    head: usize,
    left_shoulder: usize,
    left_elbow: usize,
    right_shoulder: usize,
    right_elbow: usize,
    right_wrist: usize,
}

impl JointIds {
    fn resolve(skeleton: &Skeleton) -> Self {
        let idx = |name: &str| skeleton.joint_index(name).expect("synthetic joint");
        JointIds {
            spine: idx("spine"),
            head: idx("head"),
            left_shoulder: idx("left_shoulder"),
            left_elbow: idx("left_elbow"),
            right_shoulder: idx("right_shoulder"),
            right_elbow: idx("right_elbow"),
            right_wrist: idx("right_wrist"),
        }
    }
}

/// Generate one scripted clip.
pub fn synth_clip(
    config: &SynthConfig,
    activity: Activity,
    name: String,
    pair_id: u32,
    rng: &mut ChaCha20Rng,
) -> MotionClip {
    let fps = config.fps;
    let frames_of = |seconds: f64| (seconds * fps).round() as usize;
    let cue_frames = frames_of(CUE_SECONDS).max(1);

    let params = activity_params(activity);
    let script = ActivityScript::new(params, rng);
    let skeleton = synthetic_skeleton();
    let ids = JointIds::resolve(&skeleton);

    // Schedule alternating handovers along the timeline.
    let mut plans: Vec<HandoverPlan> = Vec::with_capacity(config.handovers_per_clip);
    let mut cursor = frames_of(rng.gen_range(1.5..2.5));
    for k in 0..config.handovers_per_clip {
        let cue_start = cursor;
        let seg_start = cue_start + cue_frames;
        let seg_frames = frames_of(sample_handover_duration(rng)).max(5);
        let out_frames = (seg_frames * 2 / 5).max(1);
        let hold_frames = (seg_frames / 5).max(1);
        let seg_end = seg_start + seg_frames - 1;
        let kind = if k % 2 == 0 {
            HandoverState::HandingOver
        } else {
            HandoverState::TakingBack
        };
        plans.push(HandoverPlan {
            cue_start,
            seg_start,
            out_end: seg_start + out_frames - 1,
            hold_end: seg_start + out_frames + hold_frames - 1,
            seg_end,
            kind,
            rot: sample_rot_target(rng, params),
        });
        cursor = seg_end + 1 + frames_of(rng.gen_range(1.2..2.2));
    }
    let total = cursor + frames_of(TAIL_SECONDS);

    // Slow whole-body drift parameters.
    let wander_phase = rng.gen_range(0.0..TAU);
    let yaw_phase = rng.gen_range(0.0..TAU);
    let base_yaw = FRAC_PI_2 + rng.gen_range(-0.15..0.15);
    let hip_base = Vector3::new(rng.gen_range(-0.3..0.3), 1.0, rng.gen_range(-0.3..0.3));

    let mut frames: Vec<Frame> = Vec::with_capacity(total);
    let mut annotations: Vec<FrameAnnotation> = Vec::with_capacity(total);
    let noise_dist = (config.noise > 0.0).then(|| Normal::new(0.0, config.noise).unwrap());
    let noise = noise_dist.as_ref();

    for t in 0..total {
        let time = t as f64 / fps;
        let yaw = base_yaw + 0.08 * (TAU * 0.11 * time + yaw_phase).sin();
        let tilt = 0.02 * (TAU * 0.23 * time).sin();
        let hip = hip_base
            + Vector3::new(
                0.02 * (TAU * 0.07 * time + wander_phase).sin(),
                0.01 * (TAU * 0.31 * time).sin(),
                0.02 * (TAU * 0.05 * time + wander_phase).cos(),
            );
        // Hip yaw frame: canonical (front, up, right) -> world.
        let mount = rot_y(yaw - FRAC_PI_2);

        let plan = plans
            .iter()
            .find(|p| t >= p.cue_start && t <= p.seg_end + cue_frames);

        // Reach-cue blend weight.
        let blend = match plan {
            Some(p) => {
                if t < p.seg_start {
                    smoothstep((t - p.cue_start) as f64 / cue_frames as f64)
                } else if t <= p.hold_end {
                    1.0
                } else {
                    let back = (p.seg_end - p.hold_end).max(1) as f64;
                    1.0 - smoothstep((t - p.hold_end) as f64 / back)
                }
            }
            None => 0.0,
        };

        let activity_posture = script.posture(time);
        let arm = match plan {
            Some(p) if blend > 0.0 => {
                blend_posture(&activity_posture, &reach_posture(&p.rot), blend)
            }
            _ => activity_posture,
        };

        // Robot EE path in canonical coordinates.
        let rest = ee_rest();
        let (ee_canon, progress) = match plan {
            Some(p) if t >= p.seg_start && t <= p.seg_end => {
                if t <= p.out_end {
                    let tau = (t - p.seg_start) as f64 / (p.out_end - p.seg_start).max(1) as f64;
                    (min_jerk_position(&rest, &p.rot, tau), tau)
                } else if t <= p.hold_end {
                    (p.rot, 1.0)
                } else {
                    let tau = (t - p.hold_end) as f64 / (p.seg_end - p.hold_end).max(1) as f64;
                    (min_jerk_position(&p.rot, &rest, tau), 1.0 - tau)
                }
            }
            _ => (rest, 0.0),
        };
        let ee_position = hip + mount * ee_canon;
        let ee_rotation = mount * rot_y(0.4 * progress);

        let mut pose = Pose::rest(&skeleton, hip, rot_y(yaw) * rot_x(tilt));
        set_joint(&mut pose, ids.right_shoulder, &arm.shoulder, noise, rng);
        set_joint(&mut pose, ids.right_elbow, &arm.elbow, noise, rng);
        set_joint(&mut pose, ids.right_wrist, &arm.wrist, noise, rng);
        let sway = 0.05 * (TAU * 0.3 * time + wander_phase).sin();
        set_joint(&mut pose, ids.left_shoulder, &[0.1 + sway, 0.0, 0.05], noise, rng);
        set_joint(&mut pose, ids.left_elbow, &[0.0, 0.0, 0.15 - 0.5 * sway], noise, rng);
        set_joint(
            &mut pose,
            ids.spine,
            &[0.04 * (TAU * 0.4 * time).sin(), 0.02, 0.0],
            noise,
            rng,
        );
        set_joint(
            &mut pose,
            ids.head,
            &[
                0.0,
                0.0,
                script.head_amp * (TAU * script.frequency * time).sin(),
            ],
            noise,
            rng,
        );

        // Annotations: segments carry their kind; the cue itself is idle.
        let (state, time_in_segment) = match plan {
            Some(p) if t >= p.seg_start && t <= p.seg_end => {
                (p.kind, (t - p.seg_start) as f64 / fps)
            }
            _ => (HandoverState::Idle, 0.0),
        };
        // Object travels robot -> primary on handing over, back on taking back;
        // it switches hands at the end of the hold phase.
        let holder_is_robot = {
            let mut robot_has = true;
            for p in &plans {
                let transfer_done = t > p.hold_end;
                match p.kind {
                    HandoverState::HandingOver if transfer_done => robot_has = false,
                    HandoverState::TakingBack if transfer_done => robot_has = true,
                    _ => {}
                }
            }
            robot_has
        };
        let possession = Possession {
            primary: !holder_is_robot,
            robot: holder_is_robot,
        };

        frames.push(Frame {
            pose,
            ee_position,
            ee_rotation,
        });
        annotations.push(FrameAnnotation {
            state,
            possession,
            time_in_segment,
        });
    }

    MotionClip {
        name,
        activity,
        pair_id,
        fps,
        skeleton,
        frames,
        annotations,
    }
}

/// Generate the full corpus: `clips_per_activity` clips for every activity,
/// pair ids assigned round-robin, bit-identical for equal seeds.
pub fn synth_corpus(config: &SynthConfig, seed: u64) -> Result<Corpus, DataError> {
    config.validate()?;
    let mut clips = Vec::with_capacity(config.activities.len() * config.clips_per_activity);
    let mut counter = 0u32;
    for activity in &config.activities {
        for i in 0..config.clips_per_activity {
            let name = format!("{}_{i:03}", activity.label());
            let mut rng = sub_rng(seed, &format!("synth/{}/{i}", activity.label()));
            let pair_id = counter % config.n_pairs;
            clips.push(synth_clip(config, *activity, name, pair_id, &mut rng));
            counter += 1;
        }
    }
    Ok(Corpus::new(clips))
}
