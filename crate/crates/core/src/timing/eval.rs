//! Segment-level accuracy tables per activity and activity parameter.

use super::model::TimingModel;
use super::{classify, TimingError};
use crate::dataio::clip::{Activity, HandoverState, MotionClip};
use crate::dataio::synth::{activity_params, Proximity, RangeOfMotion, VerticalZone};
use crate::dataio::window::make_windows;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Accuracy over one group of segments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingReportRow {
    pub group: String,
    pub segments: usize,
    pub correct: usize,
}

impl TimingReportRow {
    fn new(group: &str) -> Self {
        TimingReportRow {
            group: group.into(),
            segments: 0,
            correct: 0,
        }
    }

    pub fn accuracy_pct(&self) -> Option<f64> {
        if self.segments == 0 {
            None
        } else {
            Some(self.correct as f64 / self.segments as f64 * 100.0)
        }
    }
}

/// Per-activity, per-parameter and overall segment accuracy, plus the raw
/// window-level accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingReport {
    /// One row per activity, in enum order (13 rows).
    pub activity_rows: Vec<TimingReportRow>,
    /// Height, distance and motion-range aggregates (7 rows).
    pub parameter_rows: Vec<TimingReportRow>,
    pub overall: TimingReportRow,
    pub windows: usize,
    pub windows_correct: usize,
}

impl TimingReport {
    pub fn window_accuracy_pct(&self) -> Option<f64> {
        if self.windows == 0 {
            None
        } else {
            Some(self.windows_correct as f64 / self.windows as f64 * 100.0)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,segments,accuracy_pct\n");
        let mut push = |group: &str, count: usize, accuracy: Option<f64>| {
            match accuracy {
                Some(pct) => writeln!(&mut out, "{group},{count},{pct:.2}"),
                None => writeln!(&mut out, "{group},{count},"),
            }
            .expect("string writes cannot fail");
        };
        for row in self.activity_rows.iter().chain(self.parameter_rows.iter()) {
            push(&row.group, row.segments, row.accuracy_pct());
        }
        push(
            &self.overall.group,
            self.overall.segments,
            self.overall.accuracy_pct(),
        );
        push("overall_windows", self.windows, self.window_accuracy_pct());
        out
    }
}

/// Maximal same-label runs over the whole clip, idle runs included.
fn label_runs(clip: &MotionClip) -> Vec<(usize, usize, bool)> {
    let mut runs = Vec::new();
    let mut start = 0usize;
    let mut label = clip.annotations[0].state != HandoverState::Idle;
    for (i, a) in clip.annotations.iter().enumerate().skip(1) {
        let l = a.state != HandoverState::Idle;
        if l != label {
            runs.push((start, i - 1, label));
            start = i;
            label = l;
        }
    }
    runs.push((start, clip.len() - 1, label));
    runs
}

const PARAMETER_GROUPS: [&str; 7] = [
    "height_torso",
    "height_head",
    "distance_on_body",
    "distance_mid_air",
    "range_small",
    "range_medium",
    "range_large",
];

fn parameter_indices(activity: Activity) -> Vec<usize> {
    let Some(params) = activity_params(activity) else {
        return Vec::new();
    };
    let height = match params.vertical {
        VerticalZone::Torso => 0,
        VerticalZone::Head => 1,
    };
    let distance = match params.proximity {
        Proximity::OnBody => 2,
        Proximity::MidAir => 3,
    };
    let range = match params.range {
        RangeOfMotion::Small => 4,
        RangeOfMotion::Medium => 5,
        RangeOfMotion::Large => 6,
    };
    vec![height, distance, range]
}

/// Score every same-label segment of the corpus: a segment counts correct
/// when more than half of its windows classify correctly. Segments shorter
/// than a window (no valid centers) are skipped.
pub fn accuracy_report(
    model: &TimingModel,
    corpus: &[MotionClip],
) -> Result<TimingReport, TimingError> {
    let t = model.config.t;
    let mut activity_rows: Vec<TimingReportRow> = Activity::ALL
        .iter()
        .map(|a| TimingReportRow::new(a.label()))
        .collect();
    let mut parameter_rows: Vec<TimingReportRow> =
        PARAMETER_GROUPS.iter().map(|g| TimingReportRow::new(g)).collect();
    let mut overall = TimingReportRow::new("overall");
    let mut windows_total = 0usize;
    let mut windows_correct = 0usize;

    for clip in corpus {
        if clip.len() < 2 * t + 2 {
            continue;
        }
        let windows = make_windows(clip, t)?;
        // Window verdicts keyed by center frame.
        let mut verdicts = vec![None; clip.len()];
        for w in &windows {
            let p = model.predict_likelihood(w.h_seen())?;
            let predicted = classify(p).expect("sigmoid output is in range");
            let labeled = w.state != HandoverState::Idle;
            verdicts[w.center] = Some(predicted == labeled);
        }
        windows_total += windows.len();
        windows_correct += verdicts.iter().flatten().filter(|&&v| v).count();

        let activity_idx = Activity::ALL
            .iter()
            .position(|a| *a == clip.activity)
            .expect("every activity is enumerated");
        let param_idx = parameter_indices(clip.activity);

        for (start, end, _) in label_runs(clip) {
            let scored: Vec<bool> = (start..=end).filter_map(|f| verdicts[f]).collect();
            if scored.is_empty() {
                continue;
            }
            let correct_count = scored.iter().filter(|&&v| v).count();
            let correct = 2 * correct_count > scored.len();
            overall.segments += 1;
            activity_rows[activity_idx].segments += 1;
            for &pi in &param_idx {
                parameter_rows[pi].segments += 1;
            }
            if correct {
                overall.correct += 1;
                activity_rows[activity_idx].correct += 1;
                for &pi in &param_idx {
                    parameter_rows[pi].correct += 1;
                }
            }
        }
    }

    if windows_total == 0 {
        return Err(TimingError::EmptyCorpus);
    }
    Ok(TimingReport {
        activity_rows,
        parameter_rows,
        overall,
        windows: windows_total,
        windows_correct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::clip::{Frame, FrameAnnotation, Possession};
    use crate::dataio::features::FeatureLayout;
    use crate::kinematics::{synthetic_skeleton, Pose};
    use crate::timing::model::tests::tiny_config;
    use crate::timing::train::tests::{separable_clip, separable_corpus};
    use crate::timing::train::train_timing;
    use nalgebra::{Matrix3, Vector3};

    #[test]
    fn trained_predictor_scores_every_segment_on_the_fixture() {
        let corpus = separable_corpus();
        let model = train_timing(&corpus, &tiny_config()).unwrap();
        let report = accuracy_report(&model, &corpus).unwrap();
        assert_eq!(report.overall.accuracy_pct(), Some(100.0));
        for row in report.activity_rows.iter().chain(report.parameter_rows.iter()) {
            if row.segments > 0 {
                assert_eq!(
                    row.accuracy_pct(),
                    Some(100.0),
                    "group {} not perfect",
                    row.group
                );
            }
        }
        // Both fixture activities contribute segments.
        let with_segments: Vec<&str> = report
            .activity_rows
            .iter()
            .filter(|r| r.segments > 0)
            .map(|r| r.group.as_str())
            .collect();
        assert_eq!(with_segments, vec!["hammer_nail", "clean_window"]);
    }

    /// Clip with two idle and two handover runs, all long enough to hold
    /// windows, so a constant predictor scores exactly half the segments.
    fn balanced_clip() -> MotionClip {
        let skeleton = synthetic_skeleton();
        let frames = 80usize;
        let in_segment = |i: usize| (20..40).contains(&i) || (60..80).contains(&i);
        let frames_vec: Vec<Frame> = (0..frames)
            .map(|_| Frame {
                pose: Pose::rest(&skeleton, Vector3::zeros(), Matrix3::identity()),
                ee_position: Vector3::new(0.0, 0.0, 0.25),
                ee_rotation: Matrix3::identity(),
            })
            .collect();
        let annotations = (0..frames)
            .map(|i| FrameAnnotation {
                state: if in_segment(i) {
                    HandoverState::HandingOver
                } else {
                    HandoverState::Idle
                },
                possession: Possession {
                    primary: true,
                    robot: false,
                },
                time_in_segment: 0.0,
            })
            .collect();
        MotionClip {
            name: "balanced".into(),
            activity: Activity::WashTorso,
            pair_id: 0,
            fps: 25.0,
            skeleton,
            frames: frames_vec,
            annotations,
        }
    }

    #[test]
    fn constant_false_predictor_scores_half_on_a_balanced_corpus() {
        let cfg = tiny_config();
        let layout = FeatureLayout {
            joint_count: synthetic_skeleton().joint_count(),
        };
        let mut model = TimingModel::new(cfg, layout).unwrap();
        // Silence the final layer: likelihood collapses to sigmoid(-50) ~ 0.
        let wid = model.params.id("net/l2/w");
        model.params.get_mut(wid).fill(0.0);
        let bid = model.params.id("net/l2/b");
        model.params.get_mut(bid).fill(-50.0);

        let corpus = vec![balanced_clip()];
        let report = accuracy_report(&model, &corpus).unwrap();
        assert_eq!(report.overall.segments, 4);
        assert_eq!(report.overall.accuracy_pct(), Some(50.0));
    }

    #[test]
    fn report_has_thirteen_activity_rows_seven_parameter_rows_and_overall() {
        let corpus = vec![separable_clip("solo", Activity::ShampooHair, 0)];
        let model = train_timing(&corpus, &tiny_config()).unwrap();
        let report = accuracy_report(&model, &corpus).unwrap();
        assert_eq!(report.activity_rows.len(), 13);
        assert_eq!(report.parameter_rows.len(), 7);
        let groups: Vec<&str> = report
            .parameter_rows
            .iter()
            .map(|r| r.group.as_str())
            .collect();
        assert_eq!(
            groups,
            vec![
                "height_torso",
                "height_head",
                "distance_on_body",
                "distance_mid_air",
                "range_small",
                "range_medium",
                "range_large"
            ]
        );

        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "group,segments,accuracy_pct");
        // 13 + 7 + overall + overall_windows data lines.
        assert_eq!(csv.lines().count(), 1 + 13 + 7 + 2);
        // Activities absent from the corpus report no accuracy.
        let mount = csv
            .lines()
            .find(|l| l.starts_with("mount_microphone,"))
            .unwrap();
        assert_eq!(mount, "mount_microphone,0,");
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let layout = FeatureLayout {
            joint_count: synthetic_skeleton().joint_count(),
        };
        let model = TimingModel::new(tiny_config(), layout).unwrap();
        assert!(matches!(
            accuracy_report(&model, &[]),
            Err(TimingError::EmptyCorpus)
        ));
    }
}
