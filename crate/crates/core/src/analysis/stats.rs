//! Corpus descriptives: handover durations and hip-frame point clouds.

use super::AnalysisError;
use crate::dataio::features::ClipFeatures;
use crate::dataio::MotionClip;
use crate::rot::{segment_rot_targets, RotError, PALM_JOINT};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// One cloud point in the hip frame, tagged with its activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub activity: String,
    pub point: [f64; 3],
}

/// Dataset descriptives. Durations are segment frame counts at the clip
/// rate; std is population (divide by N). Clouds are hip-frame: one
/// transfer location per segment, and the primary palm position of every
/// frame for the per-activity coverage cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandoverStats {
    pub segment_count: usize,
    pub duration_mean_s: Option<f64>,
    pub duration_std_s: Option<f64>,
    pub rot_points: Vec<LabeledPoint>,
    pub palm_points: Vec<LabeledPoint>,
    pub warnings: Vec<String>,
}

impl HandoverStats {
    pub fn summary_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "metric,value\nsegment_count,{}\nduration_mean_s,{}\nduration_std_s,{}\n",
            self.segment_count,
            opt(self.duration_mean_s),
            opt(self.duration_std_s),
        )
    }
}

/// Serialize a cloud as `activity,x,y,z` rows.
pub fn points_csv(points: &[LabeledPoint]) -> String {
    let mut out = String::from("activity,x,y,z\n");
    for p in points {
        writeln!(
            &mut out,
            "{},{:.6},{:.6},{:.6}",
            p.activity, p.point[0], p.point[1], p.point[2]
        )
        .expect("string writes cannot fail");
    }
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Durations and hip-frame clouds over an annotated corpus. A corpus (or a
/// clip) without segments is not an error: stats come back empty with a
/// warning so callers can still emit the palm cloud.
pub fn handover_stats(corpus: &[MotionClip]) -> Result<HandoverStats, AnalysisError> {
    let mut durations = Vec::new();
    let mut rot_points = Vec::new();
    let mut palm_points = Vec::new();
    let mut warnings = Vec::new();
    if corpus.is_empty() {
        warnings.push("corpus is empty".to_string());
    }

    for clip in corpus {
        let activity = clip.activity.label().to_string();
        let targets = segment_rot_targets(clip)?;
        if targets.is_empty() {
            warnings.push(format!("clip '{}' has no handover segments", clip.name));
        }
        for (seg, rot) in &targets {
            durations.push(seg.frames() as f64 / clip.fps);
            rot_points.push(LabeledPoint {
                activity: activity.clone(),
                point: [rot.position.x, rot.position.y, rot.position.z],
            });
        }

        let palm = clip
            .skeleton
            .joint_index(PALM_JOINT)
            .ok_or_else(|| RotError::MissingPalmJoint(PALM_JOINT.into()))?;
        let features = ClipFeatures::compute(clip)?;
        let cols = features.layout.joint_position_cols(palm);
        for f in 0..features.primary.nrows() {
            palm_points.push(LabeledPoint {
                activity: activity.clone(),
                point: [
                    features.primary[[f, cols.start]],
                    features.primary[[f, cols.start + 1]],
                    features.primary[[f, cols.start + 2]],
                ],
            });
        }
    }

    let (duration_mean_s, duration_std_s) = if durations.is_empty() {
        if !corpus.is_empty() {
            warnings.push("corpus contains no handover segments".to_string());
        }
        (None, None)
    } else {
        let (m, s) = mean_std(&durations);
        (Some(m), Some(s))
    };
    Ok(HandoverStats {
        segment_count: durations.len(),
        duration_mean_s,
        duration_std_s,
        rot_points,
        palm_points,
        warnings,
    })
}

/// Projection of the hip frame (x front, y up, z right) onto a 2D panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScatterView {
    /// Seen from in front of the user: z right, y up.
    Front,
    /// Seen from above: z right, x up the page.
    Top,
}

impl ScatterView {
    pub fn label(self) -> &'static str {
        match self {
            ScatterView::Front => "front",
            ScatterView::Top => "top",
        }
    }

    fn project(self, p: [f64; 3]) -> (f64, f64) {
        match self {
            ScatterView::Front => (p[2], p[1]),
            ScatterView::Top => (p[2], p[0]),
        }
    }

    fn axis_labels(self) -> (&'static str, &'static str) {
        match self {
            ScatterView::Front => ("z (m, right)", "y (m, up)"),
            ScatterView::Top => ("z (m, right)", "x (m, front)"),
        }
    }
}

const PALETTE: [&str; 13] = [
    "#e6194b", "#3cb44b", "#d4b106", "#4363d8", "#f58231", "#911eb4", "#2bb5b8", "#f032e6",
    "#7a9e10", "#9c5050", "#008080", "#7d68b5", "#9a6324",
];

/// Hand-rolled scatter panel of one projection, points colored per activity.
/// Output is deterministic: legend entries are sorted, points keep input
/// order.
pub fn scatter_svg(points: &[LabeledPoint], view: ScatterView) -> String {
    const PLOT: f64 = 440.0;
    const MARGIN: f64 = 50.0;
    const LEGEND_W: f64 = 170.0;
    let width = MARGIN * 2.0 + PLOT + LEGEND_W;
    let height = MARGIN * 2.0 + PLOT;

    let mut activities: Vec<&str> = points.iter().map(|p| p.activity.as_str()).collect();
    activities.sort_unstable();
    activities.dedup();
    let color_of = |activity: &str| -> &str {
        let idx = activities
            .iter()
            .position(|a| *a == activity)
            .expect("activity is in the dedup set");
        PALETTE[idx % PALETTE.len()]
    };

    let mut svg = String::new();
    let _ = writeln!(
        &mut svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(
        &mut svg,
        "  <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{PLOT}\" height=\"{PLOT}\" \
         fill=\"none\" stroke=\"#888\"/>"
    );
    let (hx, hy) = view.axis_labels();
    let _ = writeln!(
        &mut svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\">{} view: {hx} \
         (horizontal), {hy} (vertical)</text>",
        MARGIN + PLOT / 2.0,
        MARGIN - 14.0,
        view.label(),
    );

    if points.is_empty() {
        let _ = writeln!(
            &mut svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\">no \
             points</text>",
            MARGIN + PLOT / 2.0,
            MARGIN + PLOT / 2.0,
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    // Equal-aspect bounds with a small pad so edge points stay visible.
    let projected: Vec<(f64, f64)> = points.iter().map(|p| view.project(p.point)).collect();
    let (mut min_h, mut max_h, mut min_v, mut max_v) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(h, v) in &projected {
        min_h = min_h.min(h);
        max_h = max_h.max(h);
        min_v = min_v.min(v);
        max_v = max_v.max(v);
    }
    let half = 0.55 * (max_h - min_h).max(max_v - min_v).max(0.1);
    let (ch, cv) = (0.5 * (min_h + max_h), 0.5 * (min_v + max_v));
    let to_px = |h: f64, v: f64| -> (f64, f64) {
        (
            MARGIN + (h - (ch - half)) / (2.0 * half) * PLOT,
            // SVG y grows downward; the vertical axis grows upward.
            MARGIN + PLOT - (v - (cv - half)) / (2.0 * half) * PLOT,
        )
    };

    for (p, &(h, v)) in points.iter().zip(&projected) {
        let (x, y) = to_px(h, v);
        let _ = writeln!(
            &mut svg,
            "  <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.6\"/>",
            color_of(&p.activity)
        );
    }

    for (i, activity) in activities.iter().enumerate() {
        let y = MARGIN + 12.0 + 18.0 * i as f64;
        let x = MARGIN + PLOT + 16.0;
        let _ = writeln!(
            &mut svg,
            "  <circle cx=\"{x:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"{}\"/>",
            y - 4.0,
            color_of(activity)
        );
        let _ = writeln!(
            &mut svg,
            "  <text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"12\">{activity}</text>",
            x + 10.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::clip::{Activity, Frame, FrameAnnotation, HandoverState, Possession};
    use crate::dataio::{synth_corpus, SynthConfig};
    use crate::kinematics::{synthetic_skeleton, Pose};
    use crate::rot::train::tests::fixture_corpus;
    use crate::seeds::sub_rng;
    use nalgebra::{Matrix3, Vector3};

    /// 160-frame clip at 25 fps with a 50-frame (2 s) and a 75-frame (3 s)
    /// segment; the EE sits away from the palm so transfer frames resolve.
    fn two_segment_clip() -> MotionClip {
        let skeleton = synthetic_skeleton();
        let frames = 160usize;
        let frames_vec: Vec<Frame> = (0..frames)
            .map(|_| Frame {
                pose: Pose::rest(&skeleton, Vector3::zeros(), Matrix3::identity()),
                ee_position: Vector3::new(0.1, -0.2, 0.5),
                ee_rotation: Matrix3::identity(),
            })
            .collect();
        let annotations = (0..frames)
            .map(|i| {
                let state = if (10..60).contains(&i) {
                    HandoverState::HandingOver
                } else if (70..145).contains(&i) {
                    HandoverState::TakingBack
                } else {
                    HandoverState::Idle
                };
                FrameAnnotation {
                    state,
                    possession: Possession {
                        primary: true,
                        robot: false,
                    },
                    time_in_segment: 0.0,
                }
            })
            .collect();
        MotionClip {
            name: "two-seg".into(),
            activity: Activity::HammerNail,
            pair_id: 0,
            fps: 25.0,
            skeleton,
            frames: frames_vec,
            annotations,
        }
    }

    #[test]
    fn two_segments_give_textbook_mean_and_std() {
        let stats = handover_stats(&[two_segment_clip()]).unwrap();
        assert_eq!(stats.segment_count, 2);
        assert!((stats.duration_mean_s.unwrap() - 2.5).abs() < 1e-12);
        assert!((stats.duration_std_s.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(stats.rot_points.len(), 2);
        assert_eq!(stats.palm_points.len(), 160);
        assert!(stats.warnings.is_empty());
    }

    #[test]
    fn synthetic_corpus_durations_match_the_generator() {
        let config = SynthConfig::default();
        let corpus = synth_corpus(&config, 41).unwrap();
        let stats = handover_stats(&corpus.clips).unwrap();
        assert!(stats.segment_count >= 50);
        let mean = stats.duration_mean_s.unwrap();
        assert!(
            (mean - 2.244).abs() < 0.1,
            "sampled mean duration {mean} strays from the generator target"
        );
    }

    #[test]
    fn clouds_are_invariant_to_world_translation() {
        let corpus = fixture_corpus();
        let mut moved = corpus.clone();
        let shift = Vector3::new(3.7, -1.2, 9.4);
        for clip in &mut moved {
            for frame in &mut clip.frames {
                frame.pose.root_position += shift;
                frame.ee_position += shift;
            }
        }
        let base = handover_stats(&corpus).unwrap();
        let shifted = handover_stats(&moved).unwrap();
        assert_eq!(base.rot_points.len(), shifted.rot_points.len());
        for (a, b) in base.rot_points.iter().zip(&shifted.rot_points) {
            for c in 0..3 {
                assert!((a.point[c] - b.point[c]).abs() < 1e-9);
            }
        }
        for (a, b) in base.palm_points.iter().zip(&shifted.palm_points) {
            for c in 0..3 {
                assert!((a.point[c] - b.point[c]).abs() < 1e-9);
            }
        }
        assert_eq!(base.duration_mean_s, shifted.duration_mean_s);
    }

    #[test]
    fn segmentless_corpus_warns_instead_of_failing() {
        let mut clip = two_segment_clip();
        for a in &mut clip.annotations {
            a.state = HandoverState::Idle;
        }
        let stats = handover_stats(&[clip]).unwrap();
        assert_eq!(stats.segment_count, 0);
        assert!(stats.duration_mean_s.is_none());
        assert!(stats.duration_std_s.is_none());
        assert!(!stats.warnings.is_empty());
        // The palm cloud does not depend on segmentation.
        assert_eq!(stats.palm_points.len(), 160);

        let empty = handover_stats(&[]).unwrap();
        assert_eq!(empty.segment_count, 0);
        assert!(!empty.warnings.is_empty());
    }

    #[test]
    fn csv_outputs_are_well_formed() {
        let stats = handover_stats(&[two_segment_clip()]).unwrap();
        let summary = stats.summary_csv();
        assert!(summary.starts_with("metric,value\n"));
        assert!(summary.contains("segment_count,2\n"));
        assert!(summary.contains("duration_mean_s,2.500000\n"));
        let cloud = points_csv(&stats.rot_points);
        assert_eq!(cloud.lines().count(), 1 + stats.rot_points.len());
        assert!(cloud.starts_with("activity,x,y,z\n"));
        assert!(cloud.lines().nth(1).unwrap().starts_with("hammer_nail,"));

        let none = handover_stats(&[]).unwrap();
        assert!(none.summary_csv().contains("duration_mean_s,\n"));
    }

    #[test]
    fn scatter_views_are_valid_svg_with_one_mark_per_point() {
        use rand::Rng;
        let mut rng = sub_rng(5, "analysis/scatter-test");
        let points: Vec<LabeledPoint> = (0..40)
            .map(|i| LabeledPoint {
                activity: if i % 2 == 0 { "hammer_nail" } else { "clean_window" }.into(),
                point: [rng.gen_range(-0.5..0.5), rng.gen_range(0.0..0.8), rng.gen_range(0.0..0.45)],
            })
            .collect();
        let front = scatter_svg(&points, ScatterView::Front);
        let top = scatter_svg(&points, ScatterView::Top);
        for svg in [&front, &top] {
            assert!(svg.starts_with("<svg "));
            assert!(svg.trim_end().ends_with("</svg>"));
            // 40 data marks + 2 legend swatches.
            assert_eq!(svg.matches("<circle").count(), 42);
        }
        assert_ne!(front, top);
        assert!(scatter_svg(&[], ScatterView::Front).contains("no points"));
    }
}
