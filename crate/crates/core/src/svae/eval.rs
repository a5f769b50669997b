//! Per-activity evaluation: single-step and autoregressive MAE over
//! handover segments, in centimeters.

use super::loss::mae;
use super::model::SvaeModel;
use super::rollout::{generate_next, rollout};
use super::SvaeError;
use crate::dataio::annotations::segment_handovers;
use crate::dataio::clip::MotionClip;
use crate::dataio::features::ClipFeatures;
use nalgebra::Vector3;
use ndarray::s;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvaeReportRow {
    pub activity: String,
    pub single_step_mae_cm: f64,
    pub autoregressive_mae_cm: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvaeReport {
    pub rows: Vec<SvaeReportRow>,
    pub overall: SvaeReportRow,
}

impl SvaeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "activity,single_step_mae_cm,autoregressive_mae_cm,segments\n",
        );
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            out.push_str(&format!(
                "{},{:.4},{:.4},{}\n",
                row.activity,
                row.single_step_mae_cm,
                row.autoregressive_mae_cm,
                row.segments
            ));
        }
        out
    }
}

#[derive(Default)]
struct Bucket {
    single_gen: Vec<Vec<Vector3<f64>>>,
    single_gt: Vec<Vec<Vector3<f64>>>,
    auto_gen: Vec<Vec<Vector3<f64>>>,
    auto_gt: Vec<Vec<Vector3<f64>>>,
}

impl Bucket {
    fn row(&self, activity: &str) -> Result<SvaeReportRow, SvaeError> {
        Ok(SvaeReportRow {
            activity: activity.to_string(),
            single_step_mae_cm: 100.0 * mae(&self.single_gen, &self.single_gt)?,
            autoregressive_mae_cm: 100.0 * mae(&self.auto_gen, &self.auto_gt)?,
            segments: self.single_gen.len(),
        })
    }

    fn absorb(&mut self, other: &Bucket) {
        self.single_gen.extend_from_slice(&other.single_gen);
        self.single_gt.extend_from_slice(&other.single_gt);
        self.auto_gen.extend_from_slice(&other.auto_gen);
        self.auto_gt.extend_from_slice(&other.auto_gt);
    }
}

/// Evaluate a trained model on annotated clips. Every handover segment
/// contributes one single-step trajectory (each frame predicted from ground
/// truth) and one autoregressive trajectory (rollout from the segment
/// start). Latents are taken at their mean, so the report is deterministic.
pub fn eval_svae(model: &SvaeModel, clips: &[MotionClip]) -> Result<SvaeReport, SvaeError> {
    let t = model.config.t;
    let mut buckets: BTreeMap<String, Bucket> = BTreeMap::new();
    for clip in clips {
        if clip.len() < 2 * t + 2 {
            continue;
        }
        let features = ClipFeatures::compute(clip)?;
        let max_center = clip.len() - t - 2;
        let bucket = buckets.entry(clip.activity.label().to_string()).or_default();
        for segment in segment_handovers(clip)? {
            let c0 = segment.start.max(t);
            let c_end = segment.end.min(max_center);
            if c_end <= c0 {
                continue;
            }

            let mut gen = Vec::new();
            let mut gt = Vec::new();
            for c in c0..=c_end {
                let h = features.primary.slice(s![c - t..=c, ..]);
                let r = features.robot.slice(s![c - t..=c, ..]);
                gen.push(generate_next(model, h, r, clip.annotations[c].state)?);
                gt.push(features.ee_relative(c + 1));
            }
            bucket.single_gen.push(gen);
            bucket.single_gt.push(gt);

            let steps = c_end - c0;
            let h_stream = features.primary.slice(s![c0 - t..c0 + steps + 1, ..]);
            let r_init = features.robot.slice(s![c0 - t..=c0, ..]);
            let states: Vec<_> = (0..steps)
                .map(|s_| clip.annotations[c0 + s_].state)
                .collect();
            let positions = rollout(model, h_stream, r_init, steps, &states)?;
            bucket.auto_gen.push(positions);
            bucket
                .auto_gt
                .push((0..steps).map(|s_| features.ee_relative(c0 + 1 + s_)).collect());
        }
    }

    let mut overall = Bucket::default();
    let mut rows = Vec::new();
    for (activity, bucket) in &buckets {
        if bucket.single_gen.is_empty() {
            continue;
        }
        rows.push(bucket.row(activity)?);
        overall.absorb(bucket);
    }
    if overall.single_gen.is_empty() {
        return Err(SvaeError::EmptyCorpus);
    }
    Ok(SvaeReport {
        overall: overall.row("overall")?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svae::train::{tests::quick_config, tests::tiny_corpus, train_stage1, train_stage2};

    #[test]
    fn report_covers_activities_and_overall() {
        let corpus = tiny_corpus(2, 44);
        let cfg = quick_config();
        let model = train_stage2(train_stage1(&corpus, &cfg).unwrap(), &corpus, &cfg).unwrap();
        let report = eval_svae(&model, &corpus).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].activity, "hammer_nail");
        assert!(report.rows[0].segments > 0);
        assert!(report.rows[0].single_step_mae_cm.is_finite());
        assert!(report.rows[0].autoregressive_mae_cm.is_finite());
        assert_eq!(report.overall.activity, "overall");
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "activity,single_step_mae_cm,autoregressive_mae_cm,segments"
        );
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn unannotated_corpus_reports_empty() {
        let corpus = tiny_corpus(1, 44);
        let mut clip = corpus[0].clone();
        for a in &mut clip.annotations {
            a.state = crate::dataio::clip::HandoverState::Idle;
        }
        let cfg = quick_config();
        let model = train_stage1(&corpus, &cfg).unwrap();
        assert!(matches!(
            eval_svae(&model, &[clip]),
            Err(SvaeError::EmptyCorpus)
        ));
    }
}
