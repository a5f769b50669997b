//! Evaluation: per-activity position and orientation error tables.

use super::model::RotModel;
use super::train::build_examples;
use super::RotError;
use crate::dataio::clip::MotionClip;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Mean Euler-angle error between two directions: the average of the
/// absolute yaw and pitch differences of their spherical angles. A direction
/// carries no roll, so only these two angles are determined.
pub fn meae(pred_dir: &Vector3<f64>, gt_dir: &Vector3<f64>) -> Result<f64, RotError> {
    let (np, ng) = (pred_dir.norm(), gt_dir.norm());
    if np < 1e-9 {
        return Err(RotError::ZeroDirection(np));
    }
    if ng < 1e-9 {
        return Err(RotError::ZeroDirection(ng));
    }
    let p = pred_dir / np;
    let g = gt_dir / ng;
    let yaw_p = p.z.atan2(p.x);
    let yaw_g = g.z.atan2(g.x);
    let pitch_p = p.y.clamp(-1.0, 1.0).asin();
    let pitch_g = g.y.clamp(-1.0, 1.0).asin();
    // Wrap the yaw difference into (-pi, pi].
    let dyaw = (yaw_p - yaw_g).sin().atan2((yaw_p - yaw_g).cos());
    let dpitch = pitch_p - pitch_g;
    Ok((dyaw.abs() + dpitch.abs()) / 2.0)
}

/// One line of the evaluation table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotReportRow {
    pub activity: String,
    pub mae_cm: f64,
    pub mae_std_cm: f64,
    pub meae_rad: f64,
    pub meae_std_rad: f64,
    pub windows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotReport {
    pub rows: Vec<RotReportRow>,
    pub overall: RotReportRow,
}

impl RotReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("activity,MAE_cm,MAE_std,MEAE_rad,MEAE_std\n");
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            writeln!(
                &mut out,
                "{},{:.4},{:.4},{:.6},{:.6}",
                row.activity, row.mae_cm, row.mae_std_cm, row.meae_rad, row.meae_std_rad
            )
            .expect("string writes cannot fail");
        }
        out
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn summarize(activity: String, maes: &[f64], meaes: &[f64]) -> RotReportRow {
    let (mae, mae_std) = mean_std(maes);
    let (me, me_std) = mean_std(meaes);
    RotReportRow {
        activity,
        mae_cm: mae,
        mae_std_cm: mae_std,
        meae_rad: me,
        meae_std_rad: me_std,
        windows: maes.len(),
    }
}

/// Predict every handover window of the corpus and tabulate per-activity
/// position MAE (mean absolute per-coordinate error, cm) and MEAE (rad).
pub fn eval_rot(model: &RotModel, corpus: &[MotionClip]) -> Result<RotReport, RotError> {
    let examples = build_examples(corpus, model.config.t, 1)?;
    if examples.is_empty() {
        return Err(RotError::EmptyCorpus);
    }
    let mut buckets: BTreeMap<&'static str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ex in &examples {
        let pred = model.predict_rot(ex.window.h_seen(), ex.window.r_seen())?;
        let dp = pred.position - ex.target.position;
        let mae_cm = (dp.x.abs() + dp.y.abs() + dp.z.abs()) / 3.0 * 100.0;
        let angle = meae(&pred.direction, &ex.target.direction)?;
        let bucket = buckets.entry(ex.window.activity.label()).or_default();
        bucket.0.push(mae_cm);
        bucket.1.push(angle);
    }
    let rows: Vec<RotReportRow> = buckets
        .iter()
        .map(|(activity, (maes, meaes))| summarize((*activity).into(), maes, meaes))
        .collect();
    let mut all_maes = Vec::new();
    let mut all_meaes = Vec::new();
    for (maes, meaes) in buckets.values() {
        all_maes.extend_from_slice(maes);
        all_meaes.extend_from_slice(meaes);
    }
    let overall = summarize("overall".into(), &all_maes, &all_meaes);
    Ok(RotReport { rows, overall })
}
