//! Corpus container and participant-level train/test splitting.

use crate::dataio::clip::MotionClip;
use crate::dataio::window::{make_windows_strided, MotionWindow};
use crate::dataio::DataError;
use crate::kinematics::normalize_clip;
use std::collections::BTreeSet;

/// A set of annotated clips sharing one skeleton definition.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub clips: Vec<MotionClip>,
}

impl Corpus {
    pub fn new(clips: Vec<MotionClip>) -> Self {
        Corpus { clips }
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn total_frames(&self) -> usize {
        self.clips.iter().map(|c| c.len()).sum()
    }

    /// Distinct participant-pair ids, ascending.
    pub fn pair_ids(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.clips.iter().map(|c| c.pair_id).collect();
        set.into_iter().collect()
    }

    /// Windows over every clip at the given half-width and stride.
    pub fn windows(&self, t: usize, stride: usize) -> Result<Vec<MotionWindow>, DataError> {
        let mut out = Vec::new();
        for clip in &self.clips {
            out.extend(make_windows_strided(clip, t, stride)?);
        }
        Ok(out)
    }

    /// Every clip rigidly mapped into the canonical hip frame. Feature
    /// extraction assumes this has happened, so run it once after loading
    /// or generating world-frame clips.
    pub fn normalized(&self) -> Result<Corpus, DataError> {
        let clips = self
            .clips
            .iter()
            .map(|clip| normalize_clip(clip).map_err(DataError::from))
            .collect::<Result<Vec<MotionClip>, DataError>>()?;
        Ok(Corpus::new(clips))
    }
}

/// Split a corpus by participant pair: clips whose pair id is listed go to
/// the test side, everything else to the train side. Unknown ids error.
pub fn participant_split(
    corpus: &Corpus,
    test_pair_ids: &[u32],
) -> Result<(Corpus, Corpus), DataError> {
    let known: BTreeSet<u32> = corpus.clips.iter().map(|c| c.pair_id).collect();
    for id in test_pair_ids {
        if !known.contains(id) {
            return Err(DataError::UnknownPair(*id));
        }
    }
    let test_set: BTreeSet<u32> = test_pair_ids.iter().copied().collect();
    let (test, train): (Vec<MotionClip>, Vec<MotionClip>) = corpus
        .clips
        .iter()
        .cloned()
        .partition(|c| test_set.contains(&c.pair_id));
    Ok((Corpus::new(train), Corpus::new(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::clip::{Activity, Frame, FrameAnnotation};
    use crate::kinematics::{synthetic_skeleton, Pose};
    use nalgebra::{Matrix3, Vector3};

    fn clip_for_pair(pair_id: u32, n: usize) -> MotionClip {
        let skeleton = synthetic_skeleton();
        let frame = Frame {
            pose: Pose::rest(&skeleton, Vector3::new(0.0, 1.0, 0.0), Matrix3::identity()),
            ee_position: Vector3::new(0.0, 1.0, 0.25),
            ee_rotation: Matrix3::identity(),
        };
        MotionClip {
            name: format!("pair{pair_id}_{n}"),
            activity: Activity::NeutralPose,
            pair_id,
            fps: 25.0,
            skeleton,
            frames: vec![frame.clone(); 60],
            annotations: vec![FrameAnnotation::idle(); 60],
        }
    }

    fn corpus_of_pairs(pairs: &[u32]) -> Corpus {
        let clips = pairs
            .iter()
            .enumerate()
            .map(|(i, &p)| clip_for_pair(p, i))
            .collect();
        Corpus::new(clips)
    }

    #[test]
    fn two_pairs_held_out() {
        // Six pairs of participants, pairs 2 and 5 held out for testing.
        let corpus = corpus_of_pairs(&[0, 1, 2, 3, 4, 5, 0, 2, 5, 1]);
        let (train, test) = participant_split(&corpus, &[2, 5]).unwrap();
        assert_eq!(test.len(), 4);
        assert_eq!(train.len() + test.len(), corpus.len());
        assert!(test.clips.iter().all(|c| c.pair_id == 2 || c.pair_id == 5));
        assert!(train.clips.iter().all(|c| c.pair_id != 2 && c.pair_id != 5));
    }

    #[test]
    fn empty_test_ids_keep_everything_in_train() {
        let corpus = corpus_of_pairs(&[0, 1, 2]);
        let (train, test) = participant_split(&corpus, &[]).unwrap();
        assert_eq!(train.len(), 3);
        assert!(test.is_empty());
    }

    #[test]
    fn unknown_pair_is_an_error() {
        let corpus = corpus_of_pairs(&[0, 1]);
        assert!(matches!(
            participant_split(&corpus, &[7]),
            Err(DataError::UnknownPair(7))
        ));
    }

    #[test]
    fn normalized_corpus_is_in_the_canonical_hip_frame() {
        let config = crate::dataio::SynthConfig {
            clips_per_activity: 1,
            n_pairs: 1,
            activities: vec![Activity::HammerNail],
            ..Default::default()
        };
        let corpus = crate::dataio::synth_corpus(&config, 3).unwrap();
        let wanders = corpus.clips[0]
            .frames
            .iter()
            .any(|f| f.pose.root_position.norm() > 1e-6);
        assert!(wanders, "synthetic clips should be in world coordinates");
        let normalized = corpus.normalized().unwrap();
        for frame in &normalized.clips[0].frames {
            assert!(frame.pose.root_position.norm() < 1e-12);
            let yaw = crate::kinematics::heading_yaw(&frame.pose.root_rotation).unwrap();
            assert!(yaw.abs() < 1e-9, "heading not canonical: {yaw}");
        }
    }

    #[test]
    fn split_is_a_partition_at_the_pair_level() {
        let corpus = corpus_of_pairs(&[0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
        let (train, test) = participant_split(&corpus, &[1, 3]).unwrap();
        let train_ids: std::collections::BTreeSet<u32> =
            train.clips.iter().map(|c| c.pair_id).collect();
        let test_ids: std::collections::BTreeSet<u32> =
            test.clips.iter().map(|c| c.pair_id).collect();
        assert!(train_ids.is_disjoint(&test_ids));
        assert_eq!(train.len() + test.len(), corpus.len());
    }
}
