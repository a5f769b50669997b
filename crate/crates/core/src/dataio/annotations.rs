//! Per-frame handover annotations: CSV ingest and segmentation.

use crate::dataio::clip::{FrameAnnotation, HandoverState, MotionClip, Possession};
use crate::dataio::DataError;

/// A maximal run of non-idle frames, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandoverSegment {
    pub start: usize,
    pub end: usize,
    pub kind: HandoverState,
}

impl HandoverSegment {
    pub fn frames(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Parse an annotation table (columns frame, handover_state, possession,
/// time_in_segment) into per-frame annotations for a clip of `n_frames`.
/// Frames not listed in the table are idle. Rows must be sorted by frame
/// with no duplicates.
pub fn load_annotations(csv_text: &str, n_frames: usize) -> Result<Vec<FrameAnnotation>, DataError> {
    let mut annotations = vec![FrameAnnotation::idle(); n_frames];
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::CsvSchema(format!("missing column '{name}'")))
    };
    let frame_col = col("frame")?;
    let state_col = col("handover_state")?;
    let possession_col = col("possession")?;
    let time_col = col("time_in_segment")?;

    let mut last_frame: Option<usize> = None;
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str, DataError> {
            record
                .get(i)
                .ok_or_else(|| DataError::CsvSchema("short annotation row".into()))
        };
        let frame: usize = field(frame_col)?
            .parse()
            .map_err(|e| DataError::CsvSchema(format!("bad frame index: {e}")))?;
        if let Some(prev) = last_frame {
            if frame <= prev {
                return Err(DataError::CsvSchema(format!(
                    "frame indices must be strictly increasing, got {frame} after {prev}"
                )));
            }
        }
        last_frame = Some(frame);
        if frame >= n_frames {
            return Err(DataError::CsvSchema(format!(
                "frame {frame} out of range for clip of {n_frames} frames"
            )));
        }
        let time: f64 = field(time_col)?
            .parse()
            .map_err(|e| DataError::CsvSchema(format!("bad time_in_segment: {e}")))?;
        annotations[frame] = FrameAnnotation {
            state: HandoverState::parse(field(state_col)?)?,
            possession: Possession::parse(field(possession_col)?)?,
            time_in_segment: time,
        };
    }
    Ok(annotations)
}

/// Maximal runs of non-idle frames. A run mixing HandingOver and TakingBack
/// is an annotation-consistency error.
pub fn segment_handovers(clip: &MotionClip) -> Result<Vec<HandoverSegment>, DataError> {
    segment_states(clip.annotations.iter().map(|a| a.state))
}

pub(crate) fn segment_states<I>(states: I) -> Result<Vec<HandoverSegment>, DataError>
where
    I: IntoIterator<Item = HandoverState>,
{
    let mut segments = Vec::new();
    let mut open: Option<HandoverSegment> = None;
    for (i, state) in states.into_iter().enumerate() {
        match (&mut open, state.is_idle()) {
            (None, true) => {}
            (None, false) => {
                open = Some(HandoverSegment {
                    start: i,
                    end: i,
                    kind: state,
                });
            }
            (Some(seg), true) => {
                segments.push(*seg);
                open = None;
            }
            (Some(seg), false) => {
                if seg.kind != state {
                    return Err(DataError::SegmentConsistency {
                        start: seg.start,
                        end: i,
                        detail: format!(
                            "{} run directly followed by {} without an idle gap",
                            seg.kind.as_str(),
                            state.as_str()
                        ),
                    });
                }
                seg.end = i;
            }
        }
    }
    if let Some(seg) = open {
        segments.push(seg);
    }
    Ok(segments)
}
