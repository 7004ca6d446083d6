//! Recognition-accuracy scoring and the per-sequence accuracy report.
//!
//! Every tracked object gets one verdict. A track is matched to the
//! ground-truth object whose keyframe boxes overlap it best (IoU at least
//! [`MATCH_IOU`]) and is correct when its voted label equals that object's
//! label. Unmatched tracks and ground-truth objects that no track matched
//! count as incorrect. The overall figure is the unweighted mean of the
//! per-sequence percentages.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::BoundingBox;
use crate::frameio::FrameRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("correct + incorrect must be at least 1")]
    EmptyCounts,
    #[error("cannot average an empty list of accuracies")]
    EmptyList,
    #[error("ground truth for {0:?} lists no objects")]
    NoGroundTruth(String),
}

/// Minimum keyframe IoU for a track to match a ground-truth object.
pub const MATCH_IOU: f64 = 0.3;

/// Recognized counts for one input sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub sequence_id: String,
    pub correct: u64,
    pub incorrect: u64,
}

impl SequenceResult {
    pub fn accuracy_percent(&self) -> Result<f64, EvalError> {
        accuracy_percent(self.correct, self.incorrect)
    }
}

/// `100 · correct / (correct + incorrect)` as an exact fraction.
pub fn accuracy_ratio(correct: u64, incorrect: u64) -> Result<Ratio<u64>, EvalError> {
    let total = correct + incorrect;
    if total == 0 {
        return Err(EvalError::EmptyCounts);
    }
    Ok(Ratio::new(100 * correct, total))
}

pub fn accuracy_percent(correct: u64, incorrect: u64) -> Result<f64, EvalError> {
    let r = accuracy_ratio(correct, incorrect)?;
    Ok(*r.numer() as f64 / *r.denom() as f64)
}

/// Unweighted mean of per-sequence percentages.
pub fn overall_accuracy(per_sequence: &[f64]) -> Result<f64, EvalError> {
    if per_sequence.is_empty() {
        return Err(EvalError::EmptyList);
    }
    Ok(per_sequence.iter().sum::<f64>() / per_sequence.len() as f64)
}

/// Rounds to one decimal place, the precision used in reports.
pub fn round1(value: f64) -> f64 {
    (value * 10.0).round() / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: [usize; 4],
}

/// One line of a ground-truth JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub object_id: u64,
    pub label: String,
    pub keyframes: Vec<Keyframe>,
}

/// Everything the scorer needs to know about one track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSummary {
    pub track_id: u64,
    /// Label reported on the track's last frame.
    pub label: Option<String>,
    pub boxes: BTreeMap<usize, BoundingBox>,
}

/// Collapses per-frame records into per-track summaries, ordered by id.
pub fn summarize_tracks(records: &[FrameRecord]) -> Vec<TrackSummary> {
    let mut tracks: BTreeMap<u64, TrackSummary> = BTreeMap::new();
    let mut ordered: Vec<&FrameRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.frame);
    for rec in ordered {
        for d in &rec.detections {
            let t = tracks.entry(d.track_id).or_insert_with(|| TrackSummary {
                track_id: d.track_id,
                label: None,
                boxes: BTreeMap::new(),
            });
            t.label = d.label.clone();
            t.boxes.insert(rec.frame, d.bounding_box());
        }
    }
    tracks.into_values().collect()
}

/// Best keyframe IoU between a track and a ground-truth object.
pub fn track_overlap(track: &TrackSummary, object: &GroundTruthObject) -> f64 {
    object
        .keyframes
        .iter()
        .filter_map(|k| {
            let [x, y, w, h] = k.bbox;
            track
                .boxes
                .get(&k.frame)
                .map(|b| b.iou(&BoundingBox::new(x, y, w, h)))
        })
        .fold(0.0, f64::max)
}

pub fn score_sequence(
    sequence_id: &str,
    ground_truth: &[GroundTruthObject],
    tracks: &[TrackSummary],
) -> Result<SequenceResult, EvalError> {
    if ground_truth.is_empty() {
        return Err(EvalError::NoGroundTruth(sequence_id.to_string()));
    }
    let mut correct = 0;
    let mut incorrect = 0;
    let mut object_matched = vec![false; ground_truth.len()];
    for track in tracks {
        let mut best: Option<(usize, f64)> = None;
        for (gi, obj) in ground_truth.iter().enumerate() {
            let iou = track_overlap(track, obj);
            if iou >= MATCH_IOU && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        match best {
            Some((gi, _)) => {
                object_matched[gi] = true;
                if track.label.as_deref() == Some(ground_truth[gi].label.as_str()) {
                    correct += 1;
                } else {
                    incorrect += 1;
                }
            }
            None => incorrect += 1,
        }
    }
    incorrect += object_matched.iter().filter(|m| !**m).count() as u64;
    Ok(SequenceResult {
        sequence_id: sequence_id.to_string(),
        correct,
        incorrect,
    })
}

/// Precomputed counts, optionally with an accuracy printed elsewhere to
/// check against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRow {
    pub sequence: String,
    pub correct: u64,
    pub incorrect: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub printed_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sequence: String,
    pub correct: u64,
    pub incorrect: u64,
    /// Recomputed accuracy, one decimal.
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub printed_accuracy: Option<f64>,
    /// Printed value disagrees with the recomputed one at one decimal.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub rows: Vec<ReportRow>,
    /// Mean of the recomputed row accuracies, one decimal.
    pub overall: f64,
    /// Mean of the printed accuracies (recomputed where none was printed),
    /// present only when some row carried a printed value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overall_printed: Option<f64>,
}

pub fn build_report(rows: &[CountsRow]) -> Result<AccuracyReport, EvalError> {
    let mut out = Vec::with_capacity(rows.len());
    let mut exact = Vec::with_capacity(rows.len());
    let mut printed = Vec::with_capacity(rows.len());
    for row in rows {
        let acc = accuracy_percent(row.correct, row.incorrect)?;
        let shown = round1(acc);
        exact.push(acc);
        printed.push(row.printed_accuracy.unwrap_or(acc));
        out.push(ReportRow {
            sequence: row.sequence.clone(),
            correct: row.correct,
            incorrect: row.incorrect,
            accuracy: shown,
            printed_accuracy: row.printed_accuracy,
            flagged: row
                .printed_accuracy
                .is_some_and(|p| (round1(p) - shown).abs() > 1e-9),
        });
    }
    let overall = round1(overall_accuracy(&exact)?);
    let overall_printed = if rows.iter().any(|r| r.printed_accuracy.is_some()) {
        Some(round1(overall_accuracy(&printed)?))
    } else {
        None
    };
    Ok(AccuracyReport {
        rows: out,
        overall,
        overall_printed,
    })
}

impl AccuracyReport {
    pub fn from_results(results: &[SequenceResult]) -> Result<Self, EvalError> {
        let rows: Vec<CountsRow> = results
            .iter()
            .map(|r| CountsRow {
                sequence: r.sequence_id.clone(),
                correct: r.correct,
                incorrect: r.incorrect,
                printed_accuracy: None,
            })
            .collect();
        build_report(&rows)
    }

    /// Plain-text table with one row per sequence and a closing `overall` row.
    pub fn to_text(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.sequence.chars().count())
            .chain([15])
            .max()
            .unwrap_or(15);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<name_w$}  {:>20}  {:>22}  {:>20}",
            "Input Sequences", "Correctly Recognized", "Incorrectly Recognized", "Recognition Accuracy"
        );
        for r in &self.rows {
            let _ = write!(
                s,
                "{:<name_w$}  {:>20}  {:>22}  {:>20.1}",
                r.sequence, r.correct, r.incorrect, r.accuracy
            );
            if r.flagged {
                let _ = write!(s, "  (printed {:.1})", r.printed_accuracy.unwrap_or_default());
            }
            s.push('\n');
        }
        let _ = write!(s, "{:<name_w$}  {:>20}  {:>22}  {:>20.1}", "overall", "", "", self.overall);
        if let Some(p) = self.overall_printed {
            if (p - self.overall).abs() > 1e-9 {
                let _ = write!(s, "  (printed rows {p:.1})");
            }
        }
        s.push('\n');
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes infallibly") + "\n"
    }
}
