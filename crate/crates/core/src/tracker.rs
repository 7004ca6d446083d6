//! Track maintenance from centroid proximity and area similarity.

use thiserror::Error;

use crate::detector::{BoundingBox, Detection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("label must be nonempty")]
    EmptyLabel,
    #[error("invalid tracker parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams {
    /// Largest centroid displacement accepted for a match, pixels.
    pub gate_radius: f64,
    /// Largest accepted `max(area) / min(area)`.
    pub area_ratio_max: f64,
    /// Consecutive unmatched frames a track survives.
    pub max_misses: usize,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            gate_radius: 40.0,
            area_ratio_max: 2.0,
            max_misses: 5,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<(), TrackError> {
        if !(self.gate_radius > 0.0) {
            return Err(TrackError::InvalidParams(format!(
                "gate_radius = {} must be positive",
                self.gate_radius
            )));
        }
        if !(self.area_ratio_max >= 1.0) {
            return Err(TrackError::InvalidParams(format!(
                "area_ratio_max = {} must be >= 1",
                self.area_ratio_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub centroid: (f64, f64),
    pub area: usize,
    pub bbox: BoundingBox,
    /// Frames since creation, counting the creation frame.
    pub age: usize,
    /// Consecutive frames without a matching detection.
    pub misses: usize,
    // insertion order doubles as the tie-break order
    votes: Vec<(String, usize)>,
}

impl Track {
    pub fn new(id: u64, detection: &Detection) -> Self {
        Self {
            id,
            centroid: detection.centroid,
            area: detection.area,
            bbox: detection.bbox,
            age: 1,
            misses: 0,
            votes: Vec::new(),
        }
    }

    pub fn label_votes(&self) -> &[(String, usize)] {
        &self.votes
    }

    /// Majority label; ties go to the label that was voted for first.
    pub fn label(&self) -> Option<&str> {
        let mut best: Option<&(String, usize)> = None;
        for entry in &self.votes {
            if best.is_none_or(|b| entry.1 > b.1) {
                best = Some(entry);
            }
        }
        best.map(|(l, _)| l.as_str())
    }

    pub fn vote_label(&mut self, label: &str) -> Result<(), TrackError> {
        if label.is_empty() {
            return Err(TrackError::EmptyLabel);
        }
        match self.votes.iter_mut().find(|(l, _)| l == label) {
            Some(entry) => entry.1 += 1,
            None => self.votes.push((label.to_string(), 1)),
        }
        Ok(())
    }
}

/// Centroid distance when the pair passes both gates, `None` otherwise.
pub fn association_cost(track: &Track, detection: &Detection, params: &TrackerParams) -> Option<f64> {
    let dx = track.centroid.0 - detection.centroid.0;
    let dy = track.centroid.1 - detection.centroid.1;
    let dist = dx.hypot(dy);
    let (lo, hi) = if track.area <= detection.area {
        (track.area, detection.area)
    } else {
        (detection.area, track.area)
    };
    let ratio_ok = lo > 0 && hi as f64 / lo as f64 <= params.area_ratio_max;
    (dist <= params.gate_radius && ratio_ok).then_some(dist)
}

/// Greedy one-to-one matching by ascending cost over the finite entries of
/// `costs[row][col]`. Equal costs are taken in `(row, col)` order.
pub fn greedy_assignment(costs: &[Vec<Option<f64>>]) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = costs
        .iter()
        .enumerate()
        .flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(c, cost)| cost.filter(|v| v.is_finite()).map(|v| (v, r, c)))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let cols = costs.iter().map(Vec::len).max().unwrap_or(0);
    let mut row_used = vec![false; costs.len()];
    let mut col_used = vec![false; cols];
    let mut matches = Vec::new();
    for (_, r, c) in candidates {
        if !row_used[r] && !col_used[c] {
            row_used[r] = true;
            col_used[c] = true;
            matches.push((r, c));
        }
    }
    matches
}

/// Result of one association round.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// Track id assigned to each detection, indexed like the input.
    pub track_ids: Vec<u64>,
    /// `(track index before the round, detection index)` pairs that matched.
    pub matches: Vec<(usize, usize)>,
}

/// Track set for one sequence. Ids are sequential and never reused.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Result<Self, TrackError> {
        params.validate()?;
        Ok(Self {
            params,
            tracks: Vec::new(),
            next_id: 0,
        })
    }

    pub fn with_tracks(params: TrackerParams, tracks: Vec<Track>) -> Result<Self, TrackError> {
        params.validate()?;
        let next_id = tracks.iter().map(|t| t.id + 1).max().unwrap_or(0);
        Ok(Self {
            params,
            tracks,
            next_id,
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn track_mut(&mut self, id: u64) -> Option<&mut Track> {
        self.tracks.iter_mut().find(|t| t.id == id)
    }

    /// Matches `detections` to live tracks, spawns tracks for the leftovers
    /// and ages out tracks that have missed more than `max_misses` frames.
    pub fn associate(&mut self, detections: &[Detection]) -> Association {
        let costs: Vec<Vec<Option<f64>>> = self
            .tracks
            .iter()
            .map(|t| {
                detections
                    .iter()
                    .map(|d| association_cost(t, d, &self.params))
                    .collect()
            })
            .collect();
        let matches = greedy_assignment(&costs);

        let mut track_ids = vec![u64::MAX; detections.len()];
        let mut matched_track = vec![false; self.tracks.len()];
        for &(ti, di) in &matches {
            let d = &detections[di];
            let t = &mut self.tracks[ti];
            t.centroid = d.centroid;
            t.area = d.area;
            t.bbox = d.bbox;
            t.misses = 0;
            t.age += 1;
            matched_track[ti] = true;
            track_ids[di] = t.id;
        }
        for (t, matched) in self.tracks.iter_mut().zip(&matched_track) {
            if !matched {
                t.misses += 1;
                t.age += 1;
            }
        }
        let max_misses = self.params.max_misses;
        self.tracks.retain(|t| t.misses <= max_misses);
        for (di, d) in detections.iter().enumerate() {
            if track_ids[di] == u64::MAX {
                let id = self.next_id;
                self.next_id += 1;
                self.tracks.push(Track::new(id, d));
                track_ids[di] = id;
            }
        }
        Association { track_ids, matches }
    }
}
