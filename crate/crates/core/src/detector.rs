//! Moving-object detection by running-average background subtraction.
//!
//! Foreground is `|frame - background| > diff_threshold`, cleaned with one
//! 3x3 opening and split into 8-connected components. Each surviving
//! component becomes a [`Detection`] carrying the centroid and area that the
//! tracker consumes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::GrayFrame;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("frame is {found:?} but background is {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("difference threshold {0} must lie in (0, 1)")]
    InvalidThreshold(f64),
    #[error("learning rate {0} must lie in (0, 1]")]
    InvalidAlpha(f64),
}

/// Axis-aligned pixel box: top-left corner plus extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    /// Exclusive right edge.
    pub fn right(&self) -> usize {
        self.x + self.w
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.right() <= width && self.bottom() <= height
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64
            && py >= self.y as f64
            && px <= (self.right() - 1) as f64
            && py <= (self.bottom() - 1) as f64
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let left = self.x.max(other.x);
        let top = self.y.max(other.y);
        let right = self.right().min(other.right());
        let bottom = self.bottom().min(other.bottom());
        if right <= left || bottom <= top {
            return 0.0;
        }
        let inter = ((right - left) * (bottom - top)) as f64;
        let union = (self.area() + other.area()) as f64 - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Grows each side by `round(fraction * extent)`, clipped to the frame.
    pub fn padded(&self, fraction: f64, width: usize, height: usize) -> BoundingBox {
        let px = (fraction * self.w as f64).round().max(0.0) as usize;
        let py = (fraction * self.h as f64).round().max(0.0) as usize;
        let x0 = self.x.saturating_sub(px);
        let y0 = self.y.saturating_sub(py);
        let x1 = (self.right() + px).min(width);
        let y1 = (self.bottom() + py).min(height);
        BoundingBox::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// A connected foreground blob.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    /// Mean member coordinate `(cx, cy)`.
    pub centroid: (f64, f64),
    /// Member pixel count after morphology.
    pub area: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub diff_threshold: f64,
    pub min_area: usize,
    pub alpha: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            diff_threshold: 0.12,
            min_area: 60,
            alpha: 0.02,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.diff_threshold > 0.0 && self.diff_threshold < 1.0) {
            return Err(DetectError::InvalidThreshold(self.diff_threshold));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(DetectError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

fn check_dims(a: &GrayFrame, b: &GrayFrame) -> Result<(), DetectError> {
    if a.dims() != b.dims() {
        return Err(DetectError::DimensionMismatch {
            expected: a.dims(),
            found: b.dims(),
        });
    }
    Ok(())
}

/// `bg' = (1 - alpha) * bg + alpha * frame`, elementwise.
pub fn update_background(
    bg: &GrayFrame,
    frame: &GrayFrame,
    alpha: f64,
) -> Result<GrayFrame, DetectError> {
    check_dims(bg, frame)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DetectError::InvalidAlpha(alpha));
    }
    let pixels = bg
        .pixels()
        .iter()
        .zip(frame.pixels())
        .map(|(&b, &f)| (b + alpha * (f - b)).clamp(0.0, 1.0))
        .collect();
    Ok(GrayFrame::new(bg.width(), bg.height(), pixels).expect("convex combination stays in [0, 1]"))
}

/// Binary mask of `|frame - bg| > threshold`, row-major.
pub fn foreground_mask(
    frame: &GrayFrame,
    bg: &GrayFrame,
    diff_threshold: f64,
) -> Result<Vec<bool>, DetectError> {
    check_dims(bg, frame)?;
    if !(diff_threshold > 0.0 && diff_threshold < 1.0) {
        return Err(DetectError::InvalidThreshold(diff_threshold));
    }
    Ok(frame
        .pixels()
        .iter()
        .zip(bg.pixels())
        .map(|(&f, &b)| (f - b).abs() > diff_threshold)
        .collect())
}

// Pixels outside the frame count as background for both passes.
fn erode(mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            if !mask[y * width + x] || x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                continue;
            }
            out[y * width + x] = (y - 1..=y + 1)
                .all(|ny| (x - 1..=x + 1).all(|nx| mask[ny * width + nx]));
        }
    }
    out
}

fn dilate(mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            if !mask[y * width + x] {
                continue;
            }
            for ny in y.saturating_sub(1)..=(y + 1).min(height - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(width - 1) {
                    out[ny * width + nx] = true;
                }
            }
        }
    }
    out
}

/// One 3x3 morphological opening (erode, then dilate) with 8-neighborhood.
pub fn open_mask(mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    dilate(&erode(mask, width, height), width, height)
}

/// 8-connected components of `mask`, each returned as its member pixel list
/// in discovery order.
pub fn connected_components(mask: &[bool], width: usize, height: usize) -> Vec<Vec<(usize, usize)>> {
    let mut visited = vec![false; mask.len()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(idx) = queue.pop_front() {
            let (x, y) = (idx % width, idx / width);
            members.push((x, y));
            for ny in y.saturating_sub(1)..=(y + 1).min(height - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(width - 1) {
                    let n = ny * width + nx;
                    if mask[n] && !visited[n] {
                        visited[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        components.push(members);
    }
    components
}

fn summarize(members: &[(usize, usize)]) -> Detection {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in members {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
        sx += x as f64;
        sy += y as f64;
    }
    let n = members.len() as f64;
    Detection {
        bbox: BoundingBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
        centroid: (sx / n, sy / n),
        area: members.len(),
    }
}

/// Detects moving blobs in `frame` against background `bg`.
///
/// Output is sorted by the top-left `(y, x)` of each box, so it does not
/// depend on the order in which components were discovered.
pub fn detect(
    frame: &GrayFrame,
    bg: &GrayFrame,
    diff_threshold: f64,
    min_area: usize,
) -> Result<Vec<Detection>, DetectError> {
    let (w, h) = frame.dims();
    let mask = open_mask(&foreground_mask(frame, bg, diff_threshold)?, w, h);
    let mut detections: Vec<Detection> = connected_components(&mask, w, h)
        .iter()
        .filter(|c| c.len() >= min_area)
        .map(|c| summarize(c))
        .collect();
    detections.sort_by_key(|d| (d.bbox.y, d.bbox.x, d.bbox.h, d.bbox.w, d.area));
    Ok(detections)
}

/// Background state for one sequence, initialized from its first frame.
#[derive(Debug, Clone)]
pub struct MotionDetector {
    params: DetectorParams,
    background: Option<GrayFrame>,
}

impl MotionDetector {
    pub fn new(params: DetectorParams) -> Result<Self, DetectError> {
        params.validate()?;
        Ok(Self {
            params,
            background: None,
        })
    }

    pub fn background(&self) -> Option<&GrayFrame> {
        self.background.as_ref()
    }

    /// Updates the background with `frame`, then detects against it.
    pub fn process(&mut self, frame: &GrayFrame) -> Result<Vec<Detection>, DetectError> {
        let bg = match self.background.take() {
            None => frame.clone(),
            Some(bg) => update_background(&bg, frame, self.params.alpha)?,
        };
        let detections = detect(frame, &bg, self.params.diff_threshold, self.params.min_area);
        self.background = Some(bg);
        detections
    }
}
