//! Frame loading (binary PGM and 8-bit PNG), numbered sequences, annotated
//! output frames and the per-frame JSONL result records.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use image::DynamicImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::BoundingBox;
use crate::frame::{FrameError, GrayFrame};

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("{0} has zero width or height")]
    DimensionZero(PathBuf),
    #[error("no frame_NNNNNN.(pgm|png) files in {0}")]
    EmptyDirectory(PathBuf),
    #[error("frame {index} is {found:?}, expected {expected:?}")]
    InconsistentDimensions {
        index: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("frame numbering has a gap: expected index {expected}, found {found}")]
    NumberingGap { expected: usize, found: usize },
    #[error("frame index {0} appears more than once")]
    DuplicateIndex(usize),
    #[error("box {bbox:?} exceeds {width}x{height} frame")]
    BoxOutOfBounds {
        bbox: BoundingBox,
        width: usize,
        height: usize,
    },
    #[error("malformed JSONL at {path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FrameIoError + '_ {
    move |source| FrameIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Frames of one clip, all sharing the same dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<GrayFrame>,
    pub source_id: String,
    pub frame_rate_hint: Option<f64>,
}

impl FrameSequence {
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(GrayFrame::dims)
    }
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Loads a P5 PGM (maxval 255) or 8-bit gray/RGB PNG, sniffing the format
/// from the file contents.
pub fn load_frame(path: impl AsRef<Path>) -> Result<GrayFrame, FrameIoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FrameIoError::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_frame(&bytes, path)
}

pub fn decode_frame(bytes: &[u8], path: &Path) -> Result<GrayFrame, FrameIoError> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes, path)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes, path)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(FrameIoError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("netpbm variant P{} (only binary P5 is read)", bytes[1] as char),
        })
    } else if bytes.len() < 2 {
        Err(FrameIoError::UnreadableFile {
            path: path.to_path_buf(),
            reason: "file too short to identify".into(),
        })
    } else {
        Err(FrameIoError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "neither PGM nor PNG".into(),
        })
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayFrame, FrameIoError> {
    let unreadable = |reason: &str| FrameIoError::UnreadableFile {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number().ok_or_else(|| unreadable("truncated PGM header (width)"))?;
    let height = cur.number().ok_or_else(|| unreadable("truncated PGM header (height)"))?;
    let maxval = cur.number().ok_or_else(|| unreadable("truncated PGM header (maxval)"))?;
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(unreadable("truncated PGM header"));
    }
    let data = &bytes[cur.pos + 1..];
    if maxval != 255 {
        return Err(FrameIoError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("PGM maxval {maxval} (only 255 is supported)"),
        });
    }
    if width == 0 || height == 0 {
        return Err(FrameIoError::DimensionZero(path.to_path_buf()));
    }
    let n = width * height;
    if data.len() < n {
        return Err(unreadable(&format!(
            "PGM raster holds {} bytes, expected {n}",
            data.len()
        )));
    }
    Ok(GrayFrame::from_u8(width, height, &data[..n])?)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<GrayFrame, FrameIoError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| {
        FrameIoError::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(FrameIoError::DimensionZero(path.to_path_buf()));
    }
    match img {
        DynamicImage::ImageLuma8(buf) => Ok(GrayFrame::from_u8(w, h, buf.as_raw())?),
        DynamicImage::ImageRgb8(buf) => {
            let pixels = buf
                .as_raw()
                .chunks_exact(3)
                .map(|c| {
                    let luma = 0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2]);
                    (luma / 255.0).clamp(0.0, 1.0)
                })
                .collect();
            Ok(GrayFrame::new(w, h, pixels)?)
        }
        other => Err(FrameIoError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("PNG color type {:?} (need 8-bit gray or RGB)", other.color()),
        }),
    }
}

/// Binary P5 encoding, intensities quantized by `round(p * 255)`.
pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.to_u8());
    out
}

pub fn save_pgm(frame: &GrayFrame, path: impl AsRef<Path>) -> Result<(), FrameIoError> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(frame)).map_err(io_err(path))
}

/// Index encoded in a `frame_NNNNNN.pgm|png` filename.
pub fn frame_index(name: &str) -> Option<usize> {
    let stem = name.strip_prefix("frame_")?;
    let digits = stem.strip_suffix(".pgm").or_else(|| stem.strip_suffix(".png"))?;
    if digits.len() < 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.pgm")
}

/// Loads every `frame_NNNNNN.(pgm|png)` in `dir`, ordered by index.
pub fn load_sequence(dir: impl AsRef<Path>) -> Result<FrameSequence, FrameIoError> {
    let dir = dir.as_ref();
    let mut entries: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        if let Some(idx) = name.to_str().and_then(frame_index) {
            entries.push((idx, entry.path()));
        }
    }
    if entries.is_empty() {
        return Err(FrameIoError::EmptyDirectory(dir.to_path_buf()));
    }
    entries.sort();
    for (pos, (idx, _)) in entries.iter().enumerate() {
        if *idx < pos {
            return Err(FrameIoError::DuplicateIndex(*idx));
        }
        if *idx != pos {
            return Err(FrameIoError::NumberingGap {
                expected: pos,
                found: *idx,
            });
        }
    }
    let mut frames: Vec<GrayFrame> = Vec::with_capacity(entries.len());
    for (idx, path) in &entries {
        let frame = load_frame(path)?;
        if let Some(first) = frames.first() {
            if first.dims() != frame.dims() {
                return Err(FrameIoError::InconsistentDimensions {
                    index: *idx,
                    expected: first.dims(),
                    found: frame.dims(),
                });
            }
        }
        frames.push(frame);
    }
    let source_id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(FrameSequence {
        frames,
        source_id,
        frame_rate_hint: None,
    })
}

/// Copy of `frame` with a 1-pixel border of intensity 1.0 drawn around each
/// box. Labels are not rasterized; they belong in the JSONL sidecar.
pub fn write_annotated(frame: &GrayFrame, boxes: &[BoundingBox]) -> Result<GrayFrame, FrameIoError> {
    let (width, height) = frame.dims();
    if let Some(bad) = boxes.iter().find(|b| !b.fits_in(width, height)) {
        return Err(FrameIoError::BoxOutOfBounds {
            bbox: *bad,
            width,
            height,
        });
    }
    let mut out = frame.clone();
    for b in boxes {
        let (x1, y1) = (b.right() - 1, b.bottom() - 1);
        for x in b.x..=x1 {
            out.set(x, b.y, 1.0);
            out.set(x, y1, 1.0);
        }
        for y in b.y..=y1 {
            out.set(b.x, y, 1.0);
            out.set(x1, y, 1.0);
        }
    }
    Ok(out)
}

/// One detection in the per-frame results sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(rename = "box")]
    pub bbox: [usize; 4],
    pub centroid: [f64; 2],
    pub area: usize,
    pub track_id: u64,
    pub label: Option<String>,
    pub angle_distance: Option<f64>,
}

impl DetectionRecord {
    pub fn bounding_box(&self) -> BoundingBox {
        let [x, y, w, h] = self.bbox;
        BoundingBox::new(x, y, w, h)
    }
}

/// One line of the results JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub detections: Vec<DetectionRecord>,
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<(), FrameIoError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize infallibly");
        buf.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(&buf).map_err(io_err(path))
}

/// Reads one JSON value per nonblank line.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>, FrameIoError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| FrameIoError::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FrameIoError::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}
