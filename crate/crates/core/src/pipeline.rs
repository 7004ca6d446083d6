//! End-to-end commands: train a class library from labeled crops, run
//! detection, tracking and recognition over a frame sequence, and score
//! results against ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::{self, ClassLibrary, Classification, ClassifierError};
use crate::config::{ConfigError, PipelineConfig};
use crate::detector::{DetectError, MotionDetector};
use crate::evaluation::{self, AccuracyReport, CountsRow, EvalError, GroundTruthObject};
use crate::frame::{FrameError, GrayFrame};
use crate::frameio::{self, io_err, DetectionRecord, FrameIoError, FrameRecord};
use crate::loggabor::{self, FeatureVector, LogGaborBank, LogGaborError};
use crate::tracker::{TrackError, Tracker};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    FrameIo(#[from] FrameIoError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    LogGabor(#[from] LogGaborError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("model expects {model}-dimensional features but the config produces {config}")]
    FeatureDimensionMismatch { model: usize, config: usize },
    #[error("no training classes under {0}")]
    NoClasses(PathBuf),
    #[error("unknown synthetic scenario {0:?}")]
    UnknownScenario(String),
}

/// Crop-to-feature path shared by training and recognition.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    bank: LogGaborBank,
    crop_size: usize,
    pool: usize,
}

impl FeatureExtractor {
    pub fn new(config: &PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let bank = loggabor::build_bank(config.bank, config.crop_size, config.crop_size)?;
        Ok(Self {
            bank,
            crop_size: config.crop_size,
            pool: config.pool,
        })
    }

    pub fn bank(&self) -> &LogGaborBank {
        &self.bank
    }

    pub fn feature_dim(&self) -> usize {
        let side = self.crop_size.div_ceil(self.pool);
        self.bank.len() * side * side
    }

    /// Resizes `crop` to the configured square size and extracts its
    /// pooled, unit-norm Log-Gabor feature.
    pub fn features(&self, crop: &GrayFrame) -> Result<FeatureVector, PipelineError> {
        let resized = crop.resize_bilinear(self.crop_size, self.crop_size);
        let responses = loggabor::apply_bank(&resized, &self.bank)?;
        Ok(loggabor::extract_features(&responses, self.pool)?)
    }
}

fn sorted_dir_entries(dir: &Path) -> Result<Vec<PathBuf>, FrameIoError> {
    let mut entries = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<Vec<_>, _>>()?;
    entries.sort();
    Ok(entries)
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("pgm") | Some("png")
    )
}

/// Labeled crops from a `<dir>/<class>/<crop>.(pgm|png)` tree, classes and
/// crops in lexicographic order.
pub fn load_training_set(dir: &Path) -> Result<Vec<(String, Vec<GrayFrame>)>, PipelineError> {
    let mut classes = Vec::new();
    for class_dir in sorted_dir_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let label = class_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let crops = sorted_dir_entries(&class_dir)?
            .into_iter()
            .filter(|p| p.is_file() && is_image(p))
            .map(frameio::load_frame)
            .collect::<Result<Vec<_>, _>>()?;
        if crops.is_empty() {
            return Err(FrameIoError::EmptyDirectory(class_dir).into());
        }
        classes.push((label, crops));
    }
    if classes.is_empty() {
        return Err(PipelineError::NoClasses(dir.to_path_buf()));
    }
    Ok(classes)
}

/// Trains a library from in-memory labeled crops.
pub fn train_from_crops(
    config: &PipelineConfig,
    classes: &[(String, Vec<GrayFrame>)],
) -> Result<ClassLibrary, PipelineError> {
    let extractor = FeatureExtractor::new(config)?;
    let features = classes
        .iter()
        .map(|(label, crops)| {
            let feats = crops
                .par_iter()
                .map(|c| extractor.features(c).map(|f| f.values))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((label.clone(), feats))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(classifier::train_library(
        &features,
        config.pca_k,
        config.reject_threshold,
    )?)
}

/// `train`: extracts features for every crop under `train_dir`, fits the
/// library and writes it to `model_out`.
pub fn cmd_train(config: &PipelineConfig, train_dir: &Path, model_out: &Path) -> Result<ClassLibrary, PipelineError> {
    let classes = load_training_set(train_dir)?;
    let lib = train_from_crops(config, &classes)?;
    classifier::save_library(&lib, model_out)?;
    Ok(lib)
}

/// Frame-by-frame detection, tracking and recognition state.
pub struct Recognizer<'a> {
    config: &'a PipelineConfig,
    library: &'a ClassLibrary,
    extractor: FeatureExtractor,
    detector: MotionDetector,
    tracker: Tracker,
}

impl<'a> Recognizer<'a> {
    pub fn new(config: &'a PipelineConfig, library: &'a ClassLibrary) -> Result<Self, PipelineError> {
        let extractor = FeatureExtractor::new(config)?;
        if extractor.feature_dim() != library.pca.dim {
            return Err(PipelineError::FeatureDimensionMismatch {
                model: library.pca.dim,
                config: extractor.feature_dim(),
            });
        }
        Ok(Self {
            config,
            library,
            extractor,
            detector: MotionDetector::new(config.detector)?,
            tracker: Tracker::new(config.tracker)?,
        })
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    /// Processes the next frame and returns its result record.
    pub fn process(&mut self, index: usize, frame: &GrayFrame) -> Result<FrameRecord, PipelineError> {
        let detections = self.detector.process(frame)?;
        let assoc = self.tracker.associate(&detections);
        let (w, h) = frame.dims();
        let verdicts = detections
            .par_iter()
            .map(|d| {
                let b = d.bbox.padded(self.config.box_pad, w, h);
                let crop = frame.crop(b.x, b.y, b.w, b.h)?;
                let fv = self.extractor.features(&crop)?;
                Ok(self.library.classify(&fv.values)?)
            })
            .collect::<Result<Vec<Classification>, PipelineError>>()?;

        let mut records = Vec::with_capacity(detections.len());
        for ((d, &id), verdict) in detections.iter().zip(&assoc.track_ids).zip(&verdicts) {
            let track = self
                .tracker
                .track_mut(id)
                .expect("every detection is assigned a live track");
            if let Some(class) = verdict.class {
                track.vote_label(self.library.label(class))?;
            }
            records.push(DetectionRecord {
                bbox: [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h],
                centroid: [d.centroid.0, d.centroid.1],
                area: d.area,
                track_id: id,
                label: track.label().map(str::to_string),
                angle_distance: verdict.distance,
            });
        }
        Ok(FrameRecord {
            frame: index,
            detections: records,
        })
    }
}

pub const RESULTS_FILE: &str = "results.jsonl";

/// `recognize`: runs the full chain over `sequence_dir`, writing
/// `results.jsonl` and one annotated PGM per frame into `out_dir`.
pub fn cmd_recognize(
    config: &PipelineConfig,
    model_path: &Path,
    sequence_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<FrameRecord>, PipelineError> {
    let library = classifier::load_library(model_path)?;
    let sequence = frameio::load_sequence(sequence_dir)?;
    let mut recognizer = Recognizer::new(config, &library)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut records = Vec::with_capacity(sequence.frames.len());
    for (i, frame) in sequence.frames.iter().enumerate() {
        let record = recognizer.process(i, frame)?;
        let boxes: Vec<_> = record.detections.iter().map(DetectionRecord::bounding_box).collect();
        let annotated = frameio::write_annotated(frame, &boxes)?;
        frameio::save_pgm(&annotated, out_dir.join(frameio::frame_file_name(i)))?;
        records.push(record);
    }
    frameio::write_jsonl(out_dir.join(RESULTS_FILE), &records)?;
    Ok(records)
}

/// Name used for a sequence in reports: the directory holding its results
/// file, or the file stem when there is no parent.
pub fn sequence_name(results_path: &Path) -> String {
    results_path
        .parent()
        .and_then(Path::file_name)
        .or_else(|| results_path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into())
}

/// Scores one results file against its ground truth.
pub fn score_files(results: &Path, truth: &Path) -> Result<evaluation::SequenceResult, PipelineError> {
    let records: Vec<FrameRecord> = frameio::read_jsonl(results)?;
    let objects: Vec<GroundTruthObject> = frameio::read_jsonl(truth)?;
    let tracks = evaluation::summarize_tracks(&records);
    Ok(evaluation::score_sequence(&sequence_name(results), &objects, &tracks)?)
}

/// `evaluate`: scores each `(results, truth)` pair as one sequence.
pub fn cmd_evaluate(pairs: &[(PathBuf, PathBuf)]) -> Result<AccuracyReport, PipelineError> {
    let results = pairs
        .iter()
        .map(|(r, t)| score_files(r, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AccuracyReport::from_results(&results)?)
}

/// Builds a report from precomputed count rows in a JSONL file.
pub fn report_from_rows(rows_path: &Path) -> Result<AccuracyReport, PipelineError> {
    let rows: Vec<CountsRow> = frameio::read_jsonl(rows_path)?;
    Ok(evaluation::build_report(&rows)?)
}

/// Writes the text table to `out` and the JSON object next to it (`.json`;
/// when `out` itself ends in `.json` the table goes to `.txt`). Returns both
/// paths, text first.
pub fn write_report(report: &AccuracyReport, out: &Path) -> Result<(PathBuf, PathBuf), PipelineError> {
    let (text_path, json_path) = if out.extension().is_some_and(|e| e == "json") {
        (out.with_extension("txt"), out.to_path_buf())
    } else {
        (out.to_path_buf(), out.with_extension("json"))
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&text_path, report.to_text()).map_err(io_err(&text_path))?;
    fs::write(&json_path, report.to_json()).map_err(io_err(&json_path))?;
    Ok((text_path, json_path))
}
