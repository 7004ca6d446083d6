//! Moving-object recognition from video: background-subtraction detection,
//! centroid tracking, and Log-Gabor texture features classified in a PCA
//! subspace by angle to class means.

pub mod classifier;
pub mod config;
pub mod detector;
pub mod evaluation;
pub mod frame;
pub mod frameio;
pub mod linalg;
pub mod loggabor;
pub mod pipeline;
pub mod subspace;
pub mod synth;
pub mod tracker;

pub use classifier::{angle_distance, ClassLibrary, Classification};
pub use config::PipelineConfig;
pub use detector::{BoundingBox, Detection, MotionDetector};
pub use frame::GrayFrame;
pub use loggabor::{build_bank, LogGaborBank, LogGaborBankParams};
pub use pipeline::PipelineError;
pub use subspace::PcaModel;
pub use tracker::{Tracker, TrackerParams};
