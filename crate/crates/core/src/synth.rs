//! Seeded synthetic scenes: textured sprites translating over a noisy
//! background, with ground truth and labeled training crops.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::PipelineConfig;
use crate::evaluation::{GroundTruthObject, Keyframe};
use crate::frame::GrayFrame;
use crate::frameio::{self, io_err};
use crate::pipeline::PipelineError;

pub const SCENARIOS: [&str; 3] = ["two_class_basic", "three_object", "low_contrast"];

pub const FRAME_WIDTH: usize = 160;
pub const FRAME_HEIGHT: usize = 120;
pub const NOISE_SIGMA: f64 = 0.02;
pub const CROPS_PER_CLASS: usize = 40;

const FULL_CONTRAST: f64 = 0.4;
const LOW_CONTRAST: f64 = 0.14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Texture {
    /// 4-pixel checkerboard.
    Checker,
    /// Horizontal bands 3 pixels thick.
    Stripes,
}

impl Texture {
    /// +1 or -1 at sprite-local `(u, v)`.
    pub fn sign(self, u: usize, v: usize) -> f64 {
        let on = match self {
            Texture::Checker => (u / 4 + v / 4).is_multiple_of(2),
            Texture::Stripes => (v / 3).is_multiple_of(2),
        };
        if on {
            1.0
        } else {
            -1.0
        }
    }

    fn period(self) -> (usize, usize) {
        match self {
            Texture::Checker => (8, 8),
            Texture::Stripes => (1, 6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpriteClass {
    pub label: &'static str,
    pub texture: Texture,
    pub width: usize,
    pub height: usize,
}

pub const VEHICLE: SpriteClass = SpriteClass {
    label: "vehicle",
    texture: Texture::Checker,
    width: 36,
    height: 20,
};

pub const HUMAN: SpriteClass = SpriteClass {
    label: "human",
    texture: Texture::Stripes,
    width: 16,
    height: 32,
};

/// One object's straight-line path, visible on frames `first..=last`.
#[derive(Debug, Clone, Copy)]
struct Path2 {
    class: SpriteClass,
    start: (i64, i64),
    velocity: (i64, i64),
    first: usize,
    last: usize,
}

impl Path2 {
    fn position(&self, frame: usize) -> Option<(usize, usize)> {
        if frame < self.first || frame > self.last {
            return None;
        }
        let t = (frame - self.first) as i64;
        let x = self.start.0 + self.velocity.0 * t;
        let y = self.start.1 + self.velocity.1 * t;
        Some((x as usize, y as usize))
    }
}

const fn path(class: SpriteClass, start: (i64, i64), velocity: (i64, i64), first: usize, last: usize) -> Path2 {
    Path2 {
        class,
        start,
        velocity,
        first,
        last,
    }
}

// Lanes are separated vertically so simultaneous sprites never touch.
const MIXED_TRAFFIC: [Path2; 6] = [
    path(VEHICLE, (4, 10), (3, 0), 3, 38),
    path(HUMAN, (136, 46), (-2, 0), 12, 70),
    path(VEHICLE, (118, 90), (-3, 0), 50, 85),
    path(HUMAN, (8, 6), (2, 0), 80, 135),
    path(VEHICLE, (8, 52), (3, 0), 95, 130),
    path(HUMAN, (130, 84), (-2, 0), 100, 145),
];

const THREE_LANES: [Path2; 3] = [
    path(VEHICLE, (6, 10), (3, 0), 4, 36),
    path(HUMAN, (130, 46), (-2, 0), 8, 60),
    path(VEHICLE, (112, 90), (-3, 0), 10, 42),
];

#[derive(Debug, Clone)]
struct ScenarioPlan {
    frames: usize,
    contrast: f64,
    paths: Vec<Path2>,
}

fn plan(scenario: &str) -> Result<ScenarioPlan, PipelineError> {
    match scenario {
        "two_class_basic" => Ok(ScenarioPlan {
            frames: 150,
            contrast: FULL_CONTRAST,
            paths: MIXED_TRAFFIC.to_vec(),
        }),
        "three_object" => Ok(ScenarioPlan {
            frames: 70,
            contrast: FULL_CONTRAST,
            paths: THREE_LANES.to_vec(),
        }),
        "low_contrast" => Ok(ScenarioPlan {
            frames: 150,
            contrast: LOW_CONTRAST,
            paths: MIXED_TRAFFIC.to_vec(),
        }),
        other => Err(PipelineError::UnknownScenario(other.to_string())),
    }
}

/// Noise-free backdrop: a gentle horizontal ramp from 0.45 to 0.55.
pub fn background_level(x: f64) -> f64 {
    0.45 + 0.1 * x / FRAME_WIDTH as f64
}

pub fn clean_background() -> GrayFrame {
    let mut f = GrayFrame::zeros(FRAME_WIDTH, FRAME_HEIGHT);
    for y in 0..FRAME_HEIGHT {
        for x in 0..FRAME_WIDTH {
            f.set(x, y, background_level(x as f64));
        }
    }
    f
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub scenario: String,
    pub frames: Vec<GrayFrame>,
    pub truth: Vec<GroundTruthObject>,
    /// `(label, crops)` in label order.
    pub training: Vec<(String, Vec<GrayFrame>)>,
    /// Sprite-minus-background amplitude.
    pub contrast: f64,
}

fn add_noise(frame: &mut GrayFrame, rng: &mut ChaCha8Rng) {
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("positive sigma");
    let (w, h) = frame.dims();
    for y in 0..h {
        for x in 0..w {
            let v = frame.get(x, y) + noise.sample(rng);
            frame.set(x, y, v);
        }
    }
}

fn render_sequence(plan: &ScenarioPlan, rng: &mut ChaCha8Rng) -> (Vec<GrayFrame>, Vec<GroundTruthObject>) {
    let clean = clean_background();
    let mut truth: Vec<GroundTruthObject> = plan
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| GroundTruthObject {
            object_id: i as u64,
            label: p.class.label.to_string(),
            keyframes: Vec::new(),
        })
        .collect();
    let mut frames = Vec::with_capacity(plan.frames);
    for t in 0..plan.frames {
        let mut frame = clean.clone();
        for (obj, p) in truth.iter_mut().zip(&plan.paths) {
            let Some((x0, y0)) = p.position(t) else {
                continue;
            };
            let c = p.class;
            for v in 0..c.height {
                for u in 0..c.width {
                    let (x, y) = (x0 + u, y0 + v);
                    let value = frame.get(x, y) + plan.contrast * c.texture.sign(u, v);
                    frame.set(x, y, value);
                }
            }
            obj.keyframes.push(Keyframe {
                frame: t,
                bbox: [x0, y0, c.width, c.height],
            });
        }
        add_noise(&mut frame, rng);
        frames.push(frame);
    }
    (frames, truth)
}

/// A sprite with jittered size and texture phase, padded like a detection
/// crop, over a random stretch of the backdrop.
fn training_crop(class: SpriteClass, contrast: f64, pad: f64, rng: &mut ChaCha8Rng) -> GrayFrame {
    let w = ((class.width as f64) * rng.random_range(0.85..1.15)).round() as usize;
    let h = ((class.height as f64) * rng.random_range(0.85..1.15)).round() as usize;
    let (pu, pv) = class.texture.period();
    let (du, dv) = (rng.random_range(0..pu), rng.random_range(0..pv));
    let px = (pad * w as f64).round() as usize;
    let py = (pad * h as f64).round() as usize;
    let offset = rng.random_range(0.0..FRAME_WIDTH as f64);
    let (cw, ch) = (w + 2 * px, h + 2 * py);
    let mut crop = GrayFrame::zeros(cw, ch);
    for y in 0..ch {
        for x in 0..cw {
            let mut v = background_level(offset + x as f64);
            if (px..px + w).contains(&x) && (py..py + h).contains(&y) {
                v += contrast * class.texture.sign(x - px + du, y - py + dv);
            }
            crop.set(x, y, v);
        }
    }
    add_noise(&mut crop, rng);
    crop
}

/// Builds `scenario` in memory. The same config seed always yields the same
/// scene.
pub fn generate(config: &PipelineConfig, scenario: &str) -> Result<SyntheticScene, PipelineError> {
    let plan = plan(scenario)?;
    let mut seq_rng = ChaCha8Rng::seed_from_u64(config.seed);
    seq_rng.set_stream(0);
    let mut train_rng = ChaCha8Rng::seed_from_u64(config.seed);
    train_rng.set_stream(1);

    let (frames, truth) = render_sequence(&plan, &mut seq_rng);
    let mut classes = [HUMAN, VEHICLE];
    classes.sort_by_key(|c| c.label);
    let training = classes
        .iter()
        .map(|&c| {
            let crops = (0..CROPS_PER_CLASS)
                .map(|_| training_crop(c, plan.contrast, config.box_pad, &mut train_rng))
                .collect();
            (c.label.to_string(), crops)
        })
        .collect();
    Ok(SyntheticScene {
        scenario: scenario.to_string(),
        frames,
        truth,
        training,
        contrast: plan.contrast,
    })
}

pub const SEQUENCE_DIR: &str = "sequence";
pub const TRAIN_DIR: &str = "train";
pub const TRUTH_FILE: &str = "truth.jsonl";

/// `synth`: writes `sequence/frame_NNNNNN.pgm`, `truth.jsonl` and
/// `train/<label>/crop_NNN.pgm` under `out_dir`.
pub fn cmd_synth(config: &PipelineConfig, out_dir: &Path, scenario: &str) -> Result<SyntheticScene, PipelineError> {
    config.validate()?;
    let scene = generate(config, scenario)?;
    let seq_dir = out_dir.join(SEQUENCE_DIR);
    fs::create_dir_all(&seq_dir).map_err(io_err(&seq_dir))?;
    for (i, f) in scene.frames.iter().enumerate() {
        frameio::save_pgm(f, seq_dir.join(frameio::frame_file_name(i)))?;
    }
    frameio::write_jsonl(out_dir.join(TRUTH_FILE), &scene.truth)?;
    for (label, crops) in &scene.training {
        let dir = out_dir.join(TRAIN_DIR).join(label);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (i, c) in crops.iter().enumerate() {
            frameio::save_pgm(c, dir.join(format!("crop_{i:03}.pgm")))?;
        }
    }
    Ok(scene)
}
