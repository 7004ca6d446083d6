//! Frequency-domain Log-Gabor filter bank.
//!
//! Each filter is the product of a radial term, Gaussian on a log-frequency
//! axis, and an angular term, Gaussian in orientation:
//!
//! ```text
//! H(f, θ) = exp(-(ln(f/f0))² / (2 (ln σ_ratio)²)) · exp(-d(θ, θ0)² / (2 σ_θ²))
//! ```
//!
//! where `σ_ratio = σ_f / f0` and `d` is the orientation difference wrapped
//! into `[-π/2, π/2)`. Filters are sampled on the FFT grid of the frame in
//! cycles/pixel and the DC bin is always zero, so constant images produce
//! no response. Filtering is `IFFT(FFT(frame) ⊙ H)`; features are the
//! average-pooled magnitudes of those responses, normalized to unit length.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use thiserror::Error;

use crate::frame::GrayFrame;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogGaborError {
    #[error("invalid filter parameters: {0}")]
    InvalidParams(String),
    #[error("finest center frequency {0} exceeds the Nyquist limit 0.5")]
    CenterFrequencyTooHigh(f64),
    #[error("filter grid {width}x{height} is smaller than 4x4")]
    GridTooSmall { width: usize, height: usize },
    #[error("input is {found:?} but the bank was built for {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("no responses to pool")]
    EmptyResponseList,
    #[error("pooling factor must be at least 1")]
    InvalidPool,
}

/// Parameters of a single oriented Log-Gabor filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGaborFilterSpec {
    /// Center frequency, cycles/pixel.
    pub f0: f64,
    /// Preferred orientation, radians in `[0, π)`.
    pub theta0: f64,
    /// `σ_f / f0`; 0.74 gives roughly one octave, 0.55 two, 0.41 three.
    pub sigma_ratio: f64,
    /// Angular standard deviation, radians.
    pub sigma_theta: f64,
}

impl LogGaborFilterSpec {
    pub fn new(f0: f64, theta0: f64, sigma_ratio: f64, sigma_theta: f64) -> Result<Self, LogGaborError> {
        let spec = Self {
            f0,
            theta0,
            sigma_ratio,
            sigma_theta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), LogGaborError> {
        if !(self.f0 > 0.0 && self.f0 <= 0.5) {
            return Err(LogGaborError::InvalidParams(format!("f0 = {} not in (0, 0.5]", self.f0)));
        }
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio < 1.0) {
            return Err(LogGaborError::InvalidParams(format!(
                "sigma_ratio = {} not in (0, 1)",
                self.sigma_ratio
            )));
        }
        if !(self.sigma_theta > 0.0 && self.sigma_theta.is_finite()) {
            return Err(LogGaborError::InvalidParams(format!(
                "sigma_theta = {} must be positive",
                self.sigma_theta
            )));
        }
        if !(0.0..PI).contains(&self.theta0) {
            return Err(LogGaborError::InvalidParams(format!(
                "theta0 = {} not in [0, pi)",
                self.theta0
            )));
        }
        Ok(())
    }

    /// Frequencies `(f_lo, f_hi)` where the radial gain falls to one half.
    pub fn half_gain_frequencies(&self) -> (f64, f64) {
        let spread = self.sigma_ratio.ln().abs() * (2.0 * 2f64.ln()).sqrt();
        (self.f0 * (-spread).exp(), self.f0 * spread.exp())
    }
}

/// Full width at half gain of the radial term, in octaves. Depends only on
/// `sigma_ratio`.
pub fn octave_bandwidth(sigma_ratio: f64) -> f64 {
    2.0 * sigma_ratio.ln().abs() * (2.0 * 2f64.ln()).sqrt() / 2f64.ln()
}

/// Radial gain at frequency `f` (cycles/pixel). Zero at DC, one at `f0`.
pub fn radial_component(f: f64, spec: &LogGaborFilterSpec) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    let log_ratio = (f / spec.f0).ln();
    let log_sigma = spec.sigma_ratio.ln();
    (-(log_ratio * log_ratio) / (2.0 * log_sigma * log_sigma)).exp()
}

/// Wraps an orientation difference into `[-π/2, π/2)`; orientations are
/// equivalent modulo π.
pub fn wrap_orientation(delta: f64) -> f64 {
    (delta + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

/// Angular gain at orientation `theta`. One at `theta0` and at `theta0 + π`.
pub fn angular_component(theta: f64, spec: &LogGaborFilterSpec) -> f64 {
    let d = wrap_orientation(theta - spec.theta0);
    (-(d * d) / (2.0 * spec.sigma_theta * spec.sigma_theta)).exp()
}

/// Frequency in cycles/sample of FFT bin `index` for a length-`n` transform,
/// in `[-⌊n/2⌋, ⌈n/2⌉ - 1] / n`.
pub fn fft_frequency(index: usize, n: usize) -> f64 {
    let half_up = n.div_ceil(2);
    if index < half_up {
        index as f64 / n as f64
    } else {
        (index as f64 - n as f64) / n as f64
    }
}

/// One filter sampled on an FFT grid, row-major, DC at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFilter {
    pub width: usize,
    pub height: usize,
    pub gains: Vec<f64>,
    pub spec: LogGaborFilterSpec,
}

impl FrequencyFilter {
    pub fn sample(spec: LogGaborFilterSpec, width: usize, height: usize) -> Self {
        let mut gains = Vec::with_capacity(width * height);
        for row in 0..height {
            let v = fft_frequency(row, height);
            for col in 0..width {
                let u = fft_frequency(col, width);
                let f = (u * u + v * v).sqrt();
                let theta = v.atan2(u);
                gains.push(radial_component(f, &spec) * angular_component(theta, &spec));
            }
        }
        gains[0] = 0.0;
        Self {
            width,
            height,
            gains,
            spec,
        }
    }

    pub fn dc_gain(&self) -> f64 {
        self.gains[0]
    }

    pub fn max_gain(&self) -> f64 {
        self.gains.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGaborBankParams {
    pub num_scales: usize,
    pub num_orientations: usize,
    /// Wavelength of the finest scale, pixels.
    pub min_wavelength: f64,
    /// Wavelength ratio between successive scales.
    pub scale_mult: f64,
    pub sigma_ratio: f64,
    /// `sigma_theta = (π / num_orientations) * d_theta_ratio`.
    pub d_theta_ratio: f64,
}

impl Default for LogGaborBankParams {
    fn default() -> Self {
        Self {
            num_scales: 4,
            num_orientations: 6,
            min_wavelength: 3.0,
            scale_mult: 2.1,
            sigma_ratio: 0.55,
            d_theta_ratio: 1.2,
        }
    }
}

impl LogGaborBankParams {
    pub fn validate(&self) -> Result<(), LogGaborError> {
        let bad = |msg: String| Err(LogGaborError::InvalidParams(msg));
        if self.num_scales < 1 || self.num_orientations < 1 {
            return bad("need at least one scale and one orientation".into());
        }
        if !(self.min_wavelength >= 2.0) {
            return bad(format!("min_wavelength = {} must be >= 2", self.min_wavelength));
        }
        if !(self.scale_mult > 1.0 && self.scale_mult.is_finite()) {
            return bad(format!("scale_mult = {} must be > 1", self.scale_mult));
        }
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio < 1.0) {
            return bad(format!("sigma_ratio = {} not in (0, 1)", self.sigma_ratio));
        }
        if !(self.d_theta_ratio > 0.0 && self.d_theta_ratio.is_finite()) {
            return bad(format!("d_theta_ratio = {} must be positive", self.d_theta_ratio));
        }
        Ok(())
    }

    /// `f0(s) = 1 / (min_wavelength * scale_mult^s)`.
    pub fn center_frequency(&self, scale: usize) -> f64 {
        1.0 / (self.min_wavelength * self.scale_mult.powi(scale as i32))
    }

    /// `θ0(o) = o π / num_orientations`.
    pub fn orientation(&self, index: usize) -> f64 {
        index as f64 * PI / self.num_orientations as f64
    }

    pub fn sigma_theta(&self) -> f64 {
        PI / self.num_orientations as f64 * self.d_theta_ratio
    }
}

/// `num_scales * num_orientations` filters in scale-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGaborBank {
    pub filters: Vec<FrequencyFilter>,
    pub params: LogGaborBankParams,
    width: usize,
    height: usize,
}

pub fn build_bank(params: LogGaborBankParams, width: usize, height: usize) -> Result<LogGaborBank, LogGaborError> {
    params.validate()?;
    if width < 4 || height < 4 {
        return Err(LogGaborError::GridTooSmall { width, height });
    }
    let finest = params.center_frequency(0);
    if finest > 0.5 {
        return Err(LogGaborError::CenterFrequencyTooHigh(finest));
    }
    let sigma_theta = params.sigma_theta();
    let mut filters = Vec::with_capacity(params.num_scales * params.num_orientations);
    for s in 0..params.num_scales {
        for o in 0..params.num_orientations {
            let spec = LogGaborFilterSpec::new(
                params.center_frequency(s),
                params.orientation(o),
                params.sigma_ratio,
                sigma_theta,
            )?;
            filters.push(FrequencyFilter::sample(spec, width, height));
        }
    }
    Ok(LogGaborBank {
        filters,
        params,
        width,
        height,
    })
}

impl LogGaborBank {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    fn check_input(&self, width: usize, height: usize, data: &[f64]) -> Result<(), LogGaborError> {
        if (width, height) != self.dims() || data.len() != width * height {
            return Err(LogGaborError::DimensionMismatch {
                expected: self.dims(),
                found: (width, height),
            });
        }
        Ok(())
    }

    /// Complex filter outputs `IFFT(FFT(data) ⊙ H)` for every filter, in bank
    /// order. `data` is any real row-major plane of the bank's size.
    pub fn complex_responses(&self, width: usize, height: usize, data: &[f64]) -> Result<Vec<Vec<Complex64>>, LogGaborError> {
        self.check_input(width, height, data)?;
        let mut spectrum: Vec<Complex64> = data.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        fft_2d(width, height, &mut spectrum, FftDirection::Forward);
        let norm = 1.0 / (width * height) as f64;
        Ok(self
            .filters
            .par_iter()
            .map(|filter| {
                let mut buf: Vec<Complex64> = spectrum
                    .iter()
                    .zip(&filter.gains)
                    .map(|(s, &g)| s * g)
                    .collect();
                fft_2d(width, height, &mut buf, FftDirection::Inverse);
                buf.iter_mut().for_each(|c| *c *= norm);
                buf
            })
            .collect())
    }

    /// Pixelwise magnitudes of [`Self::complex_responses`].
    pub fn magnitude_responses(&self, width: usize, height: usize, data: &[f64]) -> Result<ResponseSet, LogGaborError> {
        let images = self
            .complex_responses(width, height, data)?
            .into_iter()
            .map(|resp| ResponseImage {
                width,
                height,
                values: resp.iter().map(|c| c.norm()).collect(),
            })
            .collect();
        Ok(ResponseSet {
            num_scales: self.params.num_scales,
            num_orientations: self.params.num_orientations,
            images,
        })
    }
}

/// Row-major 2D transform, in place and unnormalized.
fn fft_2d(width: usize, height: usize, buf: &mut [Complex64], direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(width, direction);
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(height, direction);
    let mut column = vec![Complex64::default(); height];
    for x in 0..width {
        for (y, c) in column.iter_mut().enumerate() {
            *c = buf[y * width + x];
        }
        col_fft.process(&mut column);
        for (y, c) in column.iter().enumerate() {
            buf[y * width + x] = *c;
        }
    }
}

/// Magnitude of one filter's response.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Responses of a whole bank, scale-major like the bank itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    pub num_scales: usize,
    pub num_orientations: usize,
    pub images: Vec<ResponseImage>,
}

/// Filters `frame` with every filter of `bank`.
pub fn apply_bank(frame: &GrayFrame, bank: &LogGaborBank) -> Result<ResponseSet, LogGaborError> {
    bank.magnitude_responses(frame.width(), frame.height(), frame.pixels())
}

/// Pooled, unit-norm Log-Gabor feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub num_scales: usize,
    pub num_orientations: usize,
    pub pooled_h: usize,
    pub pooled_w: usize,
}

pub const FEATURE_NORM_FLOOR: f64 = 1e-12;

/// Average-pools each response over `pool x pool` blocks (zero-padding to a
/// multiple of `pool`), concatenates them scale-major and scales the result
/// to unit Euclidean norm. Vectors with norm below 1e-12 stay all-zero.
pub fn extract_features(responses: &ResponseSet, pool: usize) -> Result<FeatureVector, LogGaborError> {
    if pool == 0 {
        return Err(LogGaborError::InvalidPool);
    }
    let first = responses.images.first().ok_or(LogGaborError::EmptyResponseList)?;
    let (w, h) = (first.width, first.height);
    let pooled_w = w.div_ceil(pool);
    let pooled_h = h.div_ceil(pool);
    let block = (pool * pool) as f64;
    let mut values = Vec::with_capacity(responses.images.len() * pooled_w * pooled_h);
    for img in &responses.images {
        if (img.width, img.height) != (w, h) {
            return Err(LogGaborError::DimensionMismatch {
                expected: (w, h),
                found: (img.width, img.height),
            });
        }
        let mut pooled = vec![0.0; pooled_w * pooled_h];
        for y in 0..h {
            let prow = (y / pool) * pooled_w;
            for x in 0..w {
                pooled[prow + x / pool] += img.values[y * w + x];
            }
        }
        values.extend(pooled.into_iter().map(|s| s / block));
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < FEATURE_NORM_FLOOR {
        values.iter_mut().for_each(|v| *v = 0.0);
    } else {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(FeatureVector {
        values,
        num_scales: responses.num_scales,
        num_orientations: responses.num_orientations,
        pooled_h,
        pooled_w,
    })
}
