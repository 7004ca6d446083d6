//! Nearest-class-mean classification by angle in the PCA subspace.
//!
//! Training projects every feature vector with one PCA fitted jointly over
//! all classes and stores the mean projection per class. A test vector is
//! projected the same way and assigned to the class mean with the smallest
//! angle, or rejected as unknown when that angle exceeds the library's
//! threshold.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::linalg::norm;
use crate::subspace::{self, PcaModel, SubspaceError};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("vector norm below 1e-12; angle undefined")]
    ZeroVector,
    #[error("vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("class {0:?} has no training features")]
    EmptyClass(String),
    #[error("class label must be nonempty")]
    EmptyLabel,
    #[error("class label {0:?} appears twice")]
    DuplicateLabel(String),
    #[error("reject threshold {0} must lie in (0, pi/2]")]
    InvalidThreshold(f64),
    #[error("input has length {found}, library expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error("not a version-1 LGPC model library: {0}")]
    ModelVersionMismatch(String),
    #[error("corrupt model library: {0}")]
    CorruptModel(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

const ZERO_NORM: f64 = 1e-12;

/// Angle between `a` and `b`: `arccos(a·b / (‖a‖‖b‖))`, always in `[0, π]`.
pub fn angle_distance(a: &[f64], b: &[f64]) -> Result<f64, ClassifierError> {
    if a.len() != b.len() {
        return Err(ClassifierError::LengthMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Err(ClassifierError::ZeroVector);
    }
    // 2·atan2(‖â − b̂‖, ‖â + b̂‖) equals arccos of the clamped cosine but
    // keeps full precision for nearly parallel vectors.
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (ux, uy) = (x / na, y / nb);
        diff += (ux - uy) * (ux - uy);
        sum += (ux + uy) * (ux + uy);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).clamp(0.0, PI))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEntry {
    pub label: String,
    /// Mean projected feature, length `pca.rank`.
    pub mean_feature: Vec<f64>,
}

/// The trained model: joint PCA plus one mean projection per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLibrary {
    pub pca: PcaModel,
    pub classes: Vec<ClassEntry>,
    pub reject_threshold: f64,
}

/// Outcome of [`ClassLibrary::classify`]. `class` is `None` for unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: Option<usize>,
    /// Smallest angle to any class mean; `None` when the projection is zero.
    pub distance: Option<f64>,
}

fn check_threshold(t: f64) -> Result<(), ClassifierError> {
    if t > 0.0 && t <= FRAC_PI_2 {
        Ok(())
    } else {
        Err(ClassifierError::InvalidThreshold(t))
    }
}

/// Fits the joint PCA over every class's features and stores each class's
/// mean projection. Class order is preserved and breaks distance ties.
pub fn train_library(
    features_by_class: &[(String, Vec<Vec<f64>>)],
    k: usize,
    reject_threshold: f64,
) -> Result<ClassLibrary, ClassifierError> {
    check_threshold(reject_threshold)?;
    if features_by_class.len() < 2 {
        return Err(ClassifierError::TooFewClasses(features_by_class.len()));
    }
    for (i, (label, feats)) in features_by_class.iter().enumerate() {
        if label.is_empty() {
            return Err(ClassifierError::EmptyLabel);
        }
        if features_by_class[..i].iter().any(|(l, _)| l == label) {
            return Err(ClassifierError::DuplicateLabel(label.clone()));
        }
        if feats.is_empty() {
            return Err(ClassifierError::EmptyClass(label.clone()));
        }
    }
    let all: Vec<&[f64]> = features_by_class
        .iter()
        .flat_map(|(_, feats)| feats.iter().map(Vec::as_slice))
        .collect();
    let pca = subspace::fit(&all, k)?;
    let classes = features_by_class
        .iter()
        .map(|(label, feats)| {
            let mut mean = vec![0.0; pca.rank];
            for f in feats {
                let p = pca.project(f)?;
                mean.iter_mut().zip(&p).for_each(|(m, v)| *m += v);
            }
            mean.iter_mut().for_each(|m| *m /= feats.len() as f64);
            Ok(ClassEntry {
                label: label.clone(),
                mean_feature: mean,
            })
        })
        .collect::<Result<Vec<_>, ClassifierError>>()?;
    Ok(ClassLibrary {
        pca,
        classes,
        reject_threshold,
    })
}

impl ClassLibrary {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.label.as_str())
    }

    pub fn label(&self, class: usize) -> &str {
        &self.classes[class].label
    }

    /// Closest class mean by angle, ignoring the reject threshold. Classes
    /// whose mean is the zero vector are never chosen.
    pub fn nearest_class(&self, projected: &[f64]) -> Option<(usize, f64)> {
        if norm(projected) < ZERO_NORM {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, class) in self.classes.iter().enumerate() {
            let Ok(d) = angle_distance(projected, &class.mean_feature) else {
                continue;
            };
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    /// Classifies an already projected vector.
    pub fn classify_projected(&self, projected: &[f64]) -> Classification {
        match self.nearest_class(projected) {
            None => Classification {
                class: None,
                distance: None,
            },
            Some((i, d)) => Classification {
                class: (d <= self.reject_threshold).then_some(i),
                distance: Some(d),
            },
        }
    }

    pub fn classify(&self, x: &[f64]) -> Result<Classification, ClassifierError> {
        if x.len() != self.pca.dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.pca.dim,
                found: x.len(),
            });
        }
        Ok(self.classify_projected(&self.pca.project(x)?))
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        check_threshold(self.reject_threshold)?;
        for (i, c) in self.classes.iter().enumerate() {
            if c.label.is_empty() {
                return Err(ClassifierError::EmptyLabel);
            }
            if self.classes[..i].iter().any(|o| o.label == c.label) {
                return Err(ClassifierError::DuplicateLabel(c.label.clone()));
            }
            if c.mean_feature.len() != self.pca.rank {
                return Err(ClassifierError::CorruptModel(format!(
                    "class {:?} mean has length {}, rank is {}",
                    c.label,
                    c.mean_feature.len(),
                    self.pca.rank
                )));
            }
        }
        Ok(())
    }
}

pub const MODEL_MAGIC: &[u8; 4] = b"LGPC";
pub const MODEL_VERSION: u32 = 1;

/// Little-endian binary model library.
///
/// Layout: magic `LGPC`, version u32, d u32, k u32, mean d×f64, basis d×k
/// f64 row-major, eigenvalues k×f64, reject threshold f64, class count u32,
/// then per class a u32 byte length, the UTF-8 label and k×f64 mean.
pub fn encode_library(lib: &ClassLibrary) -> Vec<u8> {
    let pca = &lib.pca;
    let mut out = Vec::with_capacity(32 + 8 * (pca.dim * (pca.rank + 1)));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(pca.dim as u32).to_le_bytes());
    out.extend_from_slice(&(pca.rank as u32).to_le_bytes());
    let mut put = |vals: &[f64]| vals.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    put(&pca.mean);
    put(&pca.basis);
    put(&pca.eigenvalues);
    put(&[lib.reject_threshold]);
    out.extend_from_slice(&(lib.classes.len() as u32).to_le_bytes());
    for c in &lib.classes {
        out.extend_from_slice(&(c.label.len() as u32).to_le_bytes());
        out.extend_from_slice(c.label.as_bytes());
        c.mean_feature
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ClassifierError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            ClassifierError::CorruptModel(format!("truncated while reading {what}"))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>, ClassifierError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| {
            ClassifierError::CorruptModel(format!("{what} length overflows"))
        })?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_library(bytes: &[u8]) -> Result<ClassLibrary, ClassifierError> {
    if bytes.len() < 8 || &bytes[..4] != MODEL_MAGIC {
        return Err(ClassifierError::ModelVersionMismatch("bad magic".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("version")?;
    if version != MODEL_VERSION {
        return Err(ClassifierError::ModelVersionMismatch(format!("version {version}")));
    }
    let dim = r.u32("dimension")? as usize;
    let rank = r.u32("rank")? as usize;
    let mean = r.f64s(dim, "mean")?;
    let basis = r.f64s(dim.saturating_mul(rank), "basis")?;
    let eigenvalues = r.f64s(rank, "eigenvalues")?;
    let reject_threshold = r.f64s(1, "reject threshold")?[0];
    let count = r.u32("class count")? as usize;
    let mut classes = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32("label length")? as usize;
        let label = std::str::from_utf8(r.take(len, "label")?)
            .map_err(|e| ClassifierError::CorruptModel(format!("label is not UTF-8: {e}")))?
            .to_string();
        let mean_feature = r.f64s(rank, "class mean")?;
        classes.push(ClassEntry {
            label,
            mean_feature,
        });
    }
    if r.pos != bytes.len() {
        return Err(ClassifierError::CorruptModel(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let lib = ClassLibrary {
        pca: PcaModel {
            dim,
            rank,
            mean,
            basis,
            eigenvalues,
        },
        classes,
        reject_threshold,
    };
    lib.validate()?;
    Ok(lib)
}

pub fn save_library(lib: &ClassLibrary, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    let path = path.as_ref();
    fs::write(path, encode_library(lib)).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_library(path: impl AsRef<Path>) -> Result<ClassLibrary, ClassifierError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_library(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn unit(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn angle_examples() {
        let a = [0.3, -1.2, 4.0];
        assert_eq!(angle_distance(&a, &a).unwrap(), 0.0);
        assert!((angle_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((angle_distance(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((angle_distance(&[1.0, 0.0], &[-2.0, 0.0]).unwrap() - PI).abs() < 1e-15);
        assert!(matches!(angle_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(ClassifierError::ZeroVector)));
        assert!(matches!(angle_distance(&[1.0], &[1.0, 0.0]), Err(ClassifierError::LengthMismatch(1, 2))));
    }

    fn two_class() -> ClassLibrary {
        let a: Vec<Vec<f64>> = (0..3).map(|_| unit(6, 0)).collect();
        let b: Vec<Vec<f64>> = (0..3).map(|_| unit(6, 1)).collect();
        train_library(&[("a".into(), a), ("b".into(), b)], 4, FRAC_PI_4).unwrap()
    }

    #[test]
    fn separated_clusters_stay_separated() {
        let lib = two_class();
        assert_eq!(lib.pca.rank, 1);
        let d = angle_distance(&lib.classes[0].mean_feature, &lib.classes[1].mean_feature).unwrap();
        assert!(d > 0.0);
        let c = lib.classify(&unit(6, 0)).unwrap();
        assert_eq!(c.class, Some(0));
        assert!(c.distance.unwrap() < 1e-9);
        assert_eq!(lib.classify(&unit(6, 1)).unwrap().class, Some(1));
    }

    #[test]
    fn rejects_as_unknown() {
        let lib = two_class();
        // x at the PCA mean projects to zero
        let c = lib.classify(&lib.pca.mean.clone()).unwrap();
        assert_eq!(c, Classification { class: None, distance: None });

        let mut lib = two_class();
        lib.pca.rank = 2;
        lib.pca.basis = (0..6).flat_map(|i| [if i == 0 { 1.0 } else { 0.0 }, if i == 2 { 1.0 } else { 0.0 }]).collect();
        lib.pca.eigenvalues = vec![1.0, 1.0];
        lib.classes[0].mean_feature = vec![1.0, 0.0];
        lib.classes[1].mean_feature = vec![-1.0, 0.0];
        let c = lib.classify_projected(&[0.0, 1.0]);
        assert_eq!(c.class, None);
        assert!((c.distance.unwrap() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn training_errors() {
        let one = vec![("a".to_string(), vec![vec![1.0, 0.0]])];
        assert!(matches!(train_library(&one, 2, 0.5), Err(ClassifierError::TooFewClasses(1))));
        let dup = vec![("a".to_string(), vec![vec![1.0]]), ("a".to_string(), vec![vec![2.0]])];
        assert!(matches!(train_library(&dup, 1, 0.5), Err(ClassifierError::DuplicateLabel(_))));
        let empty = vec![("a".to_string(), vec![vec![1.0]]), ("b".to_string(), vec![])];
        assert!(matches!(train_library(&empty, 1, 0.5), Err(ClassifierError::EmptyClass(_))));
        let ok = vec![("a".to_string(), vec![vec![1.0]]), ("b".to_string(), vec![vec![2.0]])];
        assert!(matches!(train_library(&ok, 1, 2.0), Err(ClassifierError::InvalidThreshold(_))));
        let same = vec![("a".to_string(), vec![vec![1.0]]), ("b".to_string(), vec![vec![1.0]])];
        assert!(matches!(
            train_library(&same, 1, 0.5),
            Err(ClassifierError::Subspace(SubspaceError::DegenerateData))
        ));
    }

    #[test]
    fn classify_checks_dimension() {
        let lib = two_class();
        assert!(matches!(
            lib.classify(&[1.0]),
            Err(ClassifierError::DimensionMismatch { expected: 6, found: 1 })
        ));
    }

    #[test]
    fn ties_go_to_first_class() {
        let mut lib = two_class();
        lib.classes[1].mean_feature = lib.classes[0].mean_feature.clone();
        let p = lib.classes[0].mean_feature.clone();
        assert_eq!(lib.classify_projected(&p).class, Some(0));
    }

    #[test]
    fn model_bytes_round_trip() {
        let lib = two_class();
        let bytes = encode_library(&lib);
        assert_eq!(&bytes[..4], b"LGPC");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(decode_library(&bytes).unwrap(), lib);
        // header 16 + mean 48 + basis 48 + eig 8 + threshold 8 + count 4 + 2 * (4 + 1 + 8)
        assert_eq!(bytes.len(), 16 + 48 + 48 + 8 + 8 + 4 + 2 * 13);
    }

    #[test]
    fn model_rejects_bad_headers() {
        let lib = two_class();
        let mut bytes = encode_library(&lib);
        bytes[0] = b'X';
        assert!(matches!(decode_library(&bytes), Err(ClassifierError::ModelVersionMismatch(_))));
        let mut bytes = encode_library(&lib);
        bytes[4] = 2;
        assert!(matches!(decode_library(&bytes), Err(ClassifierError::ModelVersionMismatch(_))));
        let bytes = encode_library(&lib);
        assert!(matches!(
            decode_library(&bytes[..bytes.len() - 3]),
            Err(ClassifierError::CorruptModel(_))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_library(&long), Err(ClassifierError::CorruptModel(_))));
    }
}
