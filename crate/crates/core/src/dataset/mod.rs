//! Frame-level data: features, AU intensities and landmarks, plus the
//! preparation steps applied before training (binarization, subject splits,
//! balancing, standardization and sequence construction).

mod balance;
mod features;
mod labels;
mod landmarks;
mod sequences;
mod split;
mod standardize;

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::au::{AuId, AU_COUNT};
use crate::error::{Error, Result};

pub use balance::balance;
pub use features::{
    read_features, read_features_from, write_features, write_features_to, FEATURE_MAGIC,
    FEATURE_VERSION,
};
pub use labels::{read_labels, read_labels_from, write_labels, write_labels_to, LabelRow};
pub use landmarks::{
    read_landmarks, read_landmarks_from, write_landmarks, write_landmarks_to, Landmarks, Point,
    LANDMARK_COUNT,
};
pub use sequences::{
    build_sequences, full_test_sequence, plan_segments, Segment, SegmentKind, Sequence,
    SequenceBatch, SequenceConfig, SubjectTrack,
};
pub use split::{make_splits, read_split_spec, write_split_spec, SplitIndices, SplitSpec};
pub use standardize::{apply_standardizer, fit_standardizer, StandardizationParams};

/// Intensity threshold at which an AU counts as present.
pub const DEFAULT_THRESHOLD: u8 = 2;

/// Largest annotated AU intensity.
pub const MAX_INTENSITY: u8 = 5;

/// Returns whether an AU with `intensity` is considered present.
pub fn binarize_intensity(intensity: u8, threshold: u8) -> Result<bool> {
    if intensity > MAX_INTENSITY {
        return Err(Error::Domain(format!(
            "intensity {intensity} outside [0, {MAX_INTENSITY}]"
        )));
    }
    Ok(intensity >= threshold)
}

/// Per-frame intensities for all twelve AUs, in [`AuId::ALL`] order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intensities([u8; AU_COUNT]);

impl Intensities {
    pub fn new(values: [u8; AU_COUNT]) -> Result<Self> {
        if let Some(bad) = values.iter().find(|&&v| v > MAX_INTENSITY) {
            return Err(Error::Domain(format!(
                "intensity {bad} outside [0, {MAX_INTENSITY}]"
            )));
        }
        Ok(Intensities(values))
    }

    pub fn get(&self, au: AuId) -> u8 {
        self.0[au.index()]
    }

    pub fn is_present(&self, au: AuId, threshold: u8) -> bool {
        self.get(au) >= threshold
    }

    pub fn as_array(&self) -> &[u8; AU_COUNT] {
        &self.0
    }
}

/// Number of frames in which `au` is present.
pub fn count_activations<'a, I>(intensities: I, au: AuId, threshold: u8) -> usize
where
    I: IntoIterator<Item = &'a Intensities>,
{
    intensities
        .into_iter()
        .filter(|i| i.is_present(au, threshold))
        .count()
}

/// One video frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub subject: String,
    pub frame_index: usize,
    pub features: Vec<f64>,
    pub intensities: Intensities,
    pub landmarks: Option<Landmarks>,
}

/// An ordered collection of frames sharing one feature dimension.
///
/// Frames are kept sorted by `(subject, frame_index)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    dim: usize,
    frames: Vec<FrameRecord>,
}

impl Dataset {
    pub fn new(dim: usize, mut frames: Vec<FrameRecord>) -> Result<Self> {
        for f in &frames {
            if f.features.len() != dim {
                return Err(Error::Shape(format!(
                    "frame {}/{} has {} features, dataset dimension is {dim}",
                    f.subject,
                    f.frame_index,
                    f.features.len()
                )));
            }
        }
        frames.sort_by(|a, b| {
            a.subject
                .cmp(&b.subject)
                .then(a.frame_index.cmp(&b.frame_index))
        });
        if let Some(w) = frames
            .windows(2)
            .find(|w| w[0].subject == w[1].subject && w[0].frame_index == w[1].frame_index)
        {
            return Err(Error::Validation(format!(
                "duplicate frame {}/{}",
                w[0].subject, w[0].frame_index
            )));
        }
        Ok(Dataset { dim, frames })
    }

    /// Joins label rows with per-subject feature matrices (row `i` holds
    /// frame `i`) and optional landmarks.
    pub fn assemble(
        labels: &[LabelRow],
        features: &BTreeMap<String, Array2<f32>>,
        landmarks: Option<&HashMap<(String, usize), Landmarks>>,
    ) -> Result<Self> {
        let dim = match features.values().next() {
            Some(m) => m.ncols(),
            None if labels.is_empty() => 0,
            None => return Err(Error::Validation("no feature files supplied".into())),
        };
        let mut frames = Vec::with_capacity(labels.len());
        for row in labels {
            let matrix = features.get(&row.subject).ok_or_else(|| Error::Lookup {
                kind: "feature file for subject",
                name: row.subject.clone(),
            })?;
            if matrix.ncols() != dim {
                return Err(Error::Shape(format!(
                    "subject {} has dimension {}, expected {dim}",
                    row.subject,
                    matrix.ncols()
                )));
            }
            if row.frame >= matrix.nrows() {
                return Err(Error::Shape(format!(
                    "subject {} frame {} beyond the {} feature rows",
                    row.subject,
                    row.frame,
                    matrix.nrows()
                )));
            }
            let lm = landmarks.and_then(|m| m.get(&(row.subject.clone(), row.frame)).cloned());
            frames.push(FrameRecord {
                subject: row.subject.clone(),
                frame_index: row.frame,
                features: matrix.row(row.frame).iter().map(|&v| f64::from(v)).collect(),
                intensities: row.intensities,
                landmarks: lm,
            });
        }
        Dataset::new(dim, frames)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    /// Distinct subjects in ascending order.
    pub fn subjects(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for f in &self.frames {
            if out.last() != Some(&f.subject) {
                out.push(f.subject.clone());
            }
        }
        out
    }

    pub fn count_activations(&self, au: AuId, threshold: u8) -> usize {
        count_activations(self.frames.iter().map(|f| &f.intensities), au, threshold)
    }

    /// Binarized occurrence of `au` for the frames at `indices`.
    pub fn labels(&self, indices: &[usize], au: AuId, threshold: u8) -> Vec<bool> {
        indices
            .iter()
            .map(|&i| self.frames[i].intensities.is_present(au, threshold))
            .collect()
    }

    /// Stacks the feature vectors at `indices` into a matrix.
    pub fn feature_matrix(&self, indices: &[usize]) -> Array2<f64> {
        let mut m = Array2::zeros((indices.len(), self.dim));
        for (mut row, &i) in m.rows_mut().into_iter().zip(indices) {
            row.assign(&ArrayView1::from(&self.frames[i].features));
        }
        m
    }

    /// Frame indices grouped per subject, each group ordered by frame.
    pub fn subject_indices(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, f) in self.frames.iter().enumerate() {
            match out.last_mut() {
                Some((s, idx)) if *s == f.subject => idx.push(i),
                _ => out.push((f.subject.clone(), vec![i])),
            }
        }
        out
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.frames.len()).collect()
    }
}
