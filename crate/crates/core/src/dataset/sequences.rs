//! Contiguous frame sequences for recurrent training.
//!
//! Each maximal run of positive frames is widened by `pad` frames on both
//! sides (clamped to the video) and overlapping or touching widened runs are
//! merged. The inactive stretches left between them become their own
//! sequences unless they are long: stretches of `inactive_min..=inactive_max`
//! frames are dropped, and so are longer ones when `drop_above_max` is set.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::au::AuId;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceConfig {
    pub pad: usize,
    pub inactive_min: usize,
    pub inactive_max: usize,
    pub drop_above_max: bool,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig { pad: 3, inactive_min: 500, inactive_max: 1000, drop_above_max: true }
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inactive_min > self.inactive_max {
            return Err(Error::Validation(format!(
                "inactive_min {} exceeds inactive_max {}",
                self.inactive_min, self.inactive_max
            )));
        }
        Ok(())
    }

    fn drops_inactive(&self, len: usize) -> bool {
        len >= self.inactive_min && (len <= self.inactive_max || self.drop_above_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    /// A padded activation run.
    Active,
    /// A short stretch without activation between active segments.
    Inactive,
    /// A whole subject video, used for testing.
    Full,
}

/// Half-open frame range `[start, end)` relative to the track start.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Computes training segments from per-frame labels. Segments are returned
/// in frame order and never overlap.
pub fn plan_segments(labels: &[bool], config: &SequenceConfig) -> Vec<Segment> {
    let n = labels.len();
    let mut active: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if !labels[i] {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < n && labels[i] {
            i += 1;
        }
        let start = run_start.saturating_sub(config.pad);
        let end = (i + config.pad).min(n);
        match active.last_mut() {
            Some(last) if start <= last.1 => last.1 = last.1.max(end),
            _ => active.push((start, end)),
        }
    }

    let mut out = Vec::new();
    let mut cursor = 0;
    let push_gap = |from: usize, to: usize, out: &mut Vec<Segment>| {
        let len = to - from;
        if len > 0 && !config.drops_inactive(len) {
            out.push(Segment { start: from, end: to, kind: SegmentKind::Inactive });
        }
    };
    for (start, end) in active {
        push_gap(cursor, start, &mut out);
        out.push(Segment { start, end, kind: SegmentKind::Active });
        cursor = end;
    }
    push_gap(cursor, n, &mut out);
    out
}

/// One subject's standardized frames in video order.
#[derive(Clone, Copy, Debug)]
pub struct SubjectTrack<'a> {
    pub subject: &'a str,
    pub frame_indices: &'a [usize],
    pub features: ArrayView2<'a, f64>,
    pub labels: &'a [bool],
}

impl SubjectTrack<'_> {
    fn check(&self) -> Result<()> {
        let n = self.frame_indices.len();
        if self.features.nrows() != n || self.labels.len() != n {
            return Err(Error::Shape(format!(
                "subject {}: {} frame indices, {} feature rows, {} labels",
                self.subject,
                n,
                self.features.nrows(),
                self.labels.len()
            )));
        }
        if let Some(w) = self.frame_indices.windows(2).find(|w| w[1] != w[0] + 1) {
            return Err(Error::Ordering(format!(
                "subject {}: frame {} followed by {}",
                self.subject, w[0], w[1]
            )));
        }
        Ok(())
    }

    fn slice(&self, seg: Segment) -> Sequence {
        Sequence {
            subject: self.subject.to_string(),
            start_frame: self.frame_indices.first().copied().unwrap_or(0) + seg.start,
            kind: seg.kind,
            features: self.features.slice(ndarray::s![seg.start..seg.end, ..]).to_owned(),
            labels: self.labels[seg.start..seg.end].to_vec(),
        }
    }
}

/// A contiguous run of frames with their binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub subject: String,
    pub start_frame: usize,
    pub kind: SegmentKind,
    /// `T x D` feature rows.
    pub features: Array2<f64>,
    pub labels: Vec<bool>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Source frame ordinals covered by this sequence.
    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start_frame..self.start_frame + self.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    pub au: AuId,
    pub sequences: Vec<Sequence>,
}

impl SequenceBatch {
    pub fn total_frames(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }
}

pub fn build_sequences(
    tracks: &[SubjectTrack<'_>],
    au: AuId,
    config: &SequenceConfig,
) -> Result<SequenceBatch> {
    let mut sequences = Vec::new();
    for track in tracks {
        track.check()?;
        for seg in plan_segments(track.labels, config) {
            sequences.push(track.slice(seg));
        }
    }
    Ok(SequenceBatch { au, sequences })
}

/// One unfiltered sequence per subject covering every frame.
pub fn full_test_sequence(tracks: &[SubjectTrack<'_>], au: AuId) -> Result<SequenceBatch> {
    let mut sequences = Vec::with_capacity(tracks.len());
    for track in tracks {
        track.check()?;
        let seg = Segment { start: 0, end: track.labels.len(), kind: SegmentKind::Full };
        sequences.push(track.slice(seg));
    }
    Ok(SequenceBatch { au, sequences })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize, runs: &[(usize, usize)]) -> Vec<bool> {
        (0..n).map(|i| runs.iter().any(|&(a, b)| i >= a && i <= b)).collect()
    }

    fn active(segs: &[Segment]) -> Vec<(usize, usize)> {
        segs.iter()
            .filter(|s| s.kind == SegmentKind::Active)
            .map(|s| (s.start, s.end - 1))
            .collect()
    }

    fn au() -> AuId {
        AuId::new(1).unwrap()
    }

    #[test]
    fn single_run_is_padded_by_three() {
        let segs = plan_segments(&labels(100, &[(10, 20)]), &SequenceConfig::default());
        assert_eq!(active(&segs), [(7, 23)]);
        assert_eq!(
            segs,
            vec![
                Segment { start: 0, end: 7, kind: SegmentKind::Inactive },
                Segment { start: 7, end: 24, kind: SegmentKind::Active },
                Segment { start: 24, end: 100, kind: SegmentKind::Inactive },
            ]
        );
    }

    #[test]
    fn padding_clamps_at_video_edges() {
        let segs = plan_segments(&labels(10, &[(0, 0), (9, 9)]), &SequenceConfig::default());
        assert_eq!(active(&segs), [(0, 3), (6, 9)]);
        // Touching widened runs merge.
        let segs = plan_segments(&labels(10, &[(0, 0), (7, 9)]), &SequenceConfig::default());
        assert_eq!(active(&segs), [(0, 9)]);
    }

    #[test]
    fn overlapping_padded_runs_merge() {
        let segs = plan_segments(&labels(100, &[(10, 20), (24, 30)]), &SequenceConfig::default());
        assert_eq!(active(&segs), [(7, 33)]);
    }

    #[test]
    fn separate_runs_stay_separate() {
        let segs = plan_segments(&labels(100, &[(10, 20), (40, 50)]), &SequenceConfig::default());
        assert_eq!(active(&segs), [(7, 23), (37, 53)]);
        assert_eq!(segs.len(), 5);
    }

    #[test]
    fn long_inactive_stretches_are_removed() {
        let cfg = SequenceConfig::default();
        // Gaps of 499, 500, 1000 and 1001 frames after padding.
        for (gap, kept) in [(499usize, true), (500, false), (1000, false), (1001, false)] {
            let n = 10 + 3 + gap + 3 + 10;
            let second = 10 + 3 + gap + 3;
            let segs = plan_segments(&labels(n, &[(0, 9), (second, n - 1)]), &cfg);
            let inactive: Vec<_> =
                segs.iter().filter(|s| s.kind == SegmentKind::Inactive).collect();
            assert_eq!(!inactive.is_empty(), kept, "gap {gap}");
            if kept {
                assert_eq!(inactive[0].len(), gap);
            }
        }
        let keep_long = SequenceConfig { drop_above_max: false, ..cfg };
        let n = 10 + 3 + 1001 + 3 + 10;
        let segs = plan_segments(&labels(n, &[(0, 9), (n - 10, n - 1)]), &keep_long);
        assert!(segs.iter().any(|s| s.kind == SegmentKind::Inactive && s.len() == 1001));
    }

    #[test]
    fn no_activation_yields_only_short_inactive() {
        assert_eq!(
            plan_segments(&[false; 20], &SequenceConfig::default()),
            vec![Segment { start: 0, end: 20, kind: SegmentKind::Inactive }]
        );
        assert!(plan_segments(&[false; 600], &SequenceConfig::default()).is_empty());
        assert!(plan_segments(&[], &SequenceConfig::default()).is_empty());
    }

    #[test]
    fn builds_sequences_with_source_frames_and_labels() {
        let n = 40;
        let l = labels(n, &[(10, 20)]);
        let idx: Vec<usize> = (100..100 + n).collect();
        let feats = Array2::from_shape_fn((n, 2), |(i, j)| (i * 10 + j) as f64);
        let track = SubjectTrack { subject: "s", frame_indices: &idx, features: feats.view(), labels: &l };
        let batch = build_sequences(&[track], au(), &SequenceConfig::default()).unwrap();
        let act = batch.sequences.iter().find(|s| s.kind == SegmentKind::Active).unwrap();
        assert_eq!(act.frames(), 107..124);
        assert_eq!(act.features[[0, 1]], 71.0);
        assert_eq!(act.labels[..3], [false; 3]);
        assert!(act.labels[3]);
        assert_eq!(batch.total_frames(), n);
    }

    #[test]
    fn non_contiguous_frames_are_rejected() {
        let idx = [0usize, 1, 3];
        let feats = Array2::zeros((3, 1));
        let l = [true, false, false];
        let track = SubjectTrack { subject: "s", frame_indices: &idx, features: feats.view(), labels: &l };
        assert!(matches!(
            build_sequences(&[track], au(), &SequenceConfig::default()),
            Err(Error::Ordering(_))
        ));
        assert!(matches!(full_test_sequence(&[track], au()), Err(Error::Ordering(_))));
    }

    #[test]
    fn full_sequence_per_subject() {
        let idx: Vec<usize> = (0..4845).collect();
        let feats = Array2::zeros((4845, 1));
        let l = vec![false; 4845];
        let t1 = SubjectTrack { subject: "a", frame_indices: &idx, features: feats.view(), labels: &l };
        let batch = full_test_sequence(&[t1], au()).unwrap();
        assert_eq!(batch.sequences.len(), 1);
        assert_eq!(batch.sequences[0].len(), 4845);

        let idx10: Vec<usize> = (0..10).collect();
        let f10 = Array2::zeros((10, 1));
        let l10 = vec![true; 10];
        let t2 = SubjectTrack { subject: "b", frame_indices: &idx10, features: f10.view(), labels: &l10 };
        let batch = full_test_sequence(&[t2, t2], au()).unwrap();
        assert_eq!(batch.sequences.len(), 2);
        assert!(batch.sequences.iter().all(|s| s.len() == 10 && s.kind == SegmentKind::Full));
    }

    /// Interval-merge oracle: mark padded frames, then read off maximal runs.
    fn merged_runs_oracle(l: &[bool], pad: usize) -> Vec<(usize, usize)> {
        let n = l.len();
        let mut covered = vec![false; n];
        for (i, &b) in l.iter().enumerate() {
            if b {
                for c in &mut covered[i.saturating_sub(pad)..(i + pad + 1).min(n)] {
                    *c = true;
                }
            }
        }
        let mut runs = Vec::new();
        let mut i = 0;
        while i < n {
            if covered[i] {
                let s = i;
                while i < n && covered[i] {
                    i += 1;
                }
                runs.push((s, i - 1));
            } else {
                i += 1;
            }
        }
        runs
    }

    proptest! {
        #[test]
        fn segments_match_oracle_and_cover_positives(
            l in proptest::collection::vec(prop::bool::weighted(0.15), 0..300),
            pad in 0usize..5,
            min in 1usize..40,
        ) {
            let cfg = SequenceConfig { pad, inactive_min: min, inactive_max: min + 10, drop_above_max: true };
            let segs = plan_segments(&l, &cfg);
            prop_assert_eq!(active(&segs), merged_runs_oracle(&l, pad));
            let mut seen = vec![0u8; l.len()];
            for s in &segs {
                prop_assert!(!s.is_empty());
                for c in &mut seen[s.start..s.end] { *c += 1; }
                if s.kind == SegmentKind::Inactive {
                    prop_assert!(l[s.start..s.end].iter().all(|&b| !b));
                    prop_assert!(s.len() < min);
                }
            }
            prop_assert!(seen.iter().all(|&c| c <= 1));
            for (i, &b) in l.iter().enumerate() {
                if b { prop_assert_eq!(seen[i], 1); }
            }
        }
    }
}
