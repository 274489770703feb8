//! Seeded synthetic stand-in for a labelled AU video corpus.
//!
//! Each subject gets independent per-AU activation runs with geometric
//! lengths. Feature vectors are `N(0, I)` noise shifted by
//! `class_separation` along a fixed unit direction for every active AU, so
//! a linear classifier can recover each AU. Landmarks are a canonical face
//! template under a per-subject similarity transform plus per-frame jitter.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::au::{AuId, AU_COUNT};
use crate::dataset::{
    write_features, write_labels, write_landmarks, write_split_spec, Intensities, LabelRow, Landmarks,
    Point, SplitSpec, LANDMARK_COUNT,
};
use crate::error::{Error, Result};
use crate::regions::{region_for_au, Region};
use crate::seed::named_seed;

/// Feature set tag holding signal for every AU.
pub const FULL_TAG: &str = "full";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub frames_per_subject: usize,
    pub feature_dim: usize,
    pub class_separation: f64,
    /// Mean length of an active run, in frames.
    pub mean_active_run: f64,
    /// Mean length of an inactive run, in frames.
    pub mean_inactive_run: f64,
    /// Per-frame landmark jitter in pixels.
    pub landmark_noise: f64,
    /// Also emit `upper`/`middle`/`lower` feature sets, each carrying signal
    /// only for the AUs routed to that region.
    pub region_features: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_subjects: 27,
            frames_per_subject: 500,
            feature_dim: 64,
            class_separation: 4.0,
            mean_active_run: 40.0,
            mean_inactive_run: 90.0,
            landmark_noise: 0.5,
            region_features: false,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.frames_per_subject == 0 || self.feature_dim == 0 {
            return Err(Error::Validation("synthetic sizes must be positive".into()));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::Validation(format!("class_separation {} must be >= 0", self.class_separation)));
        }
        if !(self.mean_active_run >= 1.0 && self.mean_inactive_run >= 1.0) {
            return Err(Error::Validation("mean run lengths must be at least 1 frame".into()));
        }
        if !(self.landmark_noise >= 0.0 && self.landmark_noise.is_finite()) {
            return Err(Error::Validation("landmark_noise must be >= 0".into()));
        }
        Ok(())
    }

    /// Feature set tags this spec produces.
    pub fn tags(&self) -> Vec<String> {
        let mut tags = vec![FULL_TAG.to_string()];
        if self.region_features {
            tags.extend([Region::UpperHalf, Region::Middle, Region::LowerHalf].map(|r| r.as_str().to_string()));
        }
        tags
    }
}

/// Generated corpus held in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub labels: Vec<LabelRow>,
    /// Tag, then subject, to a `frames x dim` matrix.
    pub features: BTreeMap<String, BTreeMap<String, Array2<f32>>>,
    pub landmarks: Vec<(String, usize, Landmarks)>,
    pub subjects: Vec<String>,
}

pub fn subject_name(i: usize) -> String {
    format!("S{:03}", i + 1)
}

/// Canonical 68-point frontal face in a 200 x 200 pixel frame.
pub fn face_template() -> Vec<Point> {
    let mut pts = Vec::with_capacity(LANDMARK_COUNT);
    // Jaw from the left ear around the chin to the right ear.
    for i in 0..17 {
        let t = PI - i as f64 * PI / 16.0;
        pts.push(Point::new(100.0 + 70.0 * t.cos(), 90.0 + 80.0 * t.sin()));
    }
    for x0 in [45.0, 115.0] {
        for k in 0..5 {
            let x: f64 = x0 + 10.0 * k as f64;
            let arch = 4.0 * ((k as f64 - 2.0) / 2.0).powi(2);
            pts.push(Point::new(x, 58.0 + arch));
        }
    }
    for k in 0..4 {
        pts.push(Point::new(100.0, 70.0 + 10.0 * k as f64));
    }
    for k in 0..5 {
        pts.push(Point::new(88.0 + 6.0 * k as f64, 108.0));
    }
    let ellipse = |pts: &mut Vec<Point>, cx: f64, cy: f64, rx: f64, ry: f64, n: usize| {
        for k in 0..n {
            let t = PI + 2.0 * PI * k as f64 / n as f64;
            pts.push(Point::new(cx + rx * t.cos(), cy + ry * t.sin()));
        }
    };
    ellipse(&mut pts, 70.0, 78.0, 12.0, 5.0, 6);
    ellipse(&mut pts, 130.0, 78.0, 12.0, 5.0, 6);
    ellipse(&mut pts, 100.0, 138.0, 25.0, 10.0, 12);
    ellipse(&mut pts, 100.0, 138.0, 15.0, 5.0, 8);
    debug_assert_eq!(pts.len(), LANDMARK_COUNT);
    pts
}

/// One unit direction per AU. They are mutually orthogonal when the
/// dimension allows it.
fn au_directions(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Array1<f64>> {
    let mut dirs: Vec<Array1<f64>> = Vec::with_capacity(AU_COUNT);
    while dirs.len() < AU_COUNT {
        let mut v: Array1<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if dirs.len() < dim {
            for d in &dirs {
                let p = v.dot(d);
                v.scaled_add(-p, d);
            }
        }
        let n = v.dot(&v).sqrt();
        if n > 1e-6 {
            dirs.push(v / n);
        }
    }
    dirs
}

/// Alternating inactive/active runs covering `frames` frames.
fn activation_track(frames: usize, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let active = Geometric::new(1.0 / spec.mean_active_run).expect("validated run length");
    let inactive = Geometric::new(1.0 / spec.mean_inactive_run).expect("validated run length");
    let prevalence = spec.mean_active_run / (spec.mean_active_run + spec.mean_inactive_run);
    let mut state = rng.random_bool(prevalence);
    let mut out = Vec::with_capacity(frames);
    while out.len() < frames {
        let dist = if state { &active } else { &inactive };
        let len = 1 + dist.sample(rng) as usize;
        out.extend(std::iter::repeat_n(state, len.min(frames - out.len())));
        state = !state;
    }
    out
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut dir_rng = ChaCha8Rng::seed_from_u64(named_seed(spec.seed, "directions"));
    let dirs = au_directions(spec.feature_dim, &mut dir_rng);
    let template = face_template();
    let tags = spec.tags();
    let regions: Vec<Region> = AuId::ALL.iter().map(|&au| region_for_au(au)).collect();

    let mut labels = Vec::with_capacity(spec.n_subjects * spec.frames_per_subject);
    let mut features: BTreeMap<String, BTreeMap<String, Array2<f32>>> =
        tags.iter().map(|t| (t.clone(), BTreeMap::new())).collect();
    let mut landmarks = Vec::with_capacity(labels.capacity());
    let mut subjects = Vec::with_capacity(spec.n_subjects);

    for s in 0..spec.n_subjects {
        let subject = subject_name(s);
        let mut rng = ChaCha8Rng::seed_from_u64(named_seed(spec.seed, &subject));
        let n = spec.frames_per_subject;
        let tracks: Vec<Vec<bool>> = (0..AU_COUNT).map(|_| activation_track(n, spec, &mut rng)).collect();

        let mut mats: Vec<Array2<f32>> = tags.iter().map(|_| Array2::zeros((n, spec.feature_dim))).collect();
        for t in 0..n {
            let mut intensities = [0u8; AU_COUNT];
            for (a, track) in tracks.iter().enumerate() {
                intensities[a] = if track[t] { rng.random_range(2..=5) } else { rng.random_range(0..=1) };
            }
            labels.push(LabelRow {
                subject: subject.clone(),
                frame: t,
                intensities: Intensities::new(intensities)?,
            });
            for (k, tag) in tags.iter().enumerate() {
                let mut x: Array1<f64> =
                    (0..spec.feature_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                for (a, track) in tracks.iter().enumerate() {
                    if track[t] && (tag == FULL_TAG || regions[a].as_str() == tag) {
                        x.scaled_add(spec.class_separation, &dirs[a]);
                    }
                }
                mats[k].row_mut(t).assign(&x.mapv(|v| v as f32));
            }
        }
        for (tag, m) in tags.iter().zip(mats) {
            features.get_mut(tag).expect("tag map").insert(subject.clone(), m);
        }

        let scale = rng.random_range(0.9..1.1);
        let (dx, dy) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        for t in 0..n {
            let pts = template
                .iter()
                .map(|p| {
                    let jx: f64 = rng.sample(StandardNormal);
                    let jy: f64 = rng.sample(StandardNormal);
                    Point::new(
                        50.0 + dx + scale * p.x + spec.landmark_noise * jx,
                        50.0 + dy + scale * p.y + spec.landmark_noise * jy,
                    )
                })
                .collect();
            landmarks.push((subject.clone(), t, Landmarks::new(pts)?));
        }
        subjects.push(subject);
    }
    Ok(SyntheticData { labels, features, landmarks, subjects })
}

/// Where [`write_synthetic`] put each file, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticLayout {
    pub features: BTreeMap<String, String>,
    pub labels: String,
    pub landmarks: String,
    pub splits: String,
}

/// Writes `features/<tag>/<subject>.aufe`, `labels.csv`, `landmarks.csv`
/// and a default `splits.json` under `dir`.
pub fn write_synthetic(dir: &Path, data: &SyntheticData) -> Result<SyntheticLayout> {
    let mut layout = SyntheticLayout {
        features: BTreeMap::new(),
        labels: "labels.csv".into(),
        landmarks: "landmarks.csv".into(),
        splits: "splits.json".into(),
    };
    for (tag, per_subject) in &data.features {
        let rel = format!("features/{tag}");
        let sub: PathBuf = dir.join(&rel);
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for (subject, m) in per_subject {
            write_features(sub.join(format!("{subject}.aufe")), m.view())?;
        }
        layout.features.insert(tag.clone(), rel);
    }
    write_labels(dir.join(&layout.labels), &data.labels)?;
    write_landmarks(dir.join(&layout.landmarks), &data.landmarks)?;
    write_split_spec(dir.join(&layout.splits), &SplitSpec::default_for(&data.subjects)?)?;
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::compute_region_boxes;

    fn small() -> SyntheticSpec {
        SyntheticSpec { n_subjects: 3, frames_per_subject: 100, feature_dim: 16, seed: 5, ..Default::default() }
    }

    #[test]
    fn template_regions_are_well_formed() {
        let lm = Landmarks::new(face_template()).unwrap();
        let boxes = compute_region_boxes(&lm, 0.1).unwrap();
        let [upper, middle, lower] = boxes;
        assert!(upper.y_min < middle.y_min && middle.y_max < lower.y_max);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SyntheticSpec { seed: 6, ..small() }).unwrap();
        assert_ne!(a.labels, c.labels);
    }

    #[test]
    fn shapes_and_counts() {
        let spec = SyntheticSpec { region_features: true, ..small() };
        let d = generate(&spec).unwrap();
        assert_eq!(d.labels.len(), 300);
        assert_eq!(d.landmarks.len(), 300);
        assert_eq!(d.features.len(), 4);
        for per_subject in d.features.values() {
            assert_eq!(per_subject.len(), 3);
            assert!(per_subject.values().all(|m| m.dim() == (100, 16)));
        }
    }

    #[test]
    fn directions_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = au_directions(16, &mut rng);
        for i in 0..AU_COUNT {
            for j in 0..AU_COUNT {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d[i].dot(&d[j]) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn activations_carry_signal_along_their_direction() {
        let spec = SyntheticSpec { n_subjects: 1, frames_per_subject: 2000, ..small() };
        let d = generate(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(named_seed(spec.seed, "directions"));
        let dirs = au_directions(spec.feature_dim, &mut rng);
        let m = &d.features[FULL_TAG]["S001"];
        let au = AuId::ALL[0];
        let (mut on, mut off) = (Vec::new(), Vec::new());
        for (t, row) in d.labels.iter().enumerate() {
            let p = m.row(t).mapv(f64::from).dot(&dirs[0]);
            if row.intensities.is_present(au, 2) {
                on.push(p);
            } else {
                off.push(p);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&on) - mean(&off) - 4.0).abs() < 0.3);
        let prevalence = on.len() as f64 / 2000.0;
        assert!((0.15..0.45).contains(&prevalence), "{prevalence}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&SyntheticSpec { n_subjects: 0, ..small() }).is_err());
        assert!(generate(&SyntheticSpec { class_separation: -1.0, ..small() }).is_err());
        assert!(generate(&SyntheticSpec { mean_active_run: 0.5, ..small() }).is_err());
    }
}
