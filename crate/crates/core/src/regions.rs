//! Facial regions per action unit and their crop rectangles.
//!
//! Landmark indices follow the 0-based iBUG 68-point layout: jaw 0-16,
//! brows 17-26, nose 27-35, eyes 36-47, mouth 48-67.

use std::fmt;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::au::AuId;
use crate::dataset::{Landmarks, Point, LANDMARK_COUNT};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    UpperHalf,
    Middle,
    LowerHalf,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::UpperHalf, Region::Middle, Region::LowerHalf];

    /// Landmark indices whose bounding box defines the region.
    pub fn landmark_indices(self) -> Vec<usize> {
        let ranges: &[RangeInclusive<usize>] = match self {
            Region::UpperHalf => &[17..=47],
            Region::Middle => &[27..=35],
            Region::LowerHalf => &[4..=12, 48..=67],
        };
        ranges.iter().cloned().flatten().collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::UpperHalf => "upper",
            Region::Middle => "middle",
            Region::LowerHalf => "lower",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upper" | "upperhalf" | "upper_half" => Ok(Region::UpperHalf),
            "middle" => Ok(Region::Middle),
            "lower" | "lowerhalf" | "lower_half" => Ok(Region::LowerHalf),
            _ => Err(Error::Lookup { kind: "region", name: s.to_string() }),
        }
    }
}

/// The face region that carries the appearance cues for `au`.
pub fn region_for_au(au: AuId) -> Region {
    match au.code() {
        1 | 2 | 4 | 5 | 6 => Region::UpperHalf,
        9 => Region::Middle,
        _ => Region::LowerHalf,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    pub region: Region,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl RegionBox {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

pub const DEFAULT_MARGIN: f64 = 0.1;

/// Bounding boxes of the three regions, each widened by `margin_fraction`
/// of its own width and height on every side and clamped to the
/// non-negative quadrant. Returned in [`Region::ALL`] order.
pub fn compute_region_boxes(landmarks: &Landmarks, margin_fraction: f64) -> Result<[RegionBox; 3]> {
    let points = landmarks.points();
    if points.len() != LANDMARK_COUNT {
        return Err(Error::Shape(format!("expected {LANDMARK_COUNT} landmarks")));
    }
    if !(margin_fraction >= 0.0 && margin_fraction.is_finite()) {
        return Err(Error::Domain(format!("margin {margin_fraction} must be finite and >= 0")));
    }
    if let Some(i) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::Domain(format!("landmark {i} is not finite")));
    }
    let mut out = [RegionBox { region: Region::UpperHalf, x_min: 0.0, y_min: 0.0, x_max: 0.0, y_max: 0.0 }; 3];
    for (slot, region) in out.iter_mut().zip(Region::ALL) {
        let idx = region.landmark_indices();
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &i in &idx {
            let p = points[i];
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        let (w, h) = (x1 - x0, y1 - y0);
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::Domain(format!("degenerate {region} box ({w} x {h})")));
        }
        let bx = RegionBox {
            region,
            x_min: (x0 - margin_fraction * w).max(0.0),
            y_min: (y0 - margin_fraction * h).max(0.0),
            x_max: (x1 + margin_fraction * w).max(0.0),
            y_max: (y1 + margin_fraction * h).max(0.0),
        };
        if bx.x_min >= bx.x_max || bx.y_min >= bx.y_max {
            return Err(Error::Domain(format!("{region} box vanishes after clamping")));
        }
        *slot = bx;
    }
    Ok(out)
}

/// A frame to describe in the crop manifest.
#[derive(Clone, Copy, Debug)]
pub struct ManifestFrame<'a> {
    pub subject: &'a str,
    pub frame: usize,
    pub landmarks: Option<&'a Landmarks>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ManifestSummary {
    pub rows: usize,
    /// `(subject, frame, message)` for frames that produced no rows.
    pub errors: Vec<(String, usize, String)>,
}

pub const MANIFEST_HEADER: [&str; 8] =
    ["subject", "frame", "au", "region", "x_min", "y_min", "x_max", "y_max"];

/// Writes one row per (frame, AU), ordered by subject, frame and AU.
/// Frames that cannot be boxed are skipped and reported in the summary.
pub fn write_crop_manifest<W: Write>(
    writer: W,
    frames: &[ManifestFrame<'_>],
    aus: &[AuId],
    margin_fraction: f64,
) -> Result<ManifestSummary> {
    let mut frames = frames.to_vec();
    frames.sort_by(|a, b| a.subject.cmp(b.subject).then(a.frame.cmp(&b.frame)));
    let mut aus = aus.to_vec();
    aus.sort();
    aus.dedup();

    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MANIFEST_HEADER)?;
    let mut summary = ManifestSummary::default();
    for f in &frames {
        let boxes = match f.landmarks {
            None => Err(Error::Lookup { kind: "landmarks for frame", name: format!("{}/{}", f.subject, f.frame) }),
            Some(lm) => compute_region_boxes(lm, margin_fraction),
        };
        let boxes = match boxes {
            Ok(b) => b,
            Err(e) => {
                summary.errors.push((f.subject.to_string(), f.frame, e.to_string()));
                continue;
            }
        };
        for &au in &aus {
            let region = region_for_au(au);
            let b = boxes.iter().find(|b| b.region == region).expect("all regions computed");
            w.write_record([
                f.subject.to_string(),
                f.frame.to_string(),
                au.to_string(),
                region.to_string(),
                b.x_min.to_string(),
                b.y_min.to_string(),
                b.x_max.to_string(),
                b.y_max.to_string(),
            ])?;
            summary.rows += 1;
        }
    }
    w.flush().map_err(|e| Error::io("<manifest>", e))?;
    Ok(summary)
}

pub fn emit_crop_manifest(
    out: impl AsRef<Path>,
    frames: &[ManifestFrame<'_>],
    aus: &[AuId],
    margin_fraction: f64,
) -> Result<ManifestSummary> {
    let out = out.as_ref();
    let file = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    write_crop_manifest(std::io::BufWriter::new(file), frames, aus, margin_fraction)
}
