//! 68-point facial landmarks and their CSV file
//! (`subject,frame,x0,y0,...,x67,y67`).

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LANDMARK_COUNT: usize = 68;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Exactly 68 points in the iBUG ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct Landmarks(Vec<Point>);

impl Landmarks {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::Shape(format!(
                "expected {LANDMARK_COUNT} landmarks, got {}",
                points.len()
            )));
        }
        Ok(Landmarks(points))
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }
}

fn header() -> Vec<String> {
    let mut h = vec!["subject".to_string(), "frame".to_string()];
    for i in 0..LANDMARK_COUNT {
        h.push(format!("x{i}"));
        h.push(format!("y{i}"));
    }
    h
}

pub fn read_landmarks(path: impl AsRef<Path>) -> Result<HashMap<(String, usize), Landmarks>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_landmarks_from(file)
}

pub fn read_landmarks_from<R: Read>(reader: R) -> Result<HashMap<(String, usize), Landmarks>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header() {
        return Err(Error::Format("landmark header does not match subject,frame,x0,y0,...,x67,y67".into()));
    }
    let mut out = HashMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            let s = record.get(i).unwrap_or("");
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("row {}: bad coordinate `{s}`", line + 1)))
        };
        let frame = record
            .get(1)
            .unwrap_or("")
            .parse::<usize>()
            .map_err(|_| Error::Format(format!("row {}: bad frame", line + 1)))?;
        let points = (0..LANDMARK_COUNT)
            .map(|k| Ok(Point::new(num(2 + 2 * k)?, num(3 + 2 * k)?)))
            .collect::<Result<Vec<_>>>()?;
        out.insert(
            (record.get(0).unwrap_or("").to_string(), frame),
            Landmarks::new(points)?,
        );
    }
    Ok(out)
}

pub fn write_landmarks(path: impl AsRef<Path>, rows: &[(String, usize, Landmarks)]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_landmarks_to(file, rows)
}

pub fn write_landmarks_to<W: Write>(writer: W, rows: &[(String, usize, Landmarks)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header())?;
    for (subject, frame, lm) in rows {
        let mut rec = Vec::with_capacity(2 + 2 * LANDMARK_COUNT);
        rec.push(subject.clone());
        rec.push(frame.to_string());
        for p in lm.points() {
            rec.push(format!("{:.4}", p.x));
            rec.push(format!("{:.4}", p.y));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<landmarks>", e))
}
