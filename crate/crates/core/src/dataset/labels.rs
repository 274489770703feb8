//! Label CSV: `subject,frame,au1,...,au26`, one row per frame.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::au::{AuId, AU_COUNT};
use crate::dataset::Intensities;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelRow {
    pub subject: String,
    pub frame: usize,
    pub intensities: Intensities,
}

fn header() -> Vec<String> {
    let mut h = vec!["subject".to_string(), "frame".to_string()];
    h.extend(AuId::ALL.iter().map(|au| format!("au{au}")));
    h
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels_from(file)
}

pub fn read_labels_from<R: Read>(reader: R) -> Result<Vec<LabelRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header() {
        return Err(Error::Format(format!(
            "label header {found:?} does not match {:?}",
            header()
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let frame = field(1).parse::<usize>().map_err(|_| {
            Error::Format(format!("row {}: bad frame `{}`", line + 1, field(1)))
        })?;
        let mut values = [0u8; AU_COUNT];
        for (k, v) in values.iter_mut().enumerate() {
            *v = field(k + 2).parse::<u8>().map_err(|_| {
                Error::Format(format!("row {}: bad intensity `{}`", line + 1, field(k + 2)))
            })?;
        }
        rows.push(LabelRow {
            subject: field(0).to_string(),
            frame,
            intensities: Intensities::new(values)?,
        });
    }
    Ok(rows)
}

pub fn write_labels(path: impl AsRef<Path>, rows: &[LabelRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_labels_to(file, rows)
}

pub fn write_labels_to<W: Write>(writer: W, rows: &[LabelRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header())?;
    for row in rows {
        let mut rec = vec![row.subject.clone(), row.frame.to_string()];
        rec.extend(row.intensities.as_array().iter().map(u8::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<labels>", e))
}
