//! Binary feature files.
//!
//! Layout (little-endian): magic `AUFE`, format version `u32 = 1`, row
//! count `u32`, dimension `u32`, then `rows * dim` row-major `f32` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"AUFE";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn read_features(path: impl AsRef<Path>) -> Result<Array2<f32>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_features_from(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_features_from<R: Read>(mut reader: R) -> Result<Array2<f32>> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_up_to(&mut reader, &mut header)?;
    if got < HEADER_LEN {
        return Err(Error::Format(format!(
            "header is {got} bytes, expected {HEADER_LEN}"
        )));
    }
    if header[..4] != FEATURE_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &header[..4])));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = word(8) as usize;
    let dim = word(12) as usize;
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format(format!("header {rows}x{dim} overflows")))?;

    let mut payload = Vec::with_capacity(expected);
    reader
        .take(expected as u64 + 1)
        .read_to_end(&mut payload)
        .map_err(|e| Error::io("<reader>", e))?;
    if payload.len() != expected {
        return Err(Error::Length { expected, found: payload.len() });
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((rows, dim), values).expect("length checked above"))
}

pub fn write_features(path: impl AsRef<Path>, features: ArrayView2<f32>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_features_to(&mut w, features)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_features_to<W: Write>(mut writer: W, features: ArrayView2<f32>) -> Result<()> {
    let (rows, dim) = features.dim();
    let to_u32 = |n: usize| {
        u32::try_from(n).map_err(|_| Error::Format(format!("{n} does not fit in u32")))
    };
    let mut buf = Vec::with_capacity(HEADER_LEN + rows * dim * 4);
    buf.extend_from_slice(&FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&to_u32(rows)?.to_le_bytes());
    buf.extend_from_slice(&to_u32(dim)?.to_le_bytes());
    for v in features.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&buf).map_err(|e| Error::io("<writer>", e))
}

fn read_up_to<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io("<reader>", e)),
        }
    }
    Ok(filled)
}
