//! LSTM model files.
//!
//! Layout: magic `AULM`, version `u32 = 1`, header length `u32`, the JSON
//! header, then every parameter as a little-endian `f64` in the order of
//! [`LstmParams::to_flat`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{LstmConfig, LstmParams};
use crate::au::AuId;
use crate::dataset::StandardizationParams;
use crate::error::{Error, Result};

pub const LSTM_MAGIC: [u8; 4] = *b"AULM";
pub const LSTM_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmHeader {
    pub kind: String,
    pub au: AuId,
    pub features: String,
    pub config: LstmConfig,
    /// Epoch whose parameters are stored.
    pub epoch: usize,
    pub loss_history: Vec<f64>,
    pub validation_f1: Vec<f64>,
    pub input_dim: usize,
    pub hidden_units: usize,
    pub param_count: usize,
    pub standardizer: StandardizationParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmModelFile {
    pub header: LstmHeader,
    pub params: LstmParams,
}

impl LstmModelFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let flat = self.params.to_flat();
        let header_len = u32::try_from(header.len())
            .map_err(|_| Error::Format("header too large".into()))?;
        let mut out = Vec::with_capacity(12 + header.len() + 8 * flat.len());
        out.extend_from_slice(&LSTM_MAGIC);
        out.extend_from_slice(&LSTM_VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&header);
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Format("LSTM model file shorter than its preamble".into()));
        }
        if bytes[..4] != LSTM_MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != LSTM_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body_start = 12 + header_len;
        if bytes.len() < body_start {
            return Err(Error::Length { expected: body_start, found: bytes.len() });
        }
        let header: LstmHeader = serde_json::from_slice(&bytes[12..body_start])?;
        let expected = body_start + 8 * header.param_count;
        if bytes.len() != expected {
            return Err(Error::Length { expected, found: bytes.len() });
        }
        let flat: Vec<f64> = bytes[body_start..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let params = LstmParams::from_flat(header.input_dim, header.hidden_units, &flat)?;
        if header.standardizer.dim() != header.input_dim {
            return Err(Error::Shape("standardizer does not match input_dim".into()));
        }
        Ok(LstmModelFile { header, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
