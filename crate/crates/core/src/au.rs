//! The twelve action units annotated in the target database.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of annotated action units.
pub const AU_COUNT: usize = 12;

const AU_CODES: [u8; AU_COUNT] = [1, 2, 4, 5, 6, 9, 12, 15, 17, 20, 25, 26];

/// A FACS action unit code restricted to the annotated set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AuId(u8);

impl AuId {
    /// All annotated AUs in ascending order.
    pub const ALL: [AuId; AU_COUNT] = [
        AuId(1),
        AuId(2),
        AuId(4),
        AuId(5),
        AuId(6),
        AuId(9),
        AuId(12),
        AuId(15),
        AuId(17),
        AuId(20),
        AuId(25),
        AuId(26),
    ];

    pub fn new(code: u32) -> Result<Self> {
        AU_CODES
            .iter()
            .find(|&&c| u32::from(c) == code)
            .map(|&c| AuId(c))
            .ok_or_else(|| Error::Domain(format!("AU{code} is not one of {AU_CODES:?}")))
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Position of this AU in [`AuId::ALL`] (and in label-file column order).
    pub fn index(self) -> usize {
        AU_CODES.iter().position(|&c| c == self.0).expect("AuId is always valid")
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "Inner Brow Raiser",
            2 => "Outer Brow Raiser",
            4 => "Brow Lowerer",
            5 => "Upper Lid Raiser",
            6 => "Cheek Raiser",
            9 => "Nose Wrinkler",
            12 => "Lip Corner Puller",
            15 => "Lip Corner Depressor",
            17 => "Chin Raiser",
            20 => "Lip Stretcher",
            25 => "Lips Part",
            26 => "Jaw Drop",
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for AuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for AuId {
    type Err = Error;

    /// Accepts `12`, `au12` or `AU12`.
    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .trim()
            .trim_start_matches("au")
            .trim_start_matches("AU");
        let code: u32 = digits
            .parse()
            .map_err(|_| Error::Domain(format!("`{s}` is not an action unit")))?;
        AuId::new(code)
    }
}

impl Serialize for AuId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for AuId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let code = u32::deserialize(deserializer)?;
        AuId::new(code).map_err(serde::de::Error::custom)
    }
}
