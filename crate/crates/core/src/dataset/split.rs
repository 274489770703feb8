//! Subject-wise train/validation/test splits.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Disjoint subject sets for each split. Serialized as
/// `{"train": [...], "val": [...], "test": [...]}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitSpec {
    /// Assigns sorted subjects in 12:6:9 proportion; exactly 12/6/9 for 27
    /// subjects. Every split receives at least one subject when three or
    /// more are available.
    pub fn default_for(subjects: &[String]) -> Result<Self> {
        let mut sorted = subjects.to_vec();
        sorted.sort();
        sorted.dedup();
        let n = sorted.len();
        if n < 3 {
            return Err(Error::InsufficientData(format!(
                "{n} subjects cannot fill three splits"
            )));
        }
        let mut n_train = (n * 12 + 13) / 27;
        let mut n_val = (n * 6 + 13) / 27;
        n_train = n_train.clamp(1, n - 2);
        n_val = n_val.clamp(1, n - n_train - 1);
        let test = sorted.split_off(n_train + n_val);
        let val = sorted.split_off(n_train);
        Ok(SplitSpec { train: sorted, val, test })
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(s) {
                return Err(Error::Validation(format!(
                    "subject `{s}` appears in more than one split"
                )));
            }
        }
        Ok(())
    }
}

pub fn read_split_spec(path: impl AsRef<Path>) -> Result<SplitSpec> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let spec: SplitSpec = serde_json::from_reader(file)?;
    spec.validate()?;
    Ok(spec)
}

pub fn write_split_spec(path: impl AsRef<Path>, spec: &SplitSpec) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(spec)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Frame indices of a [`Dataset`] for each split.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions the frames of `dataset` by subject membership.
pub fn make_splits(dataset: &Dataset, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let loaded: BTreeSet<String> = dataset.subjects().into_iter().collect();
    for s in spec.train.iter().chain(&spec.val).chain(&spec.test) {
        if !loaded.contains(s) {
            return Err(Error::Lookup { kind: "subject", name: s.clone() });
        }
    }
    let train: BTreeSet<&str> = spec.train.iter().map(String::as_str).collect();
    let val: BTreeSet<&str> = spec.val.iter().map(String::as_str).collect();
    let test: BTreeSet<&str> = spec.test.iter().map(String::as_str).collect();

    let mut out = SplitIndices::default();
    for (i, f) in dataset.frames().iter().enumerate() {
        let s = f.subject.as_str();
        if train.contains(s) {
            out.train.push(i);
        } else if val.contains(s) {
            out.val.push(i);
        } else if test.contains(s) {
            out.test.push(i);
        } else {
            return Err(Error::Validation(format!(
                "subject `{s}` is not assigned to any split"
            )));
        }
    }
    Ok(out)
}
