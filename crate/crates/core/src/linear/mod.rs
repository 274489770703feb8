//! Per-AU linear classifiers: LDA and linear SVM.

mod lda;
mod svm;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::au::AuId;
use crate::dataset::{apply_standardizer, balance, Dataset, StandardizationParams};
use crate::error::{Error, Result};
use crate::seed::au_seed;

pub use lda::{train_lda, LdaModel};
pub use svm::{fit_svm, primal_objective, train_svm, SvmFit, SvmModel, SvmTrainConfig};

pub(crate) fn affine_score(weights: &[f64], bias: f64, x: ArrayView1<f64>) -> Result<f64> {
    if x.len() != weights.len() {
        return Err(Error::Shape(format!(
            "input has {} features, model expects {}",
            x.len(),
            weights.len()
        )));
    }
    Ok(ArrayView1::from(weights).dot(&x) + bias)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Lda,
    Svm,
}

impl fmt::Display for LinearKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinearKind::Lda => "lda",
            LinearKind::Svm => "svm",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LinearModel {
    Lda(LdaModel),
    Svm(SvmModel),
}

impl LinearModel {
    pub fn kind(&self) -> LinearKind {
        match self {
            LinearModel::Lda(_) => LinearKind::Lda,
            LinearModel::Svm(_) => LinearKind::Svm,
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            LinearModel::Lda(m) => &m.weights,
            LinearModel::Svm(m) => &m.weights,
        }
    }

    pub fn bias(&self) -> f64 {
        match self {
            LinearModel::Lda(m) => m.bias,
            LinearModel::Svm(m) => m.bias,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights().len()
    }

    pub fn converged(&self) -> bool {
        match self {
            LinearModel::Lda(_) => true,
            LinearModel::Svm(m) => m.converged,
        }
    }

    /// `w . x + b`; the frame is predicted present when this is `>= 0`.
    pub fn decision_value(&self, x: ArrayView1<f64>) -> Result<f64> {
        affine_score(self.weights(), self.bias(), x)
    }

    pub fn decision_values(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                x.ncols(),
                self.dim()
            )));
        }
        Ok(x.dot(&ArrayView1::from(self.weights())) + self.bias())
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> Result<bool> {
        Ok(self.decision_value(x)? >= 0.0)
    }
}

pub fn train_linear(
    kind: LinearKind,
    x: ArrayView2<f64>,
    y: &[bool],
    config: &SvmTrainConfig,
) -> Result<LinearModel> {
    match kind {
        LinearKind::Lda => train_lda(x, y, config.ridge).map(LinearModel::Lda),
        LinearKind::Svm => train_svm(x, y, config).map(LinearModel::Svm),
    }
}

/// Balanced, standardized training matrix for one AU.
pub fn prepare_balanced(
    dataset: &Dataset,
    indices: &[usize],
    standardizer: &StandardizationParams,
    au: AuId,
    threshold: u8,
    seed: u64,
) -> Result<(Array2<f64>, Vec<bool>)> {
    let labels = dataset.labels(indices, au, threshold);
    let chosen = balance(&labels, au, seed)?;
    let rows: Vec<usize> = chosen.iter().map(|&k| indices[k]).collect();
    let x = apply_standardizer(standardizer, dataset.feature_matrix(&rows).view())?;
    let y = chosen.iter().map(|&k| labels[k]).collect();
    Ok((x, y))
}

/// Models for the AUs that trained, and the error for each AU that did not.
#[derive(Debug)]
pub struct PerAu<T> {
    pub models: BTreeMap<AuId, T>,
    pub failures: BTreeMap<AuId, Error>,
}

impl<T> PerAu<T> {
    pub fn from_results(results: Vec<(AuId, Result<T>)>) -> Self {
        let mut models = BTreeMap::new();
        let mut failures = BTreeMap::new();
        for (au, r) in results {
            match r {
                Ok(m) => {
                    models.insert(au, m);
                }
                Err(e) => {
                    failures.insert(au, e);
                }
            }
        }
        PerAu { models, failures }
    }
}

/// Trains one independent model per AU on its own balanced subset of
/// `train`. A failing AU is reported without stopping the others.
#[allow(clippy::too_many_arguments)]
pub fn train_per_au(
    dataset: &Dataset,
    train: &[usize],
    standardizer: &StandardizationParams,
    aus: &[AuId],
    kind: LinearKind,
    config: &SvmTrainConfig,
    threshold: u8,
    seed: u64,
) -> PerAu<LinearModel> {
    let results = aus
        .par_iter()
        .map(|&au| {
            let r = prepare_balanced(dataset, train, standardizer, au, threshold, au_seed(seed, au))
                .and_then(|(x, y)| train_linear(kind, x.view(), &y, config));
            (au, r)
        })
        .collect();
    PerAu::from_results(results)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceFlag {
    Converged,
    MaxEpochsReached,
}

/// On-disk form of a trained linear model.
///
/// Floats are written in shortest round-trip form, so reading a file back
/// reproduces every weight bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModelFile {
    pub kind: LinearKind,
    pub au: AuId,
    pub dimension: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: SvmTrainConfig,
    pub convergence_flag: ConvergenceFlag,
    /// Feature set the model was trained on.
    pub features: String,
    pub standardizer: StandardizationParams,
}

impl LinearModelFile {
    pub fn new(
        model: &LinearModel,
        au: AuId,
        config: &SvmTrainConfig,
        features: &str,
        standardizer: &StandardizationParams,
    ) -> Self {
        LinearModelFile {
            kind: model.kind(),
            au,
            dimension: model.dim(),
            weights: model.weights().to_vec(),
            bias: model.bias(),
            config: config.clone(),
            convergence_flag: if model.converged() {
                ConvergenceFlag::Converged
            } else {
                ConvergenceFlag::MaxEpochsReached
            },
            features: features.to_string(),
            standardizer: standardizer.clone(),
        }
    }

    pub fn model(&self) -> Result<LinearModel> {
        if self.weights.len() != self.dimension || self.standardizer.dim() != self.dimension {
            return Err(Error::Shape(format!(
                "model file declares dimension {} but holds {} weights and a {}-dim standardizer",
                self.dimension,
                self.weights.len(),
                self.standardizer.dim()
            )));
        }
        Ok(match self.kind {
            LinearKind::Lda => LinearModel::Lda(LdaModel { weights: self.weights.clone(), bias: self.bias }),
            LinearKind::Svm => LinearModel::Svm(SvmModel {
                weights: self.weights.clone(),
                bias: self.bias,
                cost: self.config.cost,
                converged: self.convergence_flag == ConvergenceFlag::Converged,
                epochs: 0,
            }),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
