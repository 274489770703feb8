use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension mean and (population) standard deviation fitted on the
/// training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationParams {
    pub fn identity(dim: usize) -> Self {
        StandardizationParams { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: ArrayView1<f64>) -> Result<Array1<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Shape(format!(
                "row has {} features, standardizer expects {}",
                row.len(),
                self.dim()
            )));
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect())
    }
}

/// Fits mean and population standard deviation per column. Columns with no
/// spread get a standard deviation of 1, mapping them to a constant 0.
pub fn fit_standardizer(train: ArrayView2<f64>) -> Result<StandardizationParams> {
    let n = train.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "standardizer needs at least 2 rows, got {n}"
        )));
    }
    let mean = train.mean_axis(Axis(0)).expect("n >= 2");
    let mut std = Vec::with_capacity(train.ncols());
    for (col, &m) in train.axis_iter(Axis(1)).zip(mean.iter()) {
        let var = col.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        let s = var.sqrt();
        if !s.is_finite() || !m.is_finite() {
            return Err(Error::Domain("non-finite training feature".into()));
        }
        std.push(if s <= 1e-12 * m.abs().max(1.0) { 1.0 } else { s });
    }
    Ok(StandardizationParams { mean: mean.to_vec(), std })
}

pub fn apply_standardizer(
    params: &StandardizationParams,
    features: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    if features.ncols() != params.dim() {
        return Err(Error::Shape(format!(
            "features have {} columns, standardizer expects {}",
            features.ncols(),
            params.dim()
        )));
    }
    let mean = ArrayView1::from(&params.mean);
    let std = ArrayView1::from(&params.std);
    Ok((&features - &mean) / &std)
}
