use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

/// Fisher discriminant with a ridge-shrunk pooled covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LdaModel {
    pub fn decision_value(&self, x: ArrayView1<f64>) -> Result<f64> {
        super::affine_score(&self.weights, self.bias, x)
    }
}

pub(crate) fn check_training_data(x: ArrayView2<f64>, y: &[bool]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if !y.iter().any(|&b| b) || y.iter().all(|&b| b) {
        return Err(Error::DegenerateClass);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite training feature".into()));
    }
    Ok(())
}

fn class_rows(x: ArrayView2<f64>, y: &[bool], class: bool) -> Array2<f64> {
    let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
    x.select(Axis(0), &idx)
}

/// Trains `w = (S + r I)^-1 (mu_pos - mu_neg)` where `S` is the pooled
/// within-class covariance and `r = ridge * trace(S) / D` (or `ridge` when
/// `S` vanishes). The bias puts the boundary halfway between the projected
/// class means.
pub fn train_lda(x: ArrayView2<f64>, y: &[bool], ridge: f64) -> Result<LdaModel> {
    check_training_data(x, y)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Domain(format!("ridge {ridge} must be finite and >= 0")));
    }
    let dim = x.ncols();
    let pos = class_rows(x, y, true);
    let neg = class_rows(x, y, false);
    let mu_pos = pos.mean_axis(Axis(0)).expect("non-empty class");
    let mu_neg = neg.mean_axis(Axis(0)).expect("non-empty class");

    let centered_pos = &pos - &mu_pos;
    let centered_neg = &neg - &mu_neg;
    let dof = (y.len().saturating_sub(2)).max(1) as f64;
    let mut cov = (centered_pos.t().dot(&centered_pos) + centered_neg.t().dot(&centered_neg)) / dof;

    let trace: f64 = cov.diag().sum();
    let shrink = if trace > 0.0 { ridge * trace / dim as f64 } else { ridge };
    for i in 0..dim {
        cov[[i, i]] += shrink;
    }
    let diff: Array1<f64> = &mu_pos - &mu_neg;
    let w = solve_spd(cov, diff.view())?;
    let midpoint = (&mu_pos + &mu_neg) / 2.0;
    let bias = -w.dot(&midpoint);
    if !bias.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("LDA solution is not finite".into()));
    }
    Ok(LdaModel { weights: w.to_vec(), bias })
}
