//! L1-loss linear SVM trained by dual coordinate descent.
//!
//! The bias is learned as the weight of a constant unit feature, so the
//! problem solved is
//!
//! ```text
//! min  1/2 (|w|^2 + b^2) + C * sum_i max(0, 1 - y_i (w . x_i + b))
//! ```
//!
//! through its box-constrained dual `min 1/2 a'Qa - sum(a), 0 <= a_i <= C`
//! with `Q_ij = y_i y_j (x_i . x_j + 1)`. Coordinates are visited in
//! ascending index order every epoch.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::lda::check_training_data;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmTrainConfig {
    pub cost: f64,
    /// Stop once the largest projected-gradient magnitude in an epoch is
    /// at most this value.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Covariance shrinkage used when the same config trains an LDA model.
    pub ridge: f64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig { cost: 1.0, tolerance: 1e-6, max_epochs: 1000, ridge: 1e-6 }
    }
}

impl SvmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be positive, got {v}")))
            }
        };
        positive("cost", self.cost)?;
        positive("tolerance", self.tolerance)?;
        positive("ridge", self.ridge)?;
        if self.max_epochs == 0 {
            return Err(Error::Validation("max_epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub cost: f64,
    /// False when `max_epochs` ran out before the tolerance was met.
    pub converged: bool,
    pub epochs: usize,
}

impl SvmModel {
    pub fn decision_value(&self, x: ArrayView1<f64>) -> Result<f64> {
        super::affine_score(&self.weights, self.bias, x)
    }

    /// `1/2 (|w|^2 + b^2) + C * sum of hinge losses` on `(x, y)`.
    pub fn primal_objective(&self, x: ArrayView2<f64>, y: &[bool]) -> f64 {
        primal_objective(&self.weights, self.bias, self.cost, x, y)
    }
}

pub fn primal_objective(w: &[f64], b: f64, cost: f64, x: ArrayView2<f64>, y: &[bool]) -> f64 {
    let w = ArrayView1::from(w);
    let reg = 0.5 * (w.dot(&w) + b * b);
    let hinge: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &label)| {
            let s = if label { 1.0 } else { -1.0 };
            (1.0 - s * (w.dot(&row) + b)).max(0.0)
        })
        .sum();
    reg + cost * hinge
}

/// Full record of a training run.
#[derive(Clone, Debug)]
pub struct SvmFit {
    pub model: SvmModel,
    pub alphas: Vec<f64>,
    /// Dual objective `1/2 a'Qa - sum(a)` after each epoch.
    pub dual_history: Vec<f64>,
    /// Largest projected gradient seen in each epoch.
    pub violation_history: Vec<f64>,
}

pub fn train_svm(x: ArrayView2<f64>, y: &[bool], config: &SvmTrainConfig) -> Result<SvmModel> {
    fit_svm(x, y, config).map(|fit| fit.model)
}

pub fn fit_svm(x: ArrayView2<f64>, y: &[bool], config: &SvmTrainConfig) -> Result<SvmFit> {
    check_training_data(x, y)?;
    config.validate()?;
    let (n, dim) = x.dim();
    let c = config.cost;
    let signs: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let diag: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r) + 1.0).collect();

    let mut alpha = vec![0.0; n];
    let mut w = Array1::<f64>::zeros(dim);
    let mut b = 0.0;
    let mut dual_history = Vec::new();
    let mut violation_history = Vec::new();
    let mut converged = false;
    let mut epochs = 0;

    while epochs < config.max_epochs {
        let mut max_violation: f64 = 0.0;
        for i in 0..n {
            let xi = x.row(i);
            let g = signs[i] * (w.dot(&xi) + b) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * signs[i];
                if step != 0.0 {
                    w.scaled_add(step, &xi);
                    b += step;
                }
            }
        }
        epochs += 1;
        dual_history.push(0.5 * (w.dot(&w) + b * b) - alpha.iter().sum::<f64>());
        violation_history.push(max_violation);
        if max_violation <= config.tolerance {
            converged = true;
            break;
        }
    }

    if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("SVM solution is not finite".into()));
    }
    Ok(SvmFit {
        model: SvmModel { weights: w.to_vec(), bias: b, cost: c, converged, epochs },
        alphas: alpha,
        dual_history,
        violation_history,
    })
}
