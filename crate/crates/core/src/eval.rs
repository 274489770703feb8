//! Per-AU F1 and classification rate, macro-averaged over AUs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::au::AuId;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

pub fn confusion(preds: &[bool], labels: &[bool]) -> Result<ConfusionCounts> {
    if preds.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Shape("no predictions".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `2 tp / (2 tp + fp + fn)`. With no positives in either predictions or
/// labels the score is 1.
pub fn f1_score(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        1.0
    } else {
        (2 * c.tp) as f64 / denom as f64
    }
}

pub fn classification_rate(c: &ConfusionCounts) -> Result<f64> {
    match c.total() {
        0 => Err(Error::EmptyEvaluation),
        n => Ok((c.tp + c.tn) as f64 / n as f64),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuMetrics {
    pub au: AuId,
    pub f1: f64,
    pub classification_rate: f64,
    pub counts: ConfusionCounts,
}

impl AuMetrics {
    pub fn from_counts(au: AuId, counts: ConfusionCounts) -> Result<Self> {
        Ok(AuMetrics { au, f1: f1_score(&counts), classification_rate: classification_rate(&counts)?, counts })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub per_au: Vec<AuMetrics>,
    pub macro_f1: f64,
    pub macro_rate: f64,
}

/// Unweighted means over the supplied AUs, which are kept in AU order.
pub fn macro_report(model: &str, mut per_au: Vec<AuMetrics>) -> Result<EvaluationReport> {
    if per_au.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    per_au.sort_by_key(|m| m.au);
    if per_au.windows(2).any(|w| w[0].au == w[1].au) {
        return Err(Error::Validation("duplicate AU in report".into()));
    }
    let n = per_au.len() as f64;
    let macro_f1 = per_au.iter().map(|m| m.f1).sum::<f64>() / n;
    let macro_rate = per_au.iter().map(|m| m.classification_rate).sum::<f64>() / n;
    Ok(EvaluationReport { model: model.to_string(), per_au, macro_f1, macro_rate })
}

impl EvaluationReport {
    pub fn get(&self, au: AuId) -> Option<&AuMetrics> {
        self.per_au.iter().find(|m| m.au == au)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Aligned text table, one row per AU plus the macro average.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model: {}", self.model);
        let _ = writeln!(out, "{:<6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "AU", "F1", "rate", "tp", "fp", "tn", "fn");
        for m in &self.per_au {
            let c = m.counts;
            let _ = writeln!(
                out,
                "{:<6} {:>8.4} {:>8.4} {:>8} {:>8} {:>8} {:>8}",
                format!("AU{}", m.au),
                m.f1,
                m.classification_rate,
                c.tp,
                c.fp,
                c.tn,
                c.fn_
            );
        }
        let _ = writeln!(out, "{:<6} {:>8.4} {:>8.4}", "macro", self.macro_f1, self.macro_rate);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,au,f1,classification_rate,tp,fp,tn,fn\n");
        for m in &self.per_au {
            let c = m.counts;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.model, m.au, m.f1, m.classification_rate, c.tp, c.fp, c.tn, c.fn_
            );
        }
        out
    }
}

/// Side-by-side macro and per-AU F1 for several reports.
pub fn comparison_table(reports: &[EvaluationReport]) -> String {
    let mut aus: Vec<AuId> = reports.iter().flat_map(|r| r.per_au.iter().map(|m| m.au)).collect();
    aus.sort();
    aus.dedup();
    let width = reports.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = write!(out, "{:<width$} {:>8} {:>8}", "model", "macroF1", "rate");
    for au in &aus {
        let _ = write!(out, " {:>6}", format!("AU{au}"));
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<width$} {:>8.4} {:>8.4}", r.model, r.macro_f1, r.macro_rate);
        for au in &aus {
            match r.get(*au) {
                Some(m) => {
                    let _ = write!(out, " {:>6.3}", m.f1);
                }
                None => {
                    let _ = write!(out, " {:>6}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
