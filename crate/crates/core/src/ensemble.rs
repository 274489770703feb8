//! Majority-vote ensembles over per-AU binary classifiers.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::au::AuId;
use crate::error::{Error, Result};

/// Strict majority of binary votes. A tie goes to the sign of the mean
/// member score, with a mean of exactly zero counting as present.
pub fn majority_vote(votes: &[bool], scores: &[f64]) -> Result<bool> {
    if votes.is_empty() || votes.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} votes and {} scores",
            votes.len(),
            scores.len()
        )));
    }
    let present = votes.iter().filter(|&&v| v).count();
    let absent = votes.len() - present;
    Ok(match present.cmp(&absent) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            mean >= 0.0
        }
    })
}

/// Something that scores every frame of an input; `score >= 0` is a
/// present vote.
pub trait Scorer<I: ?Sized> {
    fn name(&self) -> &str;
    fn score(&self, input: &I) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub frame: usize,
    pub member_votes: Vec<bool>,
    pub member_scores: Vec<f64>,
    pub decision: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsemblePrediction {
    pub decisions: Vec<bool>,
    pub records: Vec<VoteRecord>,
}

/// Scores `input` with every member and takes the per-frame majority vote.
pub fn ensemble_predict<I: ?Sized, S: Scorer<I>>(members: &[S], input: &I) -> Result<EnsemblePrediction> {
    if members.is_empty() {
        return Err(Error::Validation("ensemble has no members".into()));
    }
    let mut all_scores = Vec::with_capacity(members.len());
    for m in members {
        let s = m.score(input).map_err(|e| Error::Member { member: m.name().to_string(), source: Box::new(e) })?;
        all_scores.push(s);
    }
    let frames = all_scores[0].len();
    if let Some((i, s)) = all_scores.iter().enumerate().find(|(_, s)| s.len() != frames) {
        return Err(Error::Member {
            member: members[i].name().to_string(),
            source: Box::new(Error::Shape(format!("{} scores, expected {frames}", s.len()))),
        });
    }
    let mut decisions = Vec::with_capacity(frames);
    let mut records = Vec::with_capacity(frames);
    for t in 0..frames {
        let scores: Vec<f64> = all_scores.iter().map(|s| s[t]).collect();
        let votes: Vec<bool> = scores.iter().map(|&s| s >= 0.0).collect();
        let decision = majority_vote(&votes, &scores)?;
        decisions.push(decision);
        records.push(VoteRecord { frame: t, member_votes: votes, member_scores: scores, decision });
    }
    Ok(EnsemblePrediction { decisions, records })
}

/// A member model file and its family tag (e.g. `svm`, `lstm`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberRef {
    pub path: String,
    pub family: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub au: AuId,
    pub members: Vec<MemberRef>,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.members.len() < 2 {
            return Err(Error::Validation(format!(
                "ensemble for AU{} needs at least 2 members, has {}",
                self.au,
                self.members.len()
            )));
        }
        Ok(())
    }
}

/// Ensemble definition file: member model paths per AU.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub name: String,
    pub per_au: Vec<EnsembleSpec>,
}

impl EnsembleConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: EnsembleConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_au.is_empty() {
            return Err(Error::Validation(format!("ensemble `{}` lists no AUs", self.name)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.per_au {
            spec.validate()?;
            if !seen.insert(spec.au) {
                return Err(Error::Validation(format!("AU{} listed twice", spec.au)));
            }
        }
        Ok(())
    }
}

/// One audited ensemble decision.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub subject: String,
    pub frame: usize,
    pub au: AuId,
    pub record: VoteRecord,
}

/// CSV `subject,frame,au,decision,vote_1..vote_k,score_1..score_k` where
/// `k` is the largest member count.
pub fn write_audit_csv<W: Write>(writer: W, rows: &[AuditRow]) -> Result<()> {
    let k = rows.iter().map(|r| r.record.member_votes.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["subject".to_string(), "frame".into(), "au".into(), "decision".into()];
    header.extend((1..=k).map(|i| format!("vote_{i}")));
    header.extend((1..=k).map(|i| format!("score_{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.subject.clone(),
            r.frame.to_string(),
            r.au.to_string(),
            u8::from(r.record.decision).to_string(),
        ];
        let n = r.record.member_votes.len();
        rec.extend(r.record.member_votes.iter().map(|&v| u8::from(v).to_string()));
        rec.extend(std::iter::repeat_n(String::new(), k - n));
        rec.extend(r.record.member_scores.iter().map(f64::to_string));
        rec.extend(std::iter::repeat_n(String::new(), k - n));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<audit>", e))
}
