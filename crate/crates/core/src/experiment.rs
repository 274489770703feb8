//! Configuration-driven experiment runs: train, evaluate, crop manifests.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! models/<classifier>_au<N>.json   linear models
//! models/<classifier>_au<N>.aulm   LSTM models
//! logs/train.json                  per-AU timings and convergence flags
//! reports/<model>.{json,txt,csv}   evaluation reports
//! reports/comparison.txt
//! audit/<ensemble>.csv             per-frame ensemble votes
//! regions/manifest.csv
//! ```
//!
//! Every file is paired with `<file>.prov.json`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::au::AuId;
use crate::dataset::{
    apply_standardizer, build_sequences, fit_standardizer, full_test_sequence, make_splits, read_features,
    read_labels, read_landmarks, read_split_spec, Dataset, SequenceConfig, SplitIndices, StandardizationParams,
    SubjectTrack, DEFAULT_THRESHOLD, MAX_INTENSITY,
};
use crate::ensemble::{ensemble_predict, write_audit_csv, AuditRow, EnsembleConfig, EnsembleSpec, MemberRef, Scorer};
use crate::error::{Error, Result};
use crate::eval::{comparison_table, confusion, macro_report, AuMetrics, ConfusionCounts, EvaluationReport};
use crate::linear::{prepare_balanced, train_linear, ConvergenceFlag, LinearModel, LinearModelFile, SvmTrainConfig};
use crate::lstm::{self, predict_sequence, LstmConfig, LstmHeader, LstmModelFile, LSTM_MAGIC};
use crate::regions::{write_crop_manifest, region_for_au, ManifestFrame, ManifestSummary, Region, DEFAULT_MARGIN};
use crate::seed::{au_seed, named_seed};
use crate::synth::SyntheticLayout;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "AU_PIPELINE_THREADS";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPaths {
    /// Feature set tag to a directory of `<subject>.aufe` files.
    pub features: BTreeMap<String, PathBuf>,
    pub labels: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<PathBuf>,
    pub splits: PathBuf,
}

/// Which feature set a classifier reads: one tag for every AU, or a tag per
/// face region with each AU routed to its region.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureSource {
    Tag(String),
    Regions { upper: String, middle: String, lower: String },
}

impl FeatureSource {
    pub fn tag_for(&self, au: AuId) -> &str {
        match self {
            FeatureSource::Tag(t) => t,
            FeatureSource::Regions { upper, middle, lower } => match region_for_au(au) {
                Region::UpperHalf => upper,
                Region::Middle => middle,
                Region::LowerHalf => lower,
            },
        }
    }

    pub fn tags(&self) -> Vec<&str> {
        match self {
            FeatureSource::Tag(t) => vec![t],
            FeatureSource::Regions { upper, middle, lower } => vec![upper, middle, lower],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lda,
    Svm,
    Lstm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub name: String,
    pub kind: ClassifierKind,
    pub features: FeatureSource,
    /// SVM settings; LDA reads only `ridge`.
    #[serde(default)]
    pub linear: SvmTrainConfig,
    /// `input_dim` and `seed` are filled in per AU at training time.
    #[serde(default)]
    pub lstm: LstmConfig,
    #[serde(default)]
    pub sequences: SequenceConfig,
}

impl ClassifierSpec {
    fn extension(&self) -> &'static str {
        match self.kind {
            ClassifierKind::Lstm => "aulm",
            _ => "json",
        }
    }
}

/// Ensemble over named classifiers of the same experiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleDef {
    pub name: String,
    pub members: Vec<String>,
}

fn all_aus() -> Vec<AuId> {
    AuId::ALL.to_vec()
}

fn default_threshold() -> u8 {
    DEFAULT_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataPaths,
    #[serde(default = "all_aus")]
    pub aus: Vec<AuId>,
    #[serde(default = "default_threshold")]
    pub threshold: u8,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default)]
    pub ensembles: Vec<EnsembleDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// LSTM settings sized for a 64-dimensional desk-scale run.
pub fn desk_lstm_config() -> LstmConfig {
    LstmConfig {
        input_dim: 64,
        hidden_units: 16,
        learning_rate: 0.05,
        momentum: 0.9,
        weight_noise_std: 0.01,
        noise_on_biases: true,
        epochs: 8,
        seed: 0,
        clip_norm: Some(5.0),
    }
}

impl ExperimentConfig {
    /// Reads a JSON config; relative paths are taken from the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Ok(cfg.resolved(base))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Joins every relative path onto `base`.
    pub fn resolved(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.data.features.values_mut().for_each(fix);
        fix(&mut self.data.labels);
        fix(&mut self.data.splits);
        if let Some(l) = self.data.landmarks.as_mut() {
            fix(l);
        }
        fix(&mut self.output_dir);
        self
    }

    /// Config for a directory written by [`crate::synth::write_synthetic`],
    /// with LDA, SVM and LSTM classifiers and their majority-vote ensemble.
    pub fn for_synthetic(layout: &SyntheticLayout, output_dir: &str, seed: u64) -> Self {
        let tag = crate::synth::FULL_TAG.to_string();
        let classifier = |name: &str, kind| ClassifierSpec {
            name: name.into(),
            kind,
            features: FeatureSource::Tag(tag.clone()),
            linear: SvmTrainConfig::default(),
            lstm: desk_lstm_config(),
            sequences: SequenceConfig::default(),
        };
        ExperimentConfig {
            data: DataPaths {
                features: layout.features.iter().map(|(k, v)| (k.clone(), PathBuf::from(v))).collect(),
                labels: layout.labels.clone().into(),
                landmarks: Some(layout.landmarks.clone().into()),
                splits: layout.splits.clone().into(),
            },
            aus: all_aus(),
            threshold: DEFAULT_THRESHOLD,
            seed,
            output_dir: output_dir.into(),
            classifiers: vec![
                classifier("lda", ClassifierKind::Lda),
                classifier("svm", ClassifierKind::Svm),
                classifier("lstm", ClassifierKind::Lstm),
            ],
            ensembles: vec![EnsembleDef { name: "ensemble".into(), members: vec!["lda".into(), "svm".into(), "lstm".into()] }],
            threads: None,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(serde_json::to_vec(self)?)))
    }

    /// Checks everything that can be checked without reading data files.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        for (what, p) in [("label file", &self.data.labels), ("split file", &self.data.splits)] {
            if !p.is_file() {
                return bad(format!("{what} {} does not exist", p.display()));
            }
        }
        if let Some(p) = &self.data.landmarks {
            if !p.is_file() {
                return bad(format!("landmark file {} does not exist", p.display()));
            }
        }
        for (tag, dir) in &self.data.features {
            if !dir.is_dir() {
                return bad(format!("feature directory {} for `{tag}` does not exist", dir.display()));
            }
        }
        if self.aus.is_empty() {
            return bad("AU list is empty".into());
        }
        if self.aus.iter().collect::<BTreeSet<_>>().len() != self.aus.len() {
            return bad("AU list has duplicates".into());
        }
        if !(1..=MAX_INTENSITY).contains(&self.threshold) {
            return bad(format!("threshold {} outside 1..={MAX_INTENSITY}", self.threshold));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if self.output_dir.is_file() {
            return bad(format!("output_dir {} is a file", self.output_dir.display()));
        }
        let mut names = BTreeSet::new();
        for c in &self.classifiers {
            check_name(&c.name)?;
            if !names.insert(c.name.as_str()) {
                return bad(format!("classifier name `{}` used twice", c.name));
            }
            for tag in c.features.tags() {
                if !self.data.features.contains_key(tag) {
                    return Err(Error::Lookup { kind: "feature set", name: tag.to_string() });
                }
            }
            match c.kind {
                ClassifierKind::Lda if !(c.linear.ridge >= 0.0 && c.linear.ridge.is_finite()) => {
                    return bad(format!("{}: ridge must be >= 0", c.name));
                }
                ClassifierKind::Lda => {}
                ClassifierKind::Svm => c.linear.validate()?,
                ClassifierKind::Lstm => {
                    LstmConfig { input_dim: 1, ..c.lstm.clone() }.validate()?;
                    c.sequences.validate()?;
                }
            }
        }
        for e in &self.ensembles {
            check_name(&e.name)?;
            if !names.insert(e.name.as_str()) {
                return bad(format!("ensemble name `{}` clashes with another model", e.name));
            }
            if e.members.len() < 2 {
                return bad(format!("ensemble `{}` needs at least 2 members", e.name));
            }
            if e.members.iter().collect::<BTreeSet<_>>().len() != e.members.len() {
                return bad(format!("ensemble `{}` lists a member twice", e.name));
            }
            for m in &e.members {
                if !self.classifiers.iter().any(|c| &c.name == m) {
                    return Err(Error::Lookup { kind: "classifier", name: m.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn model_path(&self, classifier: &ClassifierSpec, au: AuId) -> PathBuf {
        self.output_dir.join("models").join(format!("{}_au{}.{}", classifier.name, au, classifier.extension()))
    }

    /// Ensembles from the config, as member model paths per AU.
    pub fn ensemble_configs(&self) -> Vec<EnsembleConfig> {
        self.ensembles
            .iter()
            .map(|e| EnsembleConfig {
                name: e.name.clone(),
                per_au: self
                    .aus
                    .iter()
                    .map(|&au| EnsembleSpec {
                        au,
                        members: e
                            .members
                            .iter()
                            .map(|m| {
                                let c = self.classifiers.iter().find(|c| &c.name == m).expect("validated member");
                                MemberRef {
                                    path: self.model_path(c, au).to_string_lossy().into_owned(),
                                    family: format!("{:?}", c.kind).to_lowercase(),
                                }
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect()
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
        let n = match (self.threads, cap) {
            (Some(t), Some(c)) => t.min(c),
            (Some(t), None) => t,
            (None, Some(c)) => c,
            (None, None) => 0,
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(Error::Validation(format!("name `{name}` must be non-empty [A-Za-z0-9_-]")));
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Overall outcome of a run over many AUs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    Partial,
    Failed,
}

impl RunStatus {
    fn from_counts(ok: usize, failed: usize) -> Self {
        match (ok, failed) {
            (0, _) => RunStatus::Failed,
            (_, 0) => RunStatus::Success,
            _ => RunStatus::Partial,
        }
    }
}

/// Loaded feature sets sharing one frame order, plus the split.
pub struct ExperimentData {
    pub datasets: BTreeMap<String, Dataset>,
    pub splits: SplitIndices,
}

impl ExperimentData {
    pub fn load(config: &ExperimentConfig, tags: &BTreeSet<String>) -> Result<Self> {
        let labels = read_labels(&config.data.labels)?;
        let mut subjects: Vec<&str> = labels.iter().map(|r| r.subject.as_str()).collect();
        subjects.sort_unstable();
        subjects.dedup();
        let mut datasets = BTreeMap::new();
        for tag in tags {
            let dir = config
                .data
                .features
                .get(tag)
                .ok_or_else(|| Error::Lookup { kind: "feature set", name: tag.clone() })?;
            let mut features = BTreeMap::new();
            for &s in &subjects {
                features.insert(s.to_string(), read_features(dir.join(format!("{s}.aufe")))?);
            }
            datasets.insert(tag.clone(), Dataset::assemble(&labels, &features, None)?);
        }
        let spec = read_split_spec(&config.data.splits)?;
        let splits = match datasets.values().next() {
            Some(d) => make_splits(d, &spec)?,
            None => return Err(Error::Validation("no feature sets requested".into())),
        };
        Ok(ExperimentData { datasets, splits })
    }

    fn dataset(&self, tag: &str) -> Result<&Dataset> {
        self.datasets.get(tag).ok_or_else(|| Error::Lookup { kind: "feature set", name: tag.to_string() })
    }

    fn any(&self) -> &Dataset {
        self.datasets.values().next().expect("at least one feature set")
    }

    /// Split indices grouped per subject, in frame order.
    fn by_subject(&self, indices: &[usize]) -> Vec<(String, Vec<usize>)> {
        let frames = self.any().frames();
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for &i in indices {
            match out.last_mut() {
                Some((s, v)) if *s == frames[i].subject => v.push(i),
                _ => out.push((frames[i].subject.clone(), vec![i])),
            }
        }
        out
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    file: &'a str,
    sha256: String,
    config_sha256: &'a str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    derived_seed: Option<u64>,
    versions: BTreeMap<&'static str, &'static str>,
}

/// Writes `bytes` to `root/rel` and a provenance record next to it.
fn write_output(root: &Path, rel: &str, bytes: &[u8], config_hash: &str, seed: u64, derived: Option<u64>) -> Result<()> {
    let path = root.join(rel);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    let prov = Provenance {
        file: rel,
        sha256: hex(&Sha256::digest(bytes)),
        config_sha256: config_hash,
        seed,
        derived_seed: derived,
        versions: BTreeMap::from([("auflow-core", env!("CARGO_PKG_VERSION"))]),
    };
    let prov_path = root.join(format!("{rel}.prov.json"));
    let text = serde_json::to_string_pretty(&prov)? + "\n";
    fs::write(&prov_path, text).map_err(|e| Error::io(&prov_path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuTrainLog {
    pub au: AuId,
    pub ok: bool,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_flag: Option<ConvergenceFlag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTrainLog {
    pub name: String,
    pub kind: ClassifierKind,
    pub aus: Vec<AuTrainLog>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub classifiers: Vec<ClassifierTrainLog>,
}

impl TrainSummary {
    pub fn status(&self) -> RunStatus {
        let all = self.classifiers.iter().flat_map(|c| &c.aus);
        let ok = all.clone().filter(|a| a.ok).count();
        RunStatus::from_counts(ok, all.count() - ok)
    }
}

/// Standardized frames of one subject, ready for sequence building.
struct SubjectBlock {
    subject: String,
    indices: Vec<usize>,
    frames: Vec<usize>,
    features: Array2<f64>,
}

fn subject_blocks(
    data: &ExperimentData,
    ds: &Dataset,
    std: &StandardizationParams,
    indices: &[usize],
) -> Result<Vec<SubjectBlock>> {
    data.by_subject(indices)
        .into_iter()
        .map(|(subject, idx)| {
            let features = apply_standardizer(std, ds.feature_matrix(&idx).view())?;
            let frames = idx.iter().map(|&i| ds.frames()[i].frame_index).collect();
            Ok(SubjectBlock { subject, indices: idx, frames, features })
        })
        .collect()
}

struct TrainContext<'a> {
    config: &'a ExperimentConfig,
    data: &'a ExperimentData,
    standardizers: BTreeMap<String, StandardizationParams>,
    train_blocks: BTreeMap<String, Vec<SubjectBlock>>,
    val_blocks: BTreeMap<String, Vec<SubjectBlock>>,
    hash: String,
}

impl TrainContext<'_> {
    fn train_au(&self, spec: &ClassifierSpec, au: AuId) -> Result<AuTrainLog> {
        let tag = spec.features.tag_for(au);
        let ds = self.data.dataset(tag)?;
        let std = &self.standardizers[tag];
        let seed = au_seed(named_seed(self.config.seed, &spec.name), au);
        let path = self.config.model_path(spec, au);
        let rel = path
            .strip_prefix(&self.config.output_dir)
            .expect("model path under output_dir")
            .to_string_lossy()
            .into_owned();
        let mut log = AuTrainLog {
            au,
            ok: true,
            seconds: 0.0,
            model: Some(rel.clone()),
            convergence_flag: None,
            selected_epoch: None,
            error: None,
        };
        let bytes = match spec.kind {
            ClassifierKind::Lda | ClassifierKind::Svm => {
                let kind = if spec.kind == ClassifierKind::Lda {
                    crate::linear::LinearKind::Lda
                } else {
                    crate::linear::LinearKind::Svm
                };
                let (x, y) = prepare_balanced(ds, &self.data.splits.train, std, au, self.config.threshold, seed)?;
                let model = train_linear(kind, x.view(), &y, &spec.linear)?;
                let file = LinearModelFile::new(&model, au, &spec.linear, tag, std);
                log.convergence_flag = Some(file.convergence_flag);
                file.to_json()?.into_bytes()
            }
            ClassifierKind::Lstm => {
                let threshold = self.config.threshold;
                let labels = |blocks: &[SubjectBlock]| -> Vec<Vec<bool>> {
                    blocks.iter().map(|b| ds.labels(&b.indices, au, threshold)).collect()
                };
                let (train_b, val_b) = (&self.train_blocks[tag], &self.val_blocks[tag]);
                let (train_l, val_l) = (labels(train_b), labels(val_b));
                let train_seqs = build_sequences(&tracks(train_b, &train_l), au, &spec.sequences)?;
                let val_seqs = full_test_sequence(&tracks(val_b, &val_l), au)?;
                let cfg = LstmConfig { input_dim: ds.dim(), seed, ..spec.lstm.clone() };
                let trained = lstm::train(&train_seqs.sequences, &cfg, Some(&val_seqs.sequences))?;
                let epoch = match trained.outcome.selected_epoch {
                    0 => cfg.epochs,
                    e => e,
                };
                log.selected_epoch = Some(epoch);
                let file = LstmModelFile {
                    header: LstmHeader {
                        kind: "lstm".into(),
                        au,
                        features: tag.to_string(),
                        input_dim: cfg.input_dim,
                        hidden_units: cfg.hidden_units,
                        param_count: trained.params.len(),
                        config: cfg,
                        epoch,
                        loss_history: trained.outcome.loss_history,
                        validation_f1: trained.outcome.validation_f1,
                        standardizer: std.clone(),
                    },
                    params: trained.params,
                };
                file.to_bytes()?
            }
        };
        write_output(&self.config.output_dir, &rel, &bytes, &self.hash, self.config.seed, Some(seed))?;
        Ok(log)
    }
}

fn tracks<'a>(blocks: &'a [SubjectBlock], labels: &'a [Vec<bool>]) -> Vec<SubjectTrack<'a>> {
    blocks
        .iter()
        .zip(labels)
        .map(|(b, l)| SubjectTrack { subject: &b.subject, frame_indices: &b.frames, features: b.features.view(), labels: l })
        .collect()
}

/// Load, split, standardize, balance and train every classifier on every
/// AU. Per-AU failures are logged and do not stop the run.
pub fn train(config: &ExperimentConfig) -> Result<TrainSummary> {
    config.validate()?;
    if config.classifiers.is_empty() {
        return Err(Error::Validation("no classifiers configured".into()));
    }
    let tags: BTreeSet<String> = config
        .classifiers
        .iter()
        .flat_map(|c| c.features.tags())
        .map(str::to_string)
        .collect();
    let data = ExperimentData::load(config, &tags)?;
    if data.splits.train.len() < 2 {
        return Err(Error::InsufficientData("training split holds fewer than 2 frames".into()));
    }

    let mut standardizers = BTreeMap::new();
    let mut train_blocks = BTreeMap::new();
    let mut val_blocks = BTreeMap::new();
    let lstm_tags: BTreeSet<&str> = config
        .classifiers
        .iter()
        .filter(|c| c.kind == ClassifierKind::Lstm)
        .flat_map(|c| c.features.tags())
        .collect();
    for tag in &tags {
        let ds = data.dataset(tag)?;
        let std = fit_standardizer(ds.feature_matrix(&data.splits.train).view())?;
        if lstm_tags.contains(tag.as_str()) {
            train_blocks.insert(tag.clone(), subject_blocks(&data, ds, &std, &data.splits.train)?);
            val_blocks.insert(tag.clone(), subject_blocks(&data, ds, &std, &data.splits.val)?);
        }
        standardizers.insert(tag.clone(), std);
    }
    let ctx = TrainContext { config, data: &data, standardizers, train_blocks, val_blocks, hash: config.hash()? };

    let pool = config.pool()?;
    let mut summary = TrainSummary { classifiers: Vec::new() };
    for spec in &config.classifiers {
        let aus: Vec<AuTrainLog> = pool.install(|| {
            config
                .aus
                .par_iter()
                .map(|&au| {
                    let start = Instant::now();
                    let r = ctx.train_au(spec, au);
                    let seconds = start.elapsed().as_secs_f64();
                    match r {
                        Ok(log) => AuTrainLog { seconds, ..log },
                        Err(e) => AuTrainLog {
                            au,
                            ok: false,
                            seconds,
                            model: None,
                            convergence_flag: None,
                            selected_epoch: None,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect()
        });
        summary.classifiers.push(ClassifierTrainLog { name: spec.name.clone(), kind: spec.kind, aus });
    }
    let log = serde_json::to_string_pretty(&summary)? + "\n";
    write_output(&config.output_dir, "logs/train.json", log.as_bytes(), &ctx.hash, config.seed, None)?;
    Ok(summary)
}

/// A model file loaded for scoring.
#[derive(Clone, Debug)]
pub enum TrainedModel {
    Linear { file: LinearModelFile, model: LinearModel },
    Lstm(LstmModelFile),
}

impl TrainedModel {
    /// Reads a linear JSON model or an LSTM binary model, by content.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(&LSTM_MAGIC) {
            return LstmModelFile::from_bytes(&bytes).map(TrainedModel::Lstm);
        }
        let file: LinearModelFile = serde_json::from_slice(&bytes)?;
        let model = file.model()?;
        Ok(TrainedModel::Linear { file, model })
    }

    pub fn au(&self) -> AuId {
        match self {
            TrainedModel::Linear { file, .. } => file.au,
            TrainedModel::Lstm(f) => f.header.au,
        }
    }

    pub fn features(&self) -> &str {
        match self {
            TrainedModel::Linear { file, .. } => &file.features,
            TrainedModel::Lstm(f) => &f.header.features,
        }
    }

    pub fn standardizer(&self) -> &StandardizationParams {
        match self {
            TrainedModel::Linear { file, .. } => &file.standardizer,
            TrainedModel::Lstm(f) => &f.header.standardizer,
        }
    }

    /// Per-frame scores (`>= 0` is present) for frames `indices` of one
    /// subject, given in frame order. LSTMs see them as one sequence.
    pub fn score_subject(&self, data: &ExperimentData, indices: &[usize]) -> Result<Vec<f64>> {
        let ds = data.dataset(self.features())?;
        let std = self.standardizer();
        if std.dim() != ds.dim() {
            return Err(Error::Validation(format!(
                "model standardizer has dimension {} but feature set `{}` has {}",
                std.dim(),
                self.features(),
                ds.dim()
            )));
        }
        let x = apply_standardizer(std, ds.feature_matrix(indices).view())?;
        match self {
            TrainedModel::Linear { model, .. } => Ok(model.decision_values(x.view())?.to_vec()),
            TrainedModel::Lstm(f) => {
                let frames = ds.frames();
                if let Some(w) = indices.windows(2).find(|w| frames[w[1]].frame_index != frames[w[0]].frame_index + 1) {
                    return Err(Error::Ordering(format!(
                        "subject {}: frame {} followed by {}",
                        frames[w[0]].subject, frames[w[0]].frame_index, frames[w[1]].frame_index
                    )));
                }
                Ok(predict_sequence(&f.params, x.view())?.scores)
            }
        }
    }
}

struct Member<'a> {
    name: String,
    model: &'a TrainedModel,
}

struct SubjectInput<'a> {
    data: &'a ExperimentData,
    indices: &'a [usize],
}

impl Scorer<SubjectInput<'_>> for Member<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, input: &SubjectInput<'_>) -> Result<Vec<f64>> {
        self.model.score_subject(input.data, input.indices)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub model: String,
    pub au: Option<AuId>,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub reports: Vec<EvaluationReport>,
    pub failures: Vec<EvalFailure>,
    pub audit_rows: BTreeMap<String, usize>,
}

impl EvalSummary {
    pub fn status(&self) -> RunStatus {
        RunStatus::from_counts(self.reports.len(), self.failures.len())
    }
}

fn load_cached<'c>(cache: &'c mut HashMap<PathBuf, Result<TrainedModel>>, path: &Path) -> &'c Result<TrainedModel> {
    cache.entry(path.to_path_buf()).or_insert_with(|| TrainedModel::load(path))
}

fn counts_for(
    data: &ExperimentData,
    subjects: &[(String, Vec<usize>)],
    au: AuId,
    threshold: u8,
    mut score: impl FnMut(&[usize]) -> Result<Vec<bool>>,
) -> Result<ConfusionCounts> {
    let mut total = ConfusionCounts::default();
    for (_, idx) in subjects {
        let preds = score(idx)?;
        total += confusion(&preds, &data.any().labels(idx, au, threshold))?;
    }
    Ok(total)
}

/// Scores the test split with every trained classifier and ensemble and
/// writes their reports. `extra` adds ensembles defined by model paths.
pub fn evaluate(config: &ExperimentConfig, extra: &[EnsembleConfig]) -> Result<EvalSummary> {
    config.validate()?;
    for e in extra {
        e.validate()?;
        check_name(&e.name)?;
    }
    let mut ensembles = config.ensemble_configs();
    ensembles.extend(extra.iter().cloned());
    let names: Vec<&str> = config.classifiers.iter().map(|c| c.name.as_str()).chain(ensembles.iter().map(|e| e.name.as_str())).collect();
    if names.is_empty() {
        return Err(Error::Validation("nothing to evaluate".into()));
    }
    if names.iter().collect::<BTreeSet<_>>().len() != names.len() {
        return Err(Error::Validation("model and ensemble names must be unique".into()));
    }

    let mut cache: HashMap<PathBuf, Result<TrainedModel>> = HashMap::new();
    for c in &config.classifiers {
        for &au in &config.aus {
            load_cached(&mut cache, &config.model_path(c, au));
        }
    }
    for e in &ensembles {
        for spec in &e.per_au {
            for m in &spec.members {
                load_cached(&mut cache, Path::new(&m.path));
            }
        }
    }
    let mut tags: BTreeSet<String> = cache.values().flatten().map(|m| m.features().to_string()).collect();
    if tags.is_empty() {
        tags.extend(config.classifiers.iter().flat_map(|c| c.features.tags()).map(str::to_string));
    }
    let tags: BTreeSet<String> = tags.into_iter().filter(|t| config.data.features.contains_key(t)).collect();
    if tags.is_empty() {
        return Err(Error::Validation("no model reads a configured feature set".into()));
    }
    let data = ExperimentData::load(config, &tags)?;
    let subjects = data.by_subject(&data.splits.test);
    if subjects.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let hash = config.hash()?;
    let pool = config.pool()?;
    let threshold = config.threshold;
    let model_for = |path: &Path, au: AuId| -> Result<&TrainedModel> {
        let m = cache[path].as_ref().map_err(|e| Error::Lookup {
            kind: "model",
            name: format!("{} ({e})", path.display()),
        })?;
        if m.au() != au {
            return Err(Error::Validation(format!("{} holds AU{}, expected AU{au}", path.display(), m.au())));
        }
        Ok(m)
    };

    let mut summary = EvalSummary { reports: Vec::new(), failures: Vec::new(), audit_rows: BTreeMap::new() };
    let collect = |name: &str, results: Vec<(AuId, Result<AuMetrics>)>, summary: &mut EvalSummary| {
        let mut ok = Vec::new();
        for (au, r) in results {
            match r {
                Ok(m) => ok.push(m),
                Err(e) => summary.failures.push(EvalFailure { model: name.into(), au: Some(au), error: e.to_string() }),
            }
        }
        match macro_report(name, ok) {
            Ok(r) => summary.reports.push(r),
            Err(e) => summary.failures.push(EvalFailure { model: name.into(), au: None, error: e.to_string() }),
        }
    };

    for c in &config.classifiers {
        let results: Vec<(AuId, Result<AuMetrics>)> = pool.install(|| {
            config
                .aus
                .par_iter()
                .map(|&au| {
                    let r = model_for(&config.model_path(c, au), au).and_then(|m| {
                        let counts = counts_for(&data, &subjects, au, threshold, |idx| {
                            Ok(m.score_subject(&data, idx)?.iter().map(|&s| s >= 0.0).collect())
                        })?;
                        AuMetrics::from_counts(au, counts)
                    });
                    (au, r)
                })
                .collect()
        });
        collect(&c.name, results, &mut summary);
    }

    for e in &ensembles {
        let results: Vec<(AuId, Result<(AuMetrics, Vec<AuditRow>)>)> = pool.install(|| {
            e.per_au
                .par_iter()
                .map(|spec| {
                    let run = || -> Result<(AuMetrics, Vec<AuditRow>)> {
                        let members = spec
                            .members
                            .iter()
                            .map(|m| {
                                let model = model_for(Path::new(&m.path), spec.au)
                                    .map_err(|err| Error::Member { member: m.path.clone(), source: Box::new(err) })?;
                                Ok(Member { name: m.path.clone(), model })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let mut audit = Vec::new();
                        let counts = counts_for(&data, &subjects, spec.au, threshold, |idx| {
                            let pred = ensemble_predict(&members, &SubjectInput { data: &data, indices: idx })?;
                            let frames = data.any().frames();
                            for (rec, &i) in pred.records.into_iter().zip(idx) {
                                audit.push(AuditRow {
                                    subject: frames[i].subject.clone(),
                                    frame: frames[i].frame_index,
                                    au: spec.au,
                                    record: crate::ensemble::VoteRecord { frame: frames[i].frame_index, ..rec },
                                });
                            }
                            Ok(pred.decisions)
                        })?;
                        Ok((AuMetrics::from_counts(spec.au, counts)?, audit))
                    };
                    (spec.au, run())
                })
                .collect()
        });
        let mut audit: Vec<AuditRow> = Vec::new();
        let metrics = results
            .into_iter()
            .map(|(au, r)| {
                (
                    au,
                    r.map(|(m, rows)| {
                        audit.extend(rows);
                        m
                    }),
                )
            })
            .collect();
        collect(&e.name, metrics, &mut summary);
        audit.sort_by(|a, b| a.subject.cmp(&b.subject).then(a.frame.cmp(&b.frame)).then(a.au.cmp(&b.au)));
        let mut buf = Vec::new();
        write_audit_csv(&mut buf, &audit)?;
        write_output(&config.output_dir, &format!("audit/{}.csv", e.name), &buf, &hash, config.seed, None)?;
        summary.audit_rows.insert(e.name.clone(), audit.len());
    }

    for r in &summary.reports {
        let root = &config.output_dir;
        write_output(root, &format!("reports/{}.json", r.model), r.to_json()?.as_bytes(), &hash, config.seed, None)?;
        write_output(root, &format!("reports/{}.txt", r.model), r.to_table().as_bytes(), &hash, config.seed, None)?;
        write_output(root, &format!("reports/{}.csv", r.model), r.to_csv().as_bytes(), &hash, config.seed, None)?;
    }
    if !summary.reports.is_empty() {
        let table = comparison_table(&summary.reports);
        write_output(&config.output_dir, "reports/comparison.txt", table.as_bytes(), &hash, config.seed, None)?;
    }
    Ok(summary)
}

/// Writes the crop manifest for every labelled frame and configured AU.
pub fn regions(config: &ExperimentConfig, margin: Option<f64>) -> Result<(PathBuf, ManifestSummary)> {
    config.validate()?;
    let lm_path = config
        .data
        .landmarks
        .as_ref()
        .ok_or_else(|| Error::Validation("config has no landmark file".into()))?;
    let margin = margin.unwrap_or(DEFAULT_MARGIN);
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Validation(format!("margin {margin} must be >= 0")));
    }
    let labels = read_labels(&config.data.labels)?;
    let landmarks = read_landmarks(lm_path)?;
    let frames: Vec<ManifestFrame<'_>> = labels
        .iter()
        .map(|r| ManifestFrame {
            subject: &r.subject,
            frame: r.frame,
            landmarks: landmarks.get(&(r.subject.clone(), r.frame)),
        })
        .collect();
    let rel = "regions/manifest.csv";
    let mut bytes = Vec::new();
    let summary = write_crop_manifest(&mut bytes, &frames, &config.aus, margin)?;
    write_output(&config.output_dir, rel, &bytes, &config.hash()?, config.seed, None)?;
    Ok((config.output_dir.join(rel), summary))
}

/// Comparison table over saved report JSON files.
pub fn report(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::Validation("no report files given".into()));
    }
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect::<Result<Vec<EvaluationReport>>>()?;
    Ok(comparison_table(&reports))
}
