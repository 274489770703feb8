//! Action unit occurrence detection on precomputed CNN feature vectors.
//!
//! The crate covers the classification side of the pipeline: ingesting
//! per-frame features and AU intensity labels, subject-wise splitting and
//! class balancing, per-AU LDA, linear SVM and LSTM classifiers, landmark
//! based region routing, majority-vote ensembles and F1 / classification
//! rate evaluation.

pub mod au;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linear;
pub mod lstm;
pub mod regions;
pub mod seed;
pub mod synth;

mod linalg;

pub use au::AuId;
pub use error::{Error, Result};
