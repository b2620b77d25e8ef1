//! Surface-EMG pattern analysis.
//!
//! The pipeline runs bundle ingestion ([`bundle`]), line-interference
//! cleaning ([`preprocess`]), Hudgins time-domain features ([`features`]),
//! per-subject signatures ([`signatures`]), then Ward clustering
//! ([`cluster`]), PCA ([`project`]) and LDA cross-validation ([`classify`]).

pub mod bundle;
pub mod classify;
pub mod cluster;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod preprocess;
pub mod project;
pub mod signatures;
pub mod synth;

pub use error::{Error, Result};
