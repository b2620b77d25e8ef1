//! Gesture and subject-group classification.

pub mod cv;
pub mod lda;
pub mod stats;

pub use cv::{
    cv_gesture, cv_subject_group_signature, cv_subject_group_window, CvReport, FoldResult,
    GestureCvConfig, Scheme, Scoring, DEFAULT_GAMMA,
};
pub use lda::{lda_fit, LdaModel, ScatterStats};
pub use stats::{welch_ttest, BoxStats, Summary, TTest};

/// The six clinically relevant motions used for gesture recognition, by
/// canonical catalog name.
pub const CLINICAL_GESTURES: [&str; 6] = [
    "wrist flexion",
    "wrist extension",
    "forearm pronation",
    "forearm supination",
    "power grip",
    "pinch grip",
];
