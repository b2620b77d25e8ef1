use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{Scoring, CLINICAL_GESTURES, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::features::{Thresholds, WindowingConfig};
use crate::preprocess::{HampelConfig, Harmonics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Relative,
    Absolute,
}

/// Every tunable of a run, as one flat TOML table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub bundle: PathBuf,
    pub output: PathBuf,

    pub hampel: bool,
    pub line_freq: f64,
    pub hampel_window: usize,
    pub hampel_nsigma: f64,
    pub trim_ms: f64,

    pub window_ms: f64,
    pub increment_ms: f64,
    pub threshold_mode: ThresholdMode,
    pub threshold_fraction: f64,
    pub eps_zc: f64,
    pub eps_ssc: f64,
    pub export_feature_table: bool,

    pub standardize: bool,
    pub inconsistency_depth: usize,
    pub cuts: Vec<usize>,
    pub pca_export_components: usize,

    pub gamma: f64,
    pub gestures: Vec<String>,
    pub gesture_repetitions: u32,
    pub scoring: Scoring,

    /// Seed for synthetic fixtures only; analysis is deterministic.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bundle: PathBuf::from("bundle"),
            output: PathBuf::from("out"),
            hampel: true,
            line_freq: 50.0,
            hampel_window: 3,
            hampel_nsigma: 3.0,
            trim_ms: 0.0,
            window_ms: 200.0,
            increment_ms: 100.0,
            threshold_mode: ThresholdMode::Relative,
            threshold_fraction: 0.01,
            eps_zc: 0.0,
            eps_ssc: 0.0,
            export_feature_table: false,
            standardize: true,
            inconsistency_depth: 2,
            cuts: vec![2, 6],
            pca_export_components: 3,
            gamma: DEFAULT_GAMMA,
            gestures: CLINICAL_GESTURES.iter().map(|s| s.to_string()).collect(),
            gesture_repetitions: 6,
            scoring: Scoring::PerWindow,
            seed: 7,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hampel_config(&self) -> HampelConfig {
        HampelConfig {
            line_freq: self.line_freq,
            half_window_bins: self.hampel_window,
            nsigma: self.hampel_nsigma,
            harmonics: Harmonics::AllBelowNyquist,
        }
    }

    pub fn windowing(&self) -> WindowingConfig {
        WindowingConfig {
            window_ms: self.window_ms,
            increment_ms: self.increment_ms,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        match self.threshold_mode {
            ThresholdMode::Relative => Thresholds::Relative {
                fraction: self.threshold_fraction,
            },
            ThresholdMode::Absolute => Thresholds::Absolute {
                eps_zc: self.eps_zc,
                eps_ssc: self.eps_ssc,
            },
        }
    }

    /// Parameter checks that need no data.
    pub fn validate(&self) -> Result<()> {
        self.windowing().validate()?;
        self.thresholds().validate()?;
        if self.hampel_window < 1 || !(self.hampel_nsigma > 0.0) || !(self.line_freq > 0.0) {
            return Err(Error::Config(
                "hampel window >= 1, nsigma > 0 and line frequency > 0 required".into(),
            ));
        }
        if !(self.trim_ms >= 0.0) {
            return Err(Error::Config("trim_ms must be >= 0".into()));
        }
        if self.inconsistency_depth < 1 {
            return Err(Error::Config("inconsistency_depth must be >= 1".into()));
        }
        if self.cuts.iter().any(|&k| k < 1) {
            return Err(Error::Config("cut sizes must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [0, 1], got {}", self.gamma)));
        }
        if self.gestures.len() < 2 {
            return Err(Error::Config("gesture subset needs at least 2 gestures".into()));
        }
        if self.gesture_repetitions < 2 {
            return Err(Error::Config("gesture_repetitions must be >= 2".into()));
        }
        Ok(())
    }
}
