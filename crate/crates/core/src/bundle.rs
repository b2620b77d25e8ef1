//! Canonical on-disk EMG bundle and repetition segmentation.
//!
//! A bundle is a directory:
//!
//! ```text
//! manifest.json   subjects, gesture catalog, provenance notes, trial table
//! 000.sig         "EMGB" | version u32 | n_channels u32 | n_samples u32 | f32 LE row-major
//! 000.lab         "EMGL" | count u32 | count x i16 LE
//! ```
//!
//! All integers are little-endian. Samples are stored sample-major so a trial
//! can be windowed sequentially straight off disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: &str = "1";
pub const SIGNAL_MAGIC: &[u8; 4] = b"EMGB";
pub const LABEL_MAGIC: &[u8; 4] = b"EMGL";
pub const SIGNAL_VERSION: u32 = 1;
pub const SIGNAL_HEADER_LEN: u64 = 16;
pub const LABEL_HEADER_LEN: u64 = 8;

/// Acquisition constants of the reference recordings.
pub const CONFORMANT_CHANNELS: usize = 12;
pub const CONFORMANT_SAMPLE_RATE: f64 = 2000.0;
pub const CONFORMANT_GESTURES: usize = 38;
pub const CONFORMANT_REPETITIONS: u32 = 6;

pub type GestureId = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Intact,
    Amputee,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Intact => "intact",
            Group::Amputee => "amputee",
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
    Both,
}

/// Per-subject clinical metadata. Amputation fields are only meaningful for
/// the amputee group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub id: String,
    pub group: Group,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amputated_hand: Option<Hand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub years_since_amputation: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remaining_forearm_pct: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

impl SubjectMeta {
    pub fn intact(id: impl Into<String>) -> Self {
        SubjectMeta {
            id: id.into(),
            group: Group::Intact,
            amputated_hand: None,
            years_since_amputation: None,
            remaining_forearm_pct: None,
            cause: None,
        }
    }

    pub fn amputee(id: impl Into<String>) -> Self {
        SubjectMeta {
            group: Group::Amputee,
            ..SubjectMeta::intact(id)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Invariant("subject with empty id".into()));
        }
        if self.group == Group::Intact
            && (self.amputated_hand.is_some()
                || self.years_since_amputation.is_some()
                || self.remaining_forearm_pct.is_some()
                || self.cause.is_some())
        {
            return Err(Error::Invariant(format!(
                "subject {}: intact subjects carry no amputation fields",
                self.id
            )));
        }
        if let Some(pct) = self.remaining_forearm_pct {
            if pct > 100 {
                return Err(Error::Invariant(format!(
                    "subject {}: remaining_forearm_pct {pct} outside [0,100]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Multi-channel samples in sample-major order, millivolts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Signal {
    n_channels: usize,
    data: Vec<f32>,
}

impl Signal {
    pub fn new(n_channels: usize, data: Vec<f32>) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::Invariant("signal with zero channels".into()));
        }
        if data.len() % n_channels != 0 {
            return Err(Error::Invariant(format!(
                "signal of {} values is not a multiple of {n_channels} channels",
                data.len()
            )));
        }
        Ok(Signal { n_channels, data })
    }

    pub fn zeros(n_samples: usize, n_channels: usize) -> Self {
        Signal {
            n_channels,
            data: vec![0.0; n_samples * n_channels],
        }
    }

    /// Builds a signal from per-channel columns of equal length.
    pub fn from_channels(channels: &[Vec<f64>]) -> Result<Self> {
        let n_channels = channels.len();
        if n_channels == 0 {
            return Err(Error::Invariant("signal with zero channels".into()));
        }
        let n_samples = channels[0].len();
        if channels.iter().any(|c| c.len() != n_samples) {
            return Err(Error::Invariant("channels of unequal length".into()));
        }
        let mut data = Vec::with_capacity(n_samples * n_channels);
        for i in 0..n_samples {
            data.extend(channels.iter().map(|c| c[i] as f32));
        }
        Ok(Signal { n_channels, data })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        if self.n_channels == 0 {
            0
        } else {
            self.data.len() / self.n_channels
        }
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, sample: usize) -> &[f32] {
        &self.data[sample * self.n_channels..(sample + 1) * self.n_channels]
    }

    pub fn get(&self, sample: usize, channel: usize) -> f32 {
        self.data[sample * self.n_channels + channel]
    }

    /// Copies one channel out as f64, optionally restricted to a sample range.
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.channel_range(channel, 0..self.n_samples())
    }

    pub fn channel_range(&self, channel: usize, range: Range<usize>) -> Vec<f64> {
        range.map(|i| self.get(i, channel) as f64).collect()
    }

    pub fn set_channel(&mut self, channel: usize, values: &[f64]) {
        assert_eq!(values.len(), self.n_samples(), "channel length mismatch");
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.n_channels + channel] = *v as f32;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub subject_id: String,
    pub signal: Signal,
    /// 0 = rest, k > 0 = gesture id.
    pub labels: Vec<i16>,
    pub sample_rate: f64,
}

impl TrialRecord {
    pub fn n_samples(&self) -> usize {
        self.signal.n_samples()
    }

    pub fn n_channels(&self) -> usize {
        self.signal.n_channels()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub subjects: Vec<SubjectMeta>,
    pub gestures: BTreeMap<GestureId, String>,
    #[serde(default)]
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmgBundle {
    pub manifest: Manifest,
    pub trials: Vec<TrialRecord>,
}

impl EmgBundle {
    pub fn subject(&self, id: &str) -> Option<&SubjectMeta> {
        self.manifest.subjects.iter().find(|s| s.id == id)
    }

    pub fn group_of(&self, id: &str) -> Option<Group> {
        self.subject(id).map(|s| s.group)
    }

    /// Looks up a gesture id by catalog name, ignoring case and surrounding
    /// whitespace.
    pub fn gesture_by_name(&self, name: &str) -> Option<GestureId> {
        let wanted = name.trim().to_lowercase();
        self.manifest
            .gestures
            .iter()
            .find(|(_, n)| n.trim().to_lowercase() == wanted)
            .map(|(id, _)| *id)
    }

    /// Checks every structural invariant, naming the first offending
    /// subject or trial.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for s in &self.manifest.subjects {
            s.validate()?;
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Invariant(format!("duplicate subject id {}", s.id)));
            }
        }
        for (t, trial) in self.trials.iter().enumerate() {
            if !ids.contains(trial.subject_id.as_str()) {
                return Err(Error::Invariant(format!(
                    "trial {t}: subject {} not in manifest",
                    trial.subject_id
                )));
            }
            if !(trial.sample_rate > 0.0 && trial.sample_rate.is_finite()) {
                return Err(Error::Invariant(format!(
                    "trial {t}: sample rate {} must be positive",
                    trial.sample_rate
                )));
            }
            if trial.n_channels() == 0 {
                return Err(Error::Invariant(format!("trial {t}: zero channels")));
            }
            if trial.labels.len() != trial.n_samples() {
                return Err(Error::Invariant(format!(
                    "trial {t}: {} labels for {} samples",
                    trial.labels.len(),
                    trial.n_samples()
                )));
            }
            if trial.n_samples() > u32::MAX as usize || trial.n_channels() > u32::MAX as usize {
                return Err(Error::Invariant(format!("trial {t}: too large for u32 header")));
            }
            if let Some(i) = trial.signal.as_slice().iter().position(|v| !v.is_finite()) {
                return Err(Error::Invariant(format!(
                    "trial {t}: non-finite sample at flat index {i}"
                )));
            }
            let mut seen = BTreeSet::new();
            for &l in &trial.labels {
                if seen.insert(l) {
                    if l < 0 {
                        return Err(Error::Invariant(format!("trial {t}: negative label {l}")));
                    }
                    if l > 0 && !self.manifest.gestures.contains_key(&(l as GestureId)) {
                        return Err(Error::Invariant(format!(
                            "trial {t}: gesture {l} not in gesture catalog"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Deviations from the reference acquisition setup. Empty means the
    /// bundle looks like the 12-channel, 2000 Hz, 38-gesture, 6-repetition
    /// recordings.
    pub fn conformance_issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.manifest.gestures.len() != CONFORMANT_GESTURES {
            issues.push(format!(
                "gesture catalog has {} entries, expected {CONFORMANT_GESTURES}",
                self.manifest.gestures.len()
            ));
        }
        for (t, trial) in self.trials.iter().enumerate() {
            if trial.n_channels() != CONFORMANT_CHANNELS {
                issues.push(format!(
                    "trial {t} ({}): {} channels, expected {CONFORMANT_CHANNELS}",
                    trial.subject_id,
                    trial.n_channels()
                ));
            }
            if trial.sample_rate != CONFORMANT_SAMPLE_RATE {
                issues.push(format!(
                    "trial {t} ({}): {} Hz, expected {CONFORMANT_SAMPLE_RATE}",
                    trial.subject_id, trial.sample_rate
                ));
            }
        }
        let segments = segment_bundle(self);
        let mut reps: BTreeMap<(&str, GestureId), u32> = BTreeMap::new();
        for s in &segments {
            *reps.entry((s.subject_id.as_str(), s.gesture_id)).or_default() += 1;
        }
        for subject in &self.manifest.subjects {
            for &g in self.manifest.gestures.keys() {
                let n = reps.get(&(subject.id.as_str(), g)).copied().unwrap_or(0);
                if n != CONFORMANT_REPETITIONS {
                    issues.push(format!(
                        "subject {} gesture {g}: {n} repetitions, expected {CONFORMANT_REPETITIONS}",
                        subject.id
                    ));
                }
            }
        }
        issues
    }
}

/// One maximal run of a single nonzero label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionSegment {
    pub subject_id: String,
    pub trial: usize,
    pub gesture_id: GestureId,
    /// 1-based, temporal order within (subject, gesture).
    pub repetition_index: u32,
    pub sample_range: Range<usize>,
}

impl RepetitionSegment {
    pub fn len(&self) -> usize {
        self.sample_range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_range.is_empty()
    }

    pub fn describe(&self) -> String {
        format!(
            "{}/g{}/r{} (trial {}, samples {}..{})",
            self.subject_id,
            self.gesture_id,
            self.repetition_index,
            self.trial,
            self.sample_range.start,
            self.sample_range.end
        )
    }
}

/// Splits a trial's label stream into repetitions. Rest runs produce no
/// segment; repetition indices count per gesture in temporal order.
pub fn segment_repetitions(trial: &TrialRecord, trial_index: usize) -> Vec<RepetitionSegment> {
    let mut out = Vec::new();
    let mut counts: BTreeMap<GestureId, u32> = BTreeMap::new();
    let labels = &trial.labels;
    let mut start = 0;
    while start < labels.len() {
        let label = labels[start];
        let mut end = start + 1;
        while end < labels.len() && labels[end] == label {
            end += 1;
        }
        if label > 0 {
            let gesture = label as GestureId;
            let rep = counts.entry(gesture).or_default();
            *rep += 1;
            out.push(RepetitionSegment {
                subject_id: trial.subject_id.clone(),
                trial: trial_index,
                gesture_id: gesture,
                repetition_index: *rep,
                sample_range: start..end,
            });
        }
        start = end;
    }
    out
}

/// Segments every trial and renumbers repetitions per (subject, gesture)
/// across trials, in trial order then time order.
pub fn segment_bundle(bundle: &EmgBundle) -> Vec<RepetitionSegment> {
    let mut counts: BTreeMap<(String, GestureId), u32> = BTreeMap::new();
    let mut out = Vec::new();
    for (t, trial) in bundle.trials.iter().enumerate() {
        for mut seg in segment_repetitions(trial, t) {
            let rep = counts
                .entry((seg.subject_id.clone(), seg.gesture_id))
                .or_default();
            *rep += 1;
            seg.repetition_index = *rep;
            out.push(seg);
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    format_version: String,
    subjects: Vec<SubjectMeta>,
    gestures: BTreeMap<GestureId, String>,
    trials: Vec<TrialEntry>,
    #[serde(default)]
    provenance: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrialEntry {
    subject_id: String,
    signal_file: String,
    label_file: String,
    n_samples: usize,
    n_channels: usize,
    sample_rate: f64,
}

fn trial_stem(index: usize) -> String {
    format!("{index:03}")
}

/// Writes `bundle` into directory `dir`, creating it if needed.
pub fn write_bundle(bundle: &EmgBundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut entries = Vec::with_capacity(bundle.trials.len());
    for (t, trial) in bundle.trials.iter().enumerate() {
        let stem = trial_stem(t);
        let signal_file = format!("{stem}.sig");
        let label_file = format!("{stem}.lab");
        write_signal(&dir.join(&signal_file), &trial.signal)?;
        write_labels(&dir.join(&label_file), &trial.labels)?;
        entries.push(TrialEntry {
            subject_id: trial.subject_id.clone(),
            signal_file,
            label_file,
            n_samples: trial.n_samples(),
            n_channels: trial.n_channels(),
            sample_rate: trial.sample_rate,
        });
    }

    let manifest = ManifestFile {
        format_version: FORMAT_VERSION.to_string(),
        subjects: bundle.manifest.subjects.clone(),
        gestures: bundle.manifest.gestures.clone(),
        trials: entries,
        provenance: bundle.manifest.provenance.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn write_signal(path: &Path, signal: &Signal) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(SIGNAL_MAGIC)?;
    put(&SIGNAL_VERSION.to_le_bytes())?;
    put(&(signal.n_channels() as u32).to_le_bytes())?;
    put(&(signal.n_samples() as u32).to_le_bytes())?;
    for v in signal.as_slice() {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_labels(path: &Path, labels: &[i16]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(LABEL_MAGIC)?;
    put(&(labels.len() as u32).to_le_bytes())?;
    for l in labels {
        put(&l.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a bundle directory and checks all invariants.
pub fn read_bundle(dir: &Path) -> Result<EmgBundle> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: ManifestFile =
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &path,
            format!(
                "format_version {:?}, expected {FORMAT_VERSION:?}",
                manifest.format_version
            ),
        ));
    }

    let mut trials = Vec::with_capacity(manifest.trials.len());
    for entry in &manifest.trials {
        let sig_path = dir.join(&entry.signal_file);
        let signal = read_signal(&sig_path, entry)?;
        let lab_path = dir.join(&entry.label_file);
        let labels = read_labels(&lab_path)?;
        if labels.len() != signal.n_samples() {
            return Err(Error::format(
                &lab_path,
                format!(
                    "{} labels but {} has {} samples",
                    labels.len(),
                    entry.signal_file,
                    signal.n_samples()
                ),
            ));
        }
        trials.push(TrialRecord {
            subject_id: entry.subject_id.clone(),
            signal,
            labels,
            sample_rate: entry.sample_rate,
        });
    }

    let bundle = EmgBundle {
        manifest: Manifest {
            subjects: manifest.subjects,
            gestures: manifest.gestures,
            provenance: manifest.provenance,
        },
        trials,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn read_signal(path: &Path, entry: &TrialEntry) -> Result<Signal> {
    let bytes = read_file(path)?;
    if (bytes.len() as u64) < SIGNAL_HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: SIGNAL_HEADER_LEN,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[0..4] != SIGNAL_MAGIC {
        return Err(Error::format(path, "bad magic, expected \"EMGB\""));
    }
    let version = u32_at(&bytes, 4);
    if version != SIGNAL_VERSION {
        return Err(Error::format(
            path,
            format!("signal version {version}, expected {SIGNAL_VERSION}"),
        ));
    }
    let n_channels = u32_at(&bytes, 8) as usize;
    let n_samples = u32_at(&bytes, 12) as usize;
    if n_channels == 0 {
        return Err(Error::format(path, "zero channels"));
    }
    if n_channels != entry.n_channels || n_samples != entry.n_samples {
        return Err(Error::format(
            path,
            format!(
                "header says {n_samples}x{n_channels}, manifest says {}x{}",
                entry.n_samples, entry.n_channels
            ),
        ));
    }
    let expected = SIGNAL_HEADER_LEN + 4 * (n_samples as u64) * (n_channels as u64);
    if bytes.len() as u64 != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data = bytes[SIGNAL_HEADER_LEN as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Signal::new(n_channels, data).map_err(|e| Error::format(path, e.to_string()))
}

fn read_labels(path: &Path) -> Result<Vec<i16>> {
    let bytes = read_file(path)?;
    if (bytes.len() as u64) < LABEL_HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: LABEL_HEADER_LEN,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[0..4] != LABEL_MAGIC {
        return Err(Error::format(path, "bad magic, expected \"EMGL\""));
    }
    let count = u32_at(&bytes, 4) as u64;
    let expected = LABEL_HEADER_LEN + 2 * count;
    if bytes.len() as u64 != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes[LABEL_HEADER_LEN as usize..]
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect())
}

/// Paths of every file a bundle directory consists of, manifest first.
pub fn bundle_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: ManifestFile =
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    let mut files = vec![path];
    for t in manifest.trials {
        files.push(dir.join(t.signal_file));
        files.push(dir.join(t.label_file));
    }
    Ok(files)
}
