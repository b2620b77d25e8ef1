//! Overlapped windowing and the Hudgins time-domain feature set.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{EmgBundle, GestureId, RepetitionSegment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Mav,
    Wl,
    Zc,
    Ssc,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [
        FeatureKind::Mav,
        FeatureKind::Wl,
        FeatureKind::Zc,
        FeatureKind::Ssc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mav => "MAV",
            FeatureKind::Wl => "WL",
            FeatureKind::Zc => "ZC",
            FeatureKind::Ssc => "SSC",
        }
    }
}

pub const N_FEATURES: usize = FeatureKind::ALL.len();

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowingConfig {
    pub window_ms: f64,
    pub increment_ms: f64,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        WindowingConfig {
            window_ms: 200.0,
            increment_ms: 100.0,
        }
    }
}

impl WindowingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_ms > 0.0 && self.window_ms.is_finite()) {
            return Err(Error::Config(format!(
                "window must be > 0 ms, got {}",
                self.window_ms
            )));
        }
        if !(self.increment_ms > 0.0 && self.increment_ms <= self.window_ms) {
            return Err(Error::Config(format!(
                "increment must be in (0, window], got {} ms for a {} ms window",
                self.increment_ms, self.window_ms
            )));
        }
        Ok(())
    }

    /// Window length and increment in samples.
    pub fn samples(&self, sample_rate: f64) -> Result<(usize, usize)> {
        self.validate()?;
        let w = (self.window_ms * sample_rate / 1000.0).round() as usize;
        let i = (self.increment_ms * sample_rate / 1000.0).round() as usize;
        if w == 0 || i == 0 {
            return Err(Error::Config(format!(
                "{} ms / {} ms round to zero samples at {sample_rate} Hz",
                self.window_ms, self.increment_ms
            )));
        }
        Ok((w, i))
    }
}

/// Half-open window ranges `[k*I, k*I + W)` covering a segment of `n` samples.
pub fn windows(n: usize, cfg: &WindowingConfig, sample_rate: f64) -> Result<Vec<Range<usize>>> {
    let (w, inc) = cfg.samples(sample_rate)?;
    if n < w {
        return Err(Error::TooShort(format!(
            "{n} samples is shorter than one {w}-sample window"
        )));
    }
    let count = (n - w) / inc + 1;
    Ok((0..count).map(|k| k * inc..k * inc + w).collect())
}

pub fn mav(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::TooShort("MAV of an empty window".into()));
    }
    Ok(x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64)
}

pub fn wl(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::TooShort("WL needs at least 2 samples".into()));
    }
    Ok(x.windows(2).map(|p| (p[1] - p[0]).abs()).sum())
}

/// Zero crossings: adjacent samples of strictly opposite sign whose
/// difference is at least `eps`.
pub fn zc(x: &[f64], eps: f64) -> Result<usize> {
    if x.len() < 2 {
        return Err(Error::TooShort("ZC needs at least 2 samples".into()));
    }
    Ok(x.windows(2)
        .filter(|p| p[0] * p[1] < 0.0 && (p[0] - p[1]).abs() >= eps)
        .count())
}

/// Slope sign changes: interior points that are a strict local extremum with
/// `(x[i] - x[i-1]) * (x[i] - x[i+1]) >= eps`.
pub fn ssc(x: &[f64], eps: f64) -> Result<usize> {
    if x.len() < 3 {
        return Err(Error::TooShort("SSC needs at least 3 samples".into()));
    }
    Ok(x.windows(3)
        .filter(|p| {
            let prod = (p[1] - p[0]) * (p[1] - p[2]);
            prod > 0.0 && prod >= eps
        })
        .count())
}

/// ZC/SSC dead-zone thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Thresholds {
    /// `eps_zc = fraction * rms` and `eps_ssc = (fraction * rms)^2`, with
    /// `rms` taken per channel over the whole trial.
    Relative { fraction: f64 },
    /// Fixed values in millivolts (ZC) and millivolts squared (SSC).
    Absolute { eps_zc: f64, eps_ssc: f64 },
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::Relative { fraction: 0.01 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Thresholds::Relative { fraction } => fraction >= 0.0 && fraction.is_finite(),
            Thresholds::Absolute { eps_zc, eps_ssc } => {
                eps_zc >= 0.0 && eps_ssc >= 0.0 && eps_zc.is_finite() && eps_ssc.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid thresholds {self:?}")))
        }
    }

    fn resolve(&self, rms: f64) -> ChannelThresholds {
        match *self {
            Thresholds::Relative { fraction } => {
                let eps = fraction * rms;
                ChannelThresholds {
                    eps_zc: eps,
                    eps_ssc: eps * eps,
                }
            }
            Thresholds::Absolute { eps_zc, eps_ssc } => ChannelThresholds { eps_zc, eps_ssc },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelThresholds {
    pub eps_zc: f64,
    pub eps_ssc: f64,
}

/// All four features of one window, in `FeatureKind::ALL` order.
pub fn window_features(x: &[f64], th: ChannelThresholds) -> Result<[f64; N_FEATURES]> {
    Ok([
        mav(x)?,
        wl(x)?,
        zc(x, th.eps_zc)? as f64,
        ssc(x, th.eps_ssc)? as f64,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub subject_id: String,
    pub gesture_id: GestureId,
    pub repetition: u32,
    pub trial: usize,
    pub n_windows: usize,
    /// Index of this segment's first window in the flat window list.
    pub first_window: usize,
    pub thresholds: Vec<ChannelThresholds>,
}

/// Per-window features, laid out as `[window][channel][kind]` with windows of
/// all segments concatenated in segment order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    pub n_channels: usize,
    pub window_samples: usize,
    pub increment_samples: usize,
    pub segments: Vec<SegmentEntry>,
    values: Vec<f64>,
}

impl FeatureTensor {
    /// Length of one window's feature vector (channels x kinds).
    pub fn dim(&self) -> usize {
        self.n_channels * N_FEATURES
    }

    pub fn n_windows(&self) -> usize {
        self.values.len() / self.dim().max(1)
    }

    /// Flat feature vector of window `w` of segment `seg`.
    pub fn window(&self, seg: usize, w: usize) -> &[f64] {
        let entry = &self.segments[seg];
        assert!(w < entry.n_windows, "window index out of range");
        self.window_at(entry.first_window + w)
    }

    pub fn window_at(&self, flat: usize) -> &[f64] {
        let d = self.dim();
        &self.values[flat * d..(flat + 1) * d]
    }

    pub fn value(&self, seg: usize, w: usize, channel: usize, kind: FeatureKind) -> f64 {
        self.window(seg, w)[channel * N_FEATURES + kind as usize]
    }

    pub fn segment_windows(&self, seg: usize) -> impl Iterator<Item = &[f64]> {
        let e = &self.segments[seg];
        (e.first_window..e.first_window + e.n_windows).map(move |i| self.window_at(i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self.segments.iter().map(|e| e.subject_id.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn gestures(&self) -> Vec<GestureId> {
        let mut g: Vec<GestureId> = self.segments.iter().map(|e| e.gesture_id).collect();
        g.sort_unstable();
        g.dedup();
        g
    }

    /// Segment indices per subject, in segment order.
    pub fn segments_by_subject(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.segments.iter().enumerate() {
            map.entry(e.subject_id.as_str()).or_default().push(i);
        }
        map
    }

    /// Long-format CSV: `subject,gesture,repetition,window,channel,feature,value`.
    /// Windows count from 0, channels from 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "subject,gesture,repetition,window,channel,feature,value")?;
        for (s, e) in self.segments.iter().enumerate() {
            for w in 0..e.n_windows {
                let v = self.window(s, w);
                for c in 0..self.n_channels {
                    for (k, kind) in FeatureKind::ALL.iter().enumerate() {
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{}",
                            e.subject_id,
                            e.gesture_id,
                            e.repetition,
                            w,
                            c + 1,
                            kind.as_str(),
                            v[c * N_FEATURES + k]
                        )?;
                    }
                }
            }
        }
        out.flush()
    }
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }
}

/// Windows every segment and computes MAV, WL, ZC and SSC per window and
/// channel. Output order follows `segments` regardless of scheduling.
pub fn extract(
    bundle: &EmgBundle,
    segments: &[RepetitionSegment],
    cfg: &WindowingConfig,
    thresholds: &Thresholds,
) -> Result<FeatureTensor> {
    cfg.validate()?;
    thresholds.validate()?;

    let mut n_channels = None;
    let mut geometry = None;
    let mut trial_ids: Vec<usize> = Vec::new();
    for seg in segments {
        let trial = bundle.trials.get(seg.trial).ok_or_else(|| Error::Segment {
            segment: seg.describe(),
            reason: format!("trial {} does not exist", seg.trial),
        })?;
        if seg.is_empty() || seg.sample_range.end > trial.n_samples() {
            return Err(Error::Segment {
                segment: seg.describe(),
                reason: format!("range outside trial of {} samples", trial.n_samples()),
            });
        }
        match n_channels {
            None => n_channels = Some(trial.n_channels()),
            Some(c) if c != trial.n_channels() => {
                return Err(Error::Segment {
                    segment: seg.describe(),
                    reason: format!("{} channels, expected {c}", trial.n_channels()),
                })
            }
            _ => {}
        }
        let g = cfg.samples(trial.sample_rate)?;
        match geometry {
            None => geometry = Some(g),
            Some(prev) if prev != g => {
                return Err(Error::Segment {
                    segment: seg.describe(),
                    reason: "sample rate differs from other segments".into(),
                })
            }
            _ => {}
        }
        trial_ids.push(seg.trial);
    }
    let n_channels = n_channels.unwrap_or(0);
    let (window_samples, increment_samples) = geometry.unwrap_or((0, 0));
    if !segments.is_empty() && window_samples < 3 {
        return Err(Error::Config(format!(
            "window of {window_samples} samples is too short for SSC"
        )));
    }

    trial_ids.sort_unstable();
    trial_ids.dedup();
    let trial_thresholds: BTreeMap<usize, Vec<ChannelThresholds>> = trial_ids
        .par_iter()
        .map(|&t| {
            let trial = &bundle.trials[t];
            let th = (0..trial.n_channels())
                .map(|c| thresholds.resolve(rms(&trial.signal.channel(c))))
                .collect();
            (t, th)
        })
        .collect();

    let per_segment: Vec<(Vec<f64>, usize)> = segments
        .par_iter()
        .map(|seg| {
            let trial = &bundle.trials[seg.trial];
            let ranges = windows(seg.len(), cfg, trial.sample_rate).map_err(|e| {
                Error::Segment {
                    segment: seg.describe(),
                    reason: e.to_string(),
                }
            })?;
            let th = &trial_thresholds[&seg.trial];
            let channels: Vec<Vec<f64>> = (0..n_channels)
                .map(|c| trial.signal.channel_range(c, seg.sample_range.clone()))
                .collect();
            let mut values = Vec::with_capacity(ranges.len() * n_channels * N_FEATURES);
            for r in &ranges {
                for (c, x) in channels.iter().enumerate() {
                    values.extend_from_slice(&window_features(&x[r.clone()], th[c])?);
                }
            }
            Ok((values, ranges.len()))
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(segments.len());
    let mut values = Vec::new();
    let mut first_window = 0;
    for (seg, (v, n_windows)) in segments.iter().zip(per_segment) {
        entries.push(SegmentEntry {
            subject_id: seg.subject_id.clone(),
            gesture_id: seg.gesture_id,
            repetition: seg.repetition_index,
            trial: seg.trial,
            n_windows,
            first_window,
            thresholds: trial_thresholds[&seg.trial].clone(),
        });
        first_window += n_windows;
        values.extend(v);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("feature value at flat index {i}")));
    }

    Ok(FeatureTensor {
        n_channels,
        window_samples,
        increment_samples,
        segments: entries,
        values,
    })
}
