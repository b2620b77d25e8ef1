//! Power-line interference removal and transition trimming.
//!
//! Line interference shows up as narrow spikes in the magnitude spectrum at
//! the line frequency and its harmonics. The filter takes the whole-trial
//! FFT, runs a Hampel outlier test over the magnitude bins around each
//! harmonic and replaces outliers with the local median while keeping their
//! phase. Everything outside the targeted neighborhoods is left alone.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bundle::{EmgBundle, RepetitionSegment};
use crate::error::{Error, Result};

/// Scale factor turning a median absolute deviation into a Gaussian sigma.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Harmonics {
    AllBelowNyquist,
    /// Explicit harmonic multipliers, 1 = fundamental.
    List(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HampelConfig {
    pub line_freq: f64,
    pub half_window_bins: usize,
    pub nsigma: f64,
    pub harmonics: Harmonics,
}

impl Default for HampelConfig {
    fn default() -> Self {
        HampelConfig {
            line_freq: 50.0,
            half_window_bins: 3,
            nsigma: 3.0,
            harmonics: Harmonics::AllBelowNyquist,
        }
    }
}

impl HampelConfig {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if self.half_window_bins < 1 {
            return Err(Error::Config("hampel half window must be >= 1 bin".into()));
        }
        if !(self.nsigma > 0.0) {
            return Err(Error::Config(format!(
                "hampel nsigma must be > 0, got {}",
                self.nsigma
            )));
        }
        if !(self.line_freq > 0.0 && self.line_freq < sample_rate / 2.0) {
            return Err(Error::Config(format!(
                "line frequency {} Hz must lie in (0, {} Hz)",
                self.line_freq,
                sample_rate / 2.0
            )));
        }
        if let Harmonics::List(list) = &self.harmonics {
            if list.iter().any(|&h| h == 0) {
                return Err(Error::Config("harmonic multiplier 0 is not a harmonic".into()));
            }
        }
        Ok(())
    }

    /// Harmonic frequencies strictly below Nyquist.
    pub fn target_frequencies(&self, sample_rate: f64) -> Vec<f64> {
        let nyquist = sample_rate / 2.0;
        match &self.harmonics {
            Harmonics::AllBelowNyquist => (1..)
                .map(|h| h as f64 * self.line_freq)
                .take_while(|&f| f < nyquist)
                .collect(),
            Harmonics::List(list) => list
                .iter()
                .map(|&h| h as f64 * self.line_freq)
                .filter(|&f| f < nyquist)
                .collect(),
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Bins (in `1..=n/2`) touched by the filter for a transform of length `n`.
pub fn targeted_bins(n: usize, sample_rate: f64, cfg: &HampelConfig) -> Vec<usize> {
    let last = n / 2;
    let w = cfg.half_window_bins as i64;
    let mut bins: Vec<usize> = cfg
        .target_frequencies(sample_rate)
        .into_iter()
        .flat_map(|f| {
            let center = (f * n as f64 / sample_rate).round() as i64;
            (center - w..=center + w).filter(|&k| k >= 1 && k <= last as i64)
        })
        .map(|k| k as usize)
        .collect();
    bins.sort_unstable();
    bins.dedup();
    bins
}

/// Spectral Hampel filter on one channel.
pub fn hampel_despike_spectrum(
    channel: &[f64],
    sample_rate: f64,
    cfg: &HampelConfig,
) -> Result<Vec<f64>> {
    cfg.validate(sample_rate)?;
    let n = channel.len();
    let n_bins = n / 2 + 1;
    let window = 2 * cfg.half_window_bins + 1;
    if n_bins < window {
        return Err(Error::TooShort(format!(
            "{n} samples give {n_bins} frequency bins, need at least {window}"
        )));
    }

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let mut spectrum: Vec<Complex<f64>> = channel.iter().map(|&x| Complex::new(x, 0.0)).collect();
    forward.process(&mut spectrum);

    let magnitude: Vec<f64> = spectrum[..n_bins].iter().map(|c| c.norm()).collect();
    let w = cfg.half_window_bins;
    let mut scratch = Vec::with_capacity(window);
    let mut replacements = Vec::new();
    for k in targeted_bins(n, sample_rate, cfg) {
        let lo = k.saturating_sub(w);
        let hi = (k + w).min(n_bins - 1);
        scratch.clear();
        scratch.extend_from_slice(&magnitude[lo..=hi]);
        let med = median(&mut scratch);
        for v in scratch.iter_mut() {
            *v = (*v - med).abs();
        }
        let mad = median(&mut scratch);
        if (magnitude[k] - med).abs() > cfg.nsigma * MAD_SCALE * mad {
            replacements.push((k, med));
        }
    }

    if replacements.is_empty() {
        return Ok(channel.to_vec());
    }
    for (k, med) in replacements {
        let phase = spectrum[k].arg();
        let value = Complex::from_polar(med, phase);
        spectrum[k] = value;
        let mirror = n - k;
        if mirror != k {
            spectrum[mirror] = value.conj();
        } else {
            // Nyquist bin of an even-length transform is real.
            spectrum[k] = Complex::new(value.re, 0.0);
        }
    }

    let inverse = planner.plan_fft_inverse(n);
    inverse.process(&mut spectrum);
    let scale = 1.0 / n as f64;
    Ok(spectrum.iter().map(|c| c.re * scale).collect())
}

/// Applies the filter to every channel of every trial in place.
pub fn clean_bundle(bundle: &mut EmgBundle, cfg: &HampelConfig) -> Result<()> {
    bundle.trials.par_iter_mut().try_for_each(|trial| {
        let rate = trial.sample_rate;
        let cleaned: Vec<Vec<f64>> = (0..trial.n_channels())
            .into_par_iter()
            .map(|c| hampel_despike_spectrum(&trial.signal.channel(c), rate, cfg))
            .collect::<Result<_>>()
            .map_err(|e| match e {
                Error::TooShort(m) => {
                    Error::TooShort(format!("trial of subject {}: {m}", trial.subject_id))
                }
                other => other,
            })?;
        for (c, values) in cleaned.iter().enumerate() {
            trial.signal.set_channel(c, values);
        }
        Ok(())
    })
}

/// Shrinks a segment by `round(trim_ms * rate / 1000)` samples on each side.
pub fn trim_transitions(
    seg: &RepetitionSegment,
    trim_ms: f64,
    sample_rate: f64,
) -> Result<RepetitionSegment> {
    if !(trim_ms >= 0.0 && trim_ms.is_finite()) {
        return Err(Error::Config(format!("trim must be >= 0 ms, got {trim_ms}")));
    }
    let trim = (trim_ms * sample_rate / 1000.0).round() as usize;
    if seg.len() <= 2 * trim {
        return Err(Error::Segment {
            segment: seg.describe(),
            reason: format!(
                "{} samples cannot lose {trim} samples on each side",
                seg.len()
            ),
        });
    }
    let mut out = seg.clone();
    out.sample_range = seg.sample_range.start + trim..seg.sample_range.end - trim;
    Ok(out)
}
