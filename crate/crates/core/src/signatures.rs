//! Per-subject pattern vectors: the mean of every feature over all windows and
//! repetitions, for every (gesture, channel) pair.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bundle::GestureId;
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureTensor, N_FEATURES};

pub const WINDOW_MEAN_SCHEME: &str = "window-mean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSignature {
    pub subject_id: String,
    /// Gesture-major, then channel, then feature kind.
    pub vector: Vec<f64>,
    pub scheme: String,
}

/// Column layout shared by all signatures of one analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureLayout {
    pub gestures: Vec<GestureId>,
    pub n_channels: usize,
}

impl SignatureLayout {
    pub fn of(tensor: &FeatureTensor) -> Self {
        SignatureLayout {
            gestures: tensor.gestures(),
            n_channels: tensor.n_channels,
        }
    }

    pub fn dim(&self) -> usize {
        self.gestures.len() * self.n_channels * N_FEATURES
    }

    pub fn index(&self, gesture_pos: usize, channel: usize, kind: FeatureKind) -> usize {
        (gesture_pos * self.n_channels + channel) * N_FEATURES + kind as usize
    }

    /// `g<id>_ch<c>_<feat>` with 1-based channel numbers.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for g in &self.gestures {
            for c in 0..self.n_channels {
                for k in FeatureKind::ALL {
                    names.push(format!("g{g}_ch{}_{}", c + 1, k.as_str()));
                }
            }
        }
        names
    }
}

/// Signature of one subject over the gestures in `layout`.
pub fn build_signature(
    tensor: &FeatureTensor,
    layout: &SignatureLayout,
    subject: &str,
) -> Result<SubjectSignature> {
    let dim = tensor.dim();
    let mut sums = vec![0.0; layout.dim()];
    let mut counts = vec![0usize; layout.gestures.len()];
    for (s, e) in tensor.segments.iter().enumerate() {
        if e.subject_id != subject {
            continue;
        }
        let Ok(pos) = layout.gestures.binary_search(&e.gesture_id) else {
            continue;
        };
        let block = &mut sums[pos * dim..(pos + 1) * dim];
        for w in tensor.segment_windows(s) {
            for (acc, v) in block.iter_mut().zip(w) {
                *acc += v;
            }
        }
        counts[pos] += e.n_windows;
    }
    if let Some(pos) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Coverage(format!(
            "subject {subject} has no windows for gesture {}",
            layout.gestures[pos]
        )));
    }
    for (pos, n) in counts.iter().enumerate() {
        for v in &mut sums[pos * dim..(pos + 1) * dim] {
            *v /= *n as f64;
        }
    }
    Ok(SubjectSignature {
        subject_id: subject.to_string(),
        vector: sums,
        scheme: WINDOW_MEAN_SCHEME.to_string(),
    })
}

/// Signatures of every subject in the tensor, sorted by subject id.
pub fn build_signatures(tensor: &FeatureTensor) -> Result<(SignatureLayout, Vec<SubjectSignature>)> {
    let layout = SignatureLayout::of(tensor);
    let sigs = tensor
        .subjects()
        .iter()
        .map(|s| build_signature(tensor, &layout, s))
        .collect::<Result<_>>()?;
    Ok((layout, sigs))
}

/// Per-dimension z-scoring fitted across subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Sample standard deviation (n - 1).
    pub std: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::TooFew(format!(
                "standardization needs at least 2 subjects, got {}",
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: r.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; dim];
        let mut zero_variance = vec![false; dim];
        for j in 0..dim {
            let first = rows[0][j];
            if rows.iter().all(|r| r[j] == first) {
                zero_variance[j] = true;
                continue;
            }
            let ss: f64 = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum();
            std[j] = (ss / (n - 1.0)).sqrt();
        }
        Ok(Standardizer {
            mean,
            std,
            zero_variance,
        })
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if self.zero_variance[j] {
                    0.0
                } else {
                    (v - self.mean[j]) / self.std[j]
                }
            })
            .collect())
    }

    pub fn n_zero_variance(&self) -> usize {
        self.zero_variance.iter().filter(|&&z| z).count()
    }
}

/// Z-scores every dimension across subjects; constant dimensions become 0.
pub fn standardize(signatures: &[SubjectSignature]) -> Result<(Vec<SubjectSignature>, Standardizer)> {
    let rows: Vec<&[f64]> = signatures.iter().map(|s| s.vector.as_slice()).collect();
    let st = Standardizer::fit(&rows)?;
    let out = signatures
        .iter()
        .map(|s| {
            Ok(SubjectSignature {
                subject_id: s.subject_id.clone(),
                vector: st.apply(&s.vector)?,
                scheme: format!("{}+zscore", s.scheme),
            })
        })
        .collect::<Result<_>>()?;
    Ok((out, st))
}

pub fn write_signature_csv<W: Write>(
    mut out: W,
    layout: &SignatureLayout,
    signatures: &[SubjectSignature],
) -> std::io::Result<()> {
    write!(out, "subject")?;
    for name in layout.column_names() {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for s in signatures {
        write!(out, "{}", s.subject_id)?;
        for v in &s.vector {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_standardization() {
        let a = SubjectSignature {
            subject_id: "a".into(),
            vector: vec![0.0, 5.0],
            scheme: WINDOW_MEAN_SCHEME.into(),
        };
        let b = SubjectSignature {
            vector: vec![2.0, 5.0],
            subject_id: "b".into(),
            ..a.clone()
        };
        let (out, st) = standardize(&[a, b]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out[0].vector[0] + h).abs() < 1e-12);
        assert!((out[1].vector[0] - h).abs() < 1e-12);
        assert!((st.std[0] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(out[0].vector[1], 0.0);
        assert_eq!(st.zero_variance, vec![false, true]);
    }

    #[test]
    fn standardize_needs_two_subjects() {
        let a = SubjectSignature {
            subject_id: "a".into(),
            vector: vec![1.0],
            scheme: WINDOW_MEAN_SCHEME.into(),
        };
        assert!(matches!(standardize(&[a]), Err(Error::TooFew(_))));
    }

    #[test]
    fn column_names_follow_layout_order() {
        let layout = SignatureLayout {
            gestures: vec![3, 5],
            n_channels: 2,
        };
        let names = layout.column_names();
        assert_eq!(names.len(), 16);
        assert_eq!(names[0], "g3_ch1_MAV");
        assert_eq!(names[5], "g3_ch2_WL");
        assert_eq!(names[15], "g5_ch2_SSC");
        assert_eq!(layout.index(1, 1, FeatureKind::Ssc), 15);
    }
}
