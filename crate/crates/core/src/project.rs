//! Principal component analysis of subject signatures.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Covariance normalization is `1 / (n - 1)`. Each component is signed so its
/// largest-magnitude loading is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Unit-norm principal axes, one `Vec` of length `dim` per component,
    /// sorted by decreasing variance.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn total_variance(&self) -> f64 {
        self.explained_variance.iter().sum()
    }

    /// Fraction of variance captured by the first `k` components.
    pub fn cumulative_ratio(&self, k: usize) -> f64 {
        self.explained_variance_ratio.iter().take(k).sum()
    }

    pub fn write_variance_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "component,variance,ratio,cumulative")?;
        let mut cum = 0.0;
        for (i, (v, r)) in self
            .explained_variance
            .iter()
            .zip(&self.explained_variance_ratio)
            .enumerate()
        {
            cum += r;
            writeln!(out, "{},{v},{r},{cum}", i + 1)?;
        }
        out.flush()
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let dim = rows.first().map_or(0, |r| r.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("row {i}")));
        }
    }
    Ok(DMatrix::from_fn(n, dim, |i, j| rows[i][j]))
}

/// Fits PCA through a thin SVD of the centered data matrix; the variance of
/// component `i` is `s_i^2 / (n - 1)`. Keeps `min(n, dim)` components.
pub fn pca_fit(rows: &[Vec<f64>]) -> Result<PcaModel> {
    if rows.len() < 2 {
        return Err(Error::TooFew(format!(
            "PCA needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    let mut x = to_matrix(rows)?;
    let (n, dim) = x.shape();
    if dim == 0 {
        return Err(Error::Dimension {
            expected: 1,
            actual: 0,
        });
    }
    let mean: Vec<f64> = (0..dim).map(|j| x.column(j).mean()).collect();
    for j in 0..dim {
        let m = mean[j];
        x.column_mut(j).iter_mut().for_each(|v| *v -= m);
    }

    let svd = x.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let denom = (n - 1) as f64;
    let mut components = Vec::with_capacity(order.len());
    let mut explained_variance = Vec::with_capacity(order.len());
    for &i in &order {
        let mut axis: Vec<f64> = v_t.row(i).iter().copied().collect();
        let lead = axis
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if v.abs() > axis[best].abs() { j } else { best });
        if axis[lead] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(axis);
        let s = svd.singular_values[i];
        explained_variance.push(s * s / denom);
    }
    let total: f64 = explained_variance.iter().sum();
    let explained_variance_ratio = explained_variance
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        explained_variance_ratio,
    })
}

/// Scores `(x - mean) . components` for every row.
pub fn pca_transform(model: &PcaModel, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| {
            if r.len() != model.dim() {
                return Err(Error::Dimension {
                    expected: model.dim(),
                    actual: r.len(),
                });
            }
            Ok(model
                .components
                .iter()
                .map(|axis| {
                    axis.iter()
                        .zip(r.iter().zip(&model.mean))
                        .map(|(a, (x, m))| a * (x - m))
                        .sum()
                })
                .collect())
        })
        .collect()
}

/// Maps scores back to the original space.
pub fn pca_inverse(model: &PcaModel, scores: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    scores
        .iter()
        .map(|s| {
            if s.len() > model.n_components() {
                return Err(Error::Dimension {
                    expected: model.n_components(),
                    actual: s.len(),
                });
            }
            let mut x = model.mean.clone();
            for (score, axis) in s.iter().zip(&model.components) {
                for (xi, a) in x.iter_mut().zip(axis) {
                    *xi += score * a;
                }
            }
            Ok(x)
        })
        .collect()
}

/// `subject,group,pc1,pc2,...`
pub fn write_scores_csv<W: Write>(
    mut out: W,
    subjects: &[String],
    groups: &[String],
    scores: &[Vec<f64>],
) -> std::io::Result<()> {
    let k = scores.first().map_or(0, |s| s.len());
    write!(out, "subject,group")?;
    for i in 1..=k {
        write!(out, ",pc{i}")?;
    }
    writeln!(out)?;
    for ((s, g), row) in subjects.iter().zip(groups).zip(scores) {
        write!(out, "{s},{g}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}
