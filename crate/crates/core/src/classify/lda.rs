//! Linear discriminant analysis with a pooled, shrunk covariance.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Count, mean and centered scatter matrix of a set of rows. Two sets merge
/// exactly (pairwise update), which lets cross-validation folds be assembled
/// from per-subject or per-repetition pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterStats {
    pub n: usize,
    pub mean: DVector<f64>,
    pub scatter: DMatrix<f64>,
}

impl ScatterStats {
    pub fn empty(dim: usize) -> Self {
        ScatterStats {
            n: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Two-pass statistics of `rows`, all of length `dim`.
    pub fn from_rows<'a, I>(dim: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.len();
        if n == 0 {
            return Self::empty(dim);
        }
        let mut mean = DVector::zeros(dim);
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean /= n as f64;
        let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
        let scatter = centered.tr_mul(&centered);
        ScatterStats { n, mean, scatter }
    }

    pub fn merge(&mut self, other: &ScatterStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let total = na + nb;
        let delta = &other.mean - &self.mean;
        self.scatter += &other.scatter;
        self.scatter += (&delta * delta.transpose()) * (na * nb / total);
        self.mean += &delta * (nb / total);
        self.n += other.n;
    }
}

/// Fitted LDA model. Classes are kept in ascending order; that order is also
/// the tie-break order at prediction time.
#[derive(Debug, Clone)]
pub struct LdaModel<C> {
    pub classes: Vec<C>,
    pub means: Vec<DVector<f64>>,
    pub counts: Vec<usize>,
    /// Pooled within-class covariance before shrinkage.
    pub pooled_cov: DMatrix<f64>,
    /// Shrunk covariance actually used.
    pub regularized_cov: DMatrix<f64>,
    pub log_priors: Vec<f64>,
    pub gamma: f64,
    factor: Cholesky<f64, nalgebra::Dyn>,
    weights: Vec<DVector<f64>>,
    biases: Vec<f64>,
}

/// Relative pivot size below which a factorization is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

impl<C: Ord + Clone> LdaModel<C> {
    /// Fits from per-class statistics. Priors are empirical class
    /// frequencies; the shrinkage target is `tr(S)/dim * I` (identity when
    /// the pooled covariance is zero).
    pub fn from_stats(stats: &BTreeMap<C, ScatterStats>, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in [0, 1], got {gamma}")));
        }
        let stats: Vec<(&C, &ScatterStats)> = stats.iter().filter(|(_, s)| s.n > 0).collect();
        if stats.len() < 2 {
            return Err(Error::TooFew(format!(
                "LDA needs at least 2 classes with samples, got {}",
                stats.len()
            )));
        }
        let dim = stats[0].1.dim();
        if let Some((_, s)) = stats.iter().find(|(_, s)| s.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: s.dim(),
            });
        }
        let n: usize = stats.iter().map(|(_, s)| s.n).sum();
        let k = stats.len();
        if n <= k {
            return Err(Error::TooFew(format!(
                "{n} samples in {k} classes leave no degrees of freedom for the pooled covariance"
            )));
        }

        let mut pooled = DMatrix::zeros(dim, dim);
        for (_, s) in &stats {
            pooled += &s.scatter;
        }
        pooled /= (n - k) as f64;
        // symmetrize away rounding asymmetry
        let pooled = (&pooled + pooled.transpose()) * 0.5;

        let trace = pooled.trace();
        let target_scale = if trace > 0.0 { trace / dim as f64 } else { 1.0 };
        let mut reg = &pooled * (1.0 - gamma);
        for i in 0..dim {
            reg[(i, i)] += gamma * target_scale;
        }

        let factor = Cholesky::new(reg.clone()).ok_or(Error::SingularCovariance { gamma })?;
        let diag = factor.l_dirty().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        if !(lo > 0.0) || (lo / hi).powi(2) < SINGULAR_PIVOT_RATIO {
            return Err(Error::SingularCovariance { gamma });
        }

        let classes: Vec<C> = stats.iter().map(|(c, _)| (*c).clone()).collect();
        let means: Vec<DVector<f64>> = stats.iter().map(|(_, s)| s.mean.clone()).collect();
        let counts: Vec<usize> = stats.iter().map(|(_, s)| s.n).collect();
        let log_priors: Vec<f64> = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();
        let weights: Vec<DVector<f64>> = means.iter().map(|m| factor.solve(m)).collect();
        let biases = means
            .iter()
            .zip(&weights)
            .zip(&log_priors)
            .map(|((m, w), lp)| -0.5 * m.dot(w) + lp)
            .collect();

        Ok(LdaModel {
            classes,
            means,
            counts,
            pooled_cov: pooled,
            regularized_cov: reg,
            log_priors,
            gamma,
            factor,
            weights,
            biases,
        })
    }

    pub fn dim(&self) -> usize {
        self.pooled_cov.nrows()
    }

    /// Solves `regularized_cov * y = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    /// Discriminant scores `x' S^-1 m_c - m_c' S^-1 m_c / 2 + log prior_c`.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect())
    }

    /// Index into `classes` of the highest score; earliest class wins ties.
    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        let s = self.scores(x)?;
        Ok(argmax_first(&s))
    }

    pub fn predict(&self, x: &[f64]) -> Result<C> {
        Ok(self.classes[self.predict_index(x)?].clone())
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<C>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fits LDA on labelled rows.
pub fn lda_fit<C: Ord + Clone>(rows: &[Vec<f64>], labels: &[C], gamma: f64) -> Result<LdaModel<C>> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    let dim = rows.first().map_or(0, |r| r.len());
    let mut grouped: BTreeMap<C, Vec<&[f64]>> = BTreeMap::new();
    for (i, (r, c)) in rows.iter().zip(labels).enumerate() {
        if r.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("training row {i}")));
        }
        grouped.entry(c.clone()).or_default().push(r);
    }
    let stats = grouped
        .into_iter()
        .map(|(c, rs)| (c, ScatterStats::from_rows(dim, rs)))
        .collect();
    LdaModel::from_stats(&stats, gamma)
}
