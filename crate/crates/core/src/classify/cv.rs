//! Cross-validation harnesses: leave-one-repetition-out gesture recognition
//! within a subject, and leave-one-subject-out group recognition at
//! signature and window granularity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lda::{LdaModel, ScatterStats};
use super::stats::Summary;
use crate::bundle::{GestureId, Group};
use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::signatures::{Standardizer, SubjectSignature};

pub const DEFAULT_GAMMA: f64 = 1e-3;
pub const DEFAULT_REPETITIONS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Gesture,
    SubjectSig,
    SubjectWindow,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Gesture => "gesture",
            Scheme::SubjectSig => "subject-sig",
            Scheme::SubjectWindow => "subject-window",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gesture" => Ok(Scheme::Gesture),
            "subject-sig" => Ok(Scheme::SubjectSig),
            "subject-window" => Ok(Scheme::SubjectWindow),
            other => Err(Error::Config(format!(
                "unknown scheme {other:?} (gesture | subject-sig | subject-window)"
            ))),
        }
    }
}

/// How test windows of one repetition are scored in gesture CV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scoring {
    /// Every window is one test sample.
    #[default]
    PerWindow,
    /// Each test repetition is one sample labelled by the majority vote of its
    /// windows (ties go to the earliest class).
    MajorityVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// Held-out unit, e.g. `r3` or a subject id.
    pub held_out: String,
    pub n_test: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    /// Rows: true class, columns: predicted class, in report class order.
    pub confusion: Vec<Vec<usize>>,
    /// Identities (subject or subject/repetition) used for training.
    pub train_ids: Vec<String>,
    /// Identities tested.
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub scheme: Scheme,
    /// Subject the report belongs to (gesture CV only).
    pub subject: Option<String>,
    pub classes: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Aggregate confusion counts over all folds.
    pub confusion: Vec<Vec<usize>>,
    /// Share of each class among the units chance is measured over.
    pub class_rates: Vec<f64>,
    /// Accuracy of always answering the most frequent class.
    pub chance: f64,
}

impl CvReport {
    fn assemble(
        scheme: Scheme,
        subject: Option<String>,
        classes: Vec<String>,
        folds: Vec<FoldResult>,
        class_rates: Vec<f64>,
    ) -> Self {
        let k = classes.len();
        let mut confusion = vec![vec![0; k]; k];
        for f in &folds {
            for (row, frow) in confusion.iter_mut().zip(&f.confusion) {
                for (a, b) in row.iter_mut().zip(frow) {
                    *a += b;
                }
            }
        }
        let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        let s = Summary::of(&accs);
        let chance = class_rates.iter().cloned().fold(0.0, f64::max);
        CvReport {
            scheme,
            subject,
            classes,
            folds,
            mean: s.mean,
            std: s.std,
            min: s.min,
            max: s.max,
            confusion,
            class_rates,
            chance,
        }
    }

    /// Pooled accuracy over all test samples of all folds.
    pub fn pooled_accuracy(&self) -> f64 {
        let n: usize = self.folds.iter().map(|f| f.n_test).sum();
        let c: usize = self.folds.iter().map(|f| f.n_correct).sum();
        if n == 0 {
            0.0
        } else {
            c as f64 / n as f64
        }
    }

    /// Fails if any fold trained on an identity it also tested.
    pub fn check_hygiene(&self) -> Result<()> {
        for f in &self.folds {
            check_disjoint(&f.held_out, &f.train_ids, &f.test_ids)?;
        }
        Ok(())
    }

    /// `scheme,subject,fold,n_test,n_correct,accuracy`
    pub fn write_folds_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "scheme,subject,fold,n_test,n_correct,accuracy")?;
        }
        for f in &self.folds {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.scheme,
                self.subject.as_deref().unwrap_or(""),
                f.held_out,
                f.n_test,
                f.n_correct,
                f.accuracy
            )?;
        }
        out.flush()
    }
}

fn check_disjoint(fold: &str, train: &[String], test: &[String]) -> Result<()> {
    let train: BTreeSet<&str> = train.iter().map(|s| s.as_str()).collect();
    if let Some(leak) = test.iter().find(|t| train.contains(t.as_str())) {
        return Err(Error::FoldLeak(format!("fold {fold}: {leak} is in train and test")));
    }
    Ok(())
}

fn fold_result(
    held_out: String,
    truth_pred: &[(usize, usize)],
    k: usize,
    train_ids: Vec<String>,
    test_ids: Vec<String>,
) -> Result<FoldResult> {
    check_disjoint(&held_out, &train_ids, &test_ids)?;
    let mut confusion = vec![vec![0; k]; k];
    for &(t, p) in truth_pred {
        confusion[t][p] += 1;
    }
    let n_correct = truth_pred.iter().filter(|(t, p)| t == p).count();
    let n_test = truth_pred.len();
    Ok(FoldResult {
        held_out,
        n_test,
        n_correct,
        accuracy: if n_test == 0 {
            0.0
        } else {
            n_correct as f64 / n_test as f64
        },
        confusion,
        train_ids,
        test_ids,
    })
}

fn majority(predictions: &[usize], k: usize) -> usize {
    let mut votes = vec![0usize; k];
    for &p in predictions {
        votes[p] += 1;
    }
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureCvConfig {
    pub gestures: Vec<GestureId>,
    pub gamma: f64,
    pub scoring: Scoring,
    pub repetitions: u32,
}

impl GestureCvConfig {
    pub fn new(gestures: Vec<GestureId>) -> Self {
        GestureCvConfig {
            gestures,
            gamma: DEFAULT_GAMMA,
            scoring: Scoring::PerWindow,
            repetitions: DEFAULT_REPETITIONS,
        }
    }
}

/// Leave-one-repetition-out gesture recognition for every subject. Fold `r`
/// trains on the windows of all other repetitions of the selected gestures
/// and tests on repetition `r`.
pub fn cv_gesture(tensor: &FeatureTensor, cfg: &GestureCvConfig) -> Result<Vec<CvReport>> {
    let mut gestures = cfg.gestures.clone();
    gestures.sort_unstable();
    gestures.dedup();
    if gestures.len() < 2 {
        return Err(Error::Config("gesture CV needs at least 2 gestures".into()));
    }
    if cfg.repetitions < 2 {
        return Err(Error::Config("gesture CV needs at least 2 repetitions".into()));
    }
    tensor
        .segments_by_subject()
        .into_par_iter()
        .map(|(subject, segs)| cv_gesture_subject(tensor, subject, &segs, &gestures, cfg))
        .collect()
}

fn cv_gesture_subject(
    tensor: &FeatureTensor,
    subject: &str,
    segs: &[usize],
    gestures: &[GestureId],
    cfg: &GestureCvConfig,
) -> Result<CvReport> {
    let dim = tensor.dim();
    // segments per (repetition, class index)
    let mut cells: BTreeMap<(u32, usize), Vec<usize>> = BTreeMap::new();
    for &s in segs {
        let e = &tensor.segments[s];
        if let Ok(class) = gestures.binary_search(&e.gesture_id) {
            if e.repetition >= 1 && e.repetition <= cfg.repetitions {
                cells.entry((e.repetition, class)).or_default().push(s);
            }
        }
    }
    for r in 1..=cfg.repetitions {
        for (c, g) in gestures.iter().enumerate() {
            if !cells.contains_key(&(r, c)) {
                return Err(Error::Coverage(format!(
                    "subject {subject}: gesture {g} has no repetition {r}"
                )));
            }
        }
    }
    let stats: BTreeMap<(u32, usize), ScatterStats> = cells
        .iter()
        .map(|(key, ss)| {
            let rows = ss.iter().flat_map(|&s| tensor.segment_windows(s));
            (*key, ScatterStats::from_rows(dim, rows))
        })
        .collect();

    let k = gestures.len();
    let mut folds = Vec::with_capacity(cfg.repetitions as usize);
    for r in 1..=cfg.repetitions {
        let mut train: BTreeMap<usize, ScatterStats> = BTreeMap::new();
        for ((rep, class), st) in &stats {
            if *rep != r {
                train
                    .entry(*class)
                    .or_insert_with(|| ScatterStats::empty(dim))
                    .merge(st);
            }
        }
        let model = LdaModel::from_stats(&train, cfg.gamma)?;
        let mut truth_pred = Vec::new();
        for c in 0..k {
            for &s in &cells[&(r, c)] {
                let preds = tensor
                    .segment_windows(s)
                    .map(|w| model.predict(w))
                    .collect::<Result<Vec<usize>>>()?;
                match cfg.scoring {
                    Scoring::PerWindow => truth_pred.extend(preds.into_iter().map(|p| (c, p))),
                    Scoring::MajorityVote => truth_pred.push((c, majority(&preds, k))),
                }
            }
        }
        let train_ids = (1..=cfg.repetitions)
            .filter(|&x| x != r)
            .map(|x| format!("{subject}/r{x}"))
            .collect();
        folds.push(fold_result(
            format!("r{r}"),
            &truth_pred,
            k,
            train_ids,
            vec![format!("{subject}/r{r}")],
        )?);
    }

    let mut counts = vec![0usize; k];
    for f in &folds {
        for (c, row) in f.confusion.iter().enumerate() {
            counts[c] += row.iter().sum::<usize>();
        }
    }
    let total: usize = counts.iter().sum();
    let class_rates = counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect();
    Ok(CvReport::assemble(
        Scheme::Gesture,
        Some(subject.to_string()),
        gestures.iter().map(|g| g.to_string()).collect(),
        folds,
        class_rates,
    ))
}

fn check_groups<'a>(groups: impl Iterator<Item = &'a Group>) -> Result<Vec<(Group, usize)>> {
    let mut counts: BTreeMap<Group, usize> = BTreeMap::new();
    for g in groups {
        *counts.entry(*g).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::TooFew("subject-group CV needs both groups present".into()));
    }
    if let Some((g, n)) = counts.iter().find(|(_, &n)| n < 2) {
        return Err(Error::TooFew(format!("group {g} has {n} subject(s), need at least 2")));
    }
    Ok(counts.into_iter().collect())
}

fn group_classes(counts: &[(Group, usize)]) -> (Vec<String>, Vec<f64>) {
    let total: usize = counts.iter().map(|(_, n)| n).sum();
    (
        counts.iter().map(|(g, _)| g.to_string()).collect(),
        counts.iter().map(|(_, n)| *n as f64 / total as f64).collect(),
    )
}

/// Leave-one-subject-out group recognition on signatures. With
/// `standardize`, each fold z-scores with statistics of its training
/// subjects only.
pub fn cv_subject_group_signature(
    signatures: &[SubjectSignature],
    groups: &[Group],
    gamma: f64,
    standardize: bool,
) -> Result<CvReport> {
    if signatures.len() != groups.len() {
        return Err(Error::Dimension {
            expected: signatures.len(),
            actual: groups.len(),
        });
    }
    let counts = check_groups(groups.iter())?;
    let class_of = |g: Group| counts.iter().position(|(c, _)| *c == g).unwrap();
    let dim = signatures[0].vector.len();

    let folds = (0..signatures.len())
        .into_par_iter()
        .map(|held| {
            let train: Vec<usize> = (0..signatures.len()).filter(|&i| i != held).collect();
            let (train_rows, test_row) = if standardize {
                let raw: Vec<&[f64]> = train.iter().map(|&i| signatures[i].vector.as_slice()).collect();
                let st = Standardizer::fit(&raw)?;
                let rows = raw.iter().map(|r| st.apply(r)).collect::<Result<Vec<_>>>()?;
                (rows, st.apply(&signatures[held].vector)?)
            } else {
                (
                    train.iter().map(|&i| signatures[i].vector.clone()).collect(),
                    signatures[held].vector.clone(),
                )
            };
            let mut per_class: BTreeMap<usize, Vec<&[f64]>> = BTreeMap::new();
            for (row, &i) in train_rows.iter().zip(&train) {
                per_class.entry(class_of(groups[i])).or_default().push(row);
            }
            let stats = per_class
                .into_iter()
                .map(|(c, rows)| (c, ScatterStats::from_rows(dim, rows)))
                .collect();
            let model = LdaModel::from_stats(&stats, gamma)?;
            let pred = model.predict(&test_row)?;
            fold_result(
                signatures[held].subject_id.clone(),
                &[(class_of(groups[held]), pred)],
                counts.len(),
                train.iter().map(|&i| signatures[i].subject_id.clone()).collect(),
                vec![signatures[held].subject_id.clone()],
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let (classes, rates) = group_classes(&counts);
    Ok(CvReport::assemble(Scheme::SubjectSig, None, classes, folds, rates))
}

/// Leave-one-subject-out group recognition on single windows. Each fold
/// trains on every window of the other subjects; the fold accuracy is the
/// share of the held-out subject's windows assigned to its group.
pub fn cv_subject_group_window(
    tensor: &FeatureTensor,
    groups: &BTreeMap<String, Group>,
    gamma: f64,
) -> Result<CvReport> {
    let by_subject = tensor.segments_by_subject();
    let subjects: Vec<&str> = by_subject.keys().copied().collect();
    let mut subject_groups = Vec::with_capacity(subjects.len());
    for s in &subjects {
        subject_groups.push(*groups.get(*s).ok_or_else(|| {
            Error::Coverage(format!("subject {s} has no group assignment"))
        })?);
    }
    let counts = check_groups(subject_groups.iter())?;
    let class_of = |g: Group| counts.iter().position(|(c, _)| *c == g).unwrap();
    let dim = tensor.dim();

    let stats: Vec<ScatterStats> = subjects
        .par_iter()
        .map(|s| {
            let rows = by_subject[s].iter().flat_map(|&seg| tensor.segment_windows(seg));
            ScatterStats::from_rows(dim, rows)
        })
        .collect();

    let folds = (0..subjects.len())
        .into_par_iter()
        .map(|held| {
            let mut train: BTreeMap<usize, ScatterStats> = BTreeMap::new();
            for (i, st) in stats.iter().enumerate() {
                if i != held {
                    train
                        .entry(class_of(subject_groups[i]))
                        .or_insert_with(|| ScatterStats::empty(dim))
                        .merge(st);
                }
            }
            let model = LdaModel::from_stats(&train, gamma)?;
            let truth = class_of(subject_groups[held]);
            let truth_pred = by_subject[subjects[held]]
                .iter()
                .flat_map(|&seg| tensor.segment_windows(seg))
                .map(|w| Ok((truth, model.predict(w)?)))
                .collect::<Result<Vec<_>>>()?;
            fold_result(
                subjects[held].to_string(),
                &truth_pred,
                counts.len(),
                subjects
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != held)
                    .map(|(_, s)| s.to_string())
                    .collect(),
                vec![subjects[held].to_string()],
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let (classes, rates) = group_classes(&counts);
    Ok(CvReport::assemble(Scheme::SubjectWindow, None, classes, folds, rates))
}
