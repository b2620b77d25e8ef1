//! End-to-end run: clean, extract, summarize, cluster, project, classify.
//!
//! A run owns its output directory. Stage outputs are written to a staging
//! directory and moved into place only when every stage succeeded; a failed
//! run leaves its partial outputs under `failed-run/`. The cleaned bundle is
//! cached under `cache/`, keyed by the content hash of the input bundle and
//! the filter parameters.

pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bundle::{
    bundle_files, read_bundle, segment_bundle, write_bundle, EmgBundle, GestureId, Group,
};
use crate::classify::{
    cv_gesture, cv_subject_group_signature, cv_subject_group_window, welch_ttest, CvReport,
    GestureCvConfig, Summary, TTest,
};
use crate::cluster::{cut, inconsistency, ward_linkage, write_cut_csv, Dendrogram, InconsistencyReport};
use crate::error::{Error, Result};
use crate::features::{extract, FeatureTensor};
use crate::preprocess::{clean_bundle, trim_transitions};
use crate::project::{pca_fit, pca_transform, write_scores_csv};
use crate::signatures::{build_signatures, standardize, write_signature_csv, SubjectSignature};

pub use config::{PipelineConfig, ThresholdMode};
pub use report::report_figures;

pub const TOOL: &str = "myopattern";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "run_manifest.json";
pub const RESULTS_NAME: &str = "results.json";
pub const STAGING_DIR: &str = ".staging";
pub const FAILED_DIR: &str = "failed-run";
pub const CACHE_DIR: &str = "cache";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Relative to the run's output directory.
    pub path: String,
    pub stage: String,
    pub sha256: String,
    pub parameters: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub parameters: Value,
    pub sample_rate: f64,
    pub window_samples: usize,
    pub increment_samples: usize,
    pub n_subjects: usize,
    pub n_segments: usize,
    pub n_windows: usize,
    pub clean_cache_key: Option<String>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<ArtifactRecord>,
}

impl RunManifest {
    pub fn load(output_dir: &Path) -> Result<Self> {
        let path = output_dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
    }

    pub fn output(&self, rel: &str) -> Option<&ArtifactRecord> {
        self.outputs.iter().find(|o| o.path == rel)
    }

    fn save(&self, output_dir: &Path) -> Result<()> {
        let path = output_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Done(T),
    Skipped(String),
}

impl<T> Outcome<T> {
    pub fn done(&self) -> Option<&T> {
        match self {
            Outcome::Done(v) => Some(v),
            Outcome::Skipped(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub standardized: bool,
    pub dendrogram: Dendrogram,
    pub inconsistency: InconsistencyReport,
    /// (k, cluster label per subject)
    pub cuts: Vec<(usize, Vec<usize>)>,
    /// (k, coefficient of the merge that joins k clusters into k - 1)
    pub cut_coefficients: Vec<(usize, f64)>,
    pub explained_variance_ratio: Vec<f64>,
    pub top3_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureGroups {
    pub intact: Summary,
    pub amputee: Summary,
    pub welch: Outcome<TTest>,
}

/// Everything the figure/report step needs, in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub subjects: Vec<String>,
    pub groups: Vec<Group>,
    pub primary: ClusterResult,
    pub alternate: ClusterResult,
    pub pca_scores: Vec<Vec<f64>>,
    pub gesture: Outcome<Vec<CvReport>>,
    pub gesture_groups: Outcome<GestureGroups>,
    pub subject_signature: Outcome<CvReport>,
    pub subject_window: Outcome<CvReport>,
}

impl RunResults {
    pub fn load(output_dir: &Path) -> Result<Self> {
        let path = output_dir.join(RESULTS_NAME);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
    }

    pub fn group_of(&self, subject: &str) -> Option<Group> {
        self.subjects
            .iter()
            .position(|s| s == subject)
            .map(|i| self.groups[i])
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Collects artifacts written under a root directory.
pub(crate) struct ArtifactSink {
    root: PathBuf,
    pub(crate) records: Vec<ArtifactRecord>,
}

impl ArtifactSink {
    pub(crate) fn new(root: PathBuf) -> Self {
        ArtifactSink {
            root,
            records: Vec::new(),
        }
    }

    pub(crate) fn write<F>(&mut self, stage: &str, rel: &str, parameters: Value, body: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = HashingWriter {
            inner: BufWriter::new(file),
            hasher: Sha256::new(),
        };
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e).at_stage(stage, &path))?;
        self.records.push(ArtifactRecord {
            path: rel.to_string(),
            stage: stage.to_string(),
            sha256: hex::encode(w.hasher.finalize()),
            parameters,
        });
        Ok(())
    }

    pub(crate) fn write_json<T: Serialize>(
        &mut self,
        stage: &str,
        rel: &str,
        parameters: Value,
        value: &T,
    ) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("results serialize");
        self.write(stage, rel, parameters, |w| writeln!(w, "{text}"))
    }
}

/// Resolves gesture names against the bundle catalog.
pub fn resolve_gestures(bundle: &EmgBundle, names: &[String]) -> Result<Vec<GestureId>> {
    let mut ids = Vec::with_capacity(names.len());
    for name in names {
        match bundle.gesture_by_name(name) {
            Some(id) => ids.push(id),
            None => {
                return Err(Error::Config(format!(
                    "gesture {name:?} is not in the bundle's gesture catalog"
                )))
            }
        }
    }
    let mut unique = ids.clone();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() != ids.len() {
        return Err(Error::Config("gesture subset names a gesture twice".into()));
    }
    Ok(ids)
}

fn common_sample_rate(bundle: &EmgBundle) -> Result<f64> {
    let mut rate = None;
    for (t, trial) in bundle.trials.iter().enumerate() {
        match rate {
            None => rate = Some(trial.sample_rate),
            Some(r) if r != trial.sample_rate => {
                return Err(Error::Invariant(format!(
                    "trial {t} is sampled at {} Hz, others at {r} Hz",
                    trial.sample_rate
                )))
            }
            _ => {}
        }
    }
    rate.ok_or_else(|| Error::Invariant("bundle has no trials".into()))
}

fn parameters_json(cfg: &PipelineConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(map) = &mut v {
        map.remove("output");
    }
    v
}

struct Prepared {
    bundle: EmgBundle,
    gestures: Vec<GestureId>,
    sample_rate: f64,
    inputs: Vec<InputRecord>,
}

fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let bundle = read_bundle(&cfg.bundle)?;
    let gestures = resolve_gestures(&bundle, &cfg.gestures)?;
    let sample_rate = common_sample_rate(&bundle)?;
    if cfg.hampel {
        cfg.hampel_config().validate(sample_rate)?;
    }
    cfg.windowing().samples(sample_rate)?;
    let mut inputs = Vec::new();
    for path in bundle_files(&cfg.bundle)? {
        let rel = path
            .strip_prefix(&cfg.bundle)
            .unwrap_or(&path)
            .to_string_lossy()
            .into_owned();
        inputs.push(InputRecord {
            sha256: sha256_file(&path)?,
            path: rel,
        });
    }
    Ok(Prepared {
        bundle,
        gestures,
        sample_rate,
        inputs,
    })
}

/// Runs every stage and writes all exports plus `run_manifest.json` into
/// `cfg.output`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    let prepared = prepare(cfg).map_err(|e| e.at_stage("validate", &cfg.bundle))?;

    let out = &cfg.output;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let staging = out.join(STAGING_DIR);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

    let mut sink = ArtifactSink::new(staging.clone());
    match execute(cfg, prepared, &mut sink) {
        Ok(mut manifest) => {
            manifest.outputs = sink.records;
            commit(out, &staging, &manifest)?;
            manifest.save(out)?;
            Ok(manifest)
        }
        Err(e) => {
            let failed = out.join(FAILED_DIR);
            if failed.exists() {
                let _ = fs::remove_dir_all(&failed);
            }
            let _ = fs::rename(&staging, &failed);
            Err(e)
        }
    }
}

fn commit(out: &Path, staging: &Path, manifest: &RunManifest) -> Result<()> {
    let mut tops: Vec<String> = manifest
        .outputs
        .iter()
        .map(|o| o.path.split('/').next().unwrap_or(&o.path).to_string())
        .collect();
    tops.sort();
    tops.dedup();
    for top in tops {
        let dest = out.join(&top);
        if dest.is_dir() {
            fs::remove_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
        } else if dest.exists() {
            fs::remove_file(&dest).map_err(|e| Error::io(&dest, e))?;
        }
        let src = staging.join(&top);
        fs::rename(&src, &dest).map_err(|e| Error::io(&src, e))?;
    }
    fs::remove_dir_all(staging).map_err(|e| Error::io(staging, e))?;
    let failed = out.join(FAILED_DIR);
    if failed.exists() {
        let _ = fs::remove_dir_all(&failed);
    }
    Ok(())
}

fn clean_with_cache(
    cfg: &PipelineConfig,
    prepared: &Prepared,
    bundle: EmgBundle,
) -> Result<(EmgBundle, Option<String>)> {
    if !cfg.hampel {
        return Ok((bundle, None));
    }
    let hampel = cfg.hampel_config();
    let mut hasher = Sha256::new();
    hasher.update(TOOL.as_bytes());
    hasher.update(VERSION.as_bytes());
    for i in &prepared.inputs {
        hasher.update(i.path.as_bytes());
        hasher.update(i.sha256.as_bytes());
    }
    hasher.update(serde_json::to_string(&hampel).expect("serializes").as_bytes());
    let key = hex::encode(hasher.finalize());
    let dir = cfg.output.join(CACHE_DIR).join(format!("clean-{}", &key[..16]));
    if dir.join(crate::bundle::MANIFEST_FILE).exists() {
        if let Ok(cached) = read_bundle(&dir) {
            return Ok((cached, Some(key)));
        }
    }
    let mut bundle = bundle;
    clean_bundle(&mut bundle, &hampel).map_err(|e| e.at_stage("preprocess", &cfg.bundle))?;
    let tmp = dir.with_extension("tmp");
    if tmp.exists() {
        let _ = fs::remove_dir_all(&tmp);
    }
    write_bundle(&bundle, &tmp).map_err(|e| e.at_stage("preprocess", &tmp))?;
    if dir.exists() {
        let _ = fs::remove_dir_all(&dir);
    }
    fs::rename(&tmp, &dir).map_err(|e| Error::io(&tmp, e).at_stage("preprocess", &dir))?;
    Ok((bundle, Some(key)))
}

fn cluster_variant(
    rows: &[Vec<f64>],
    labels: &[String],
    standardized: bool,
    cfg: &PipelineConfig,
) -> Result<ClusterResult> {
    let dendrogram = ward_linkage(rows)?.with_labels(labels.to_vec())?;
    let report = inconsistency(&dendrogram, cfg.inconsistency_depth)?;
    let mut cuts = Vec::new();
    let mut cut_coefficients = Vec::new();
    for &k in &cfg.cuts {
        if k <= dendrogram.n_leaves {
            cuts.push((k, cut(&dendrogram, k)?));
        }
        if let Some(i) = dendrogram.merge_for_clusters(k) {
            cut_coefficients.push((k, report.rows[i].coefficient));
        }
    }
    let pca = pca_fit(rows)?;
    Ok(ClusterResult {
        standardized,
        top3_ratio: pca.cumulative_ratio(3),
        explained_variance_ratio: pca.explained_variance_ratio.clone(),
        dendrogram,
        inconsistency: report,
        cuts,
        cut_coefficients,
    })
}

fn skip_too_few<T>(r: Result<T>) -> Result<Outcome<T>> {
    match r {
        Ok(v) => Ok(Outcome::Done(v)),
        Err(Error::TooFew(reason)) => Ok(Outcome::Skipped(reason)),
        Err(e) => Err(e),
    }
}

fn execute(cfg: &PipelineConfig, prepared: Prepared, sink: &mut ArtifactSink) -> Result<RunManifest> {
    let params = parameters_json(cfg);
    let bundle_path = cfg.bundle.clone();

    // preprocess
    let raw = prepared.bundle.clone();
    let (bundle, cache_key) = clean_with_cache(cfg, &prepared, raw)?;

    // features
    let mut segments = segment_bundle(&bundle);
    if cfg.trim_ms > 0.0 {
        segments = segments
            .iter()
            .map(|s| trim_transitions(s, cfg.trim_ms, bundle.trials[s.trial].sample_rate))
            .collect::<Result<_>>()
            .map_err(|e| e.at_stage("features", &bundle_path))?;
    }
    let tensor = extract(&bundle, &segments, &cfg.windowing(), &cfg.thresholds())
        .map_err(|e| e.at_stage("features", &bundle_path))?;
    let feature_params = json!({
        "window_ms": cfg.window_ms,
        "increment_ms": cfg.increment_ms,
        "window_samples": tensor.window_samples,
        "increment_samples": tensor.increment_samples,
        "thresholds": cfg.thresholds(),
        "trim_ms": cfg.trim_ms,
    });
    sink.write("features", "features/segments.csv", feature_params.clone(), |w| {
        write_segments_csv(w, &tensor, &segments)
    })?;
    if cfg.export_feature_table {
        sink.write("features", "features/feature_table.csv", feature_params, |w| {
            tensor.write_csv(w)
        })?;
    }

    // signatures
    let (layout, raw_sigs) =
        build_signatures(&tensor).map_err(|e| e.at_stage("signatures", &bundle_path))?;
    let subjects: Vec<String> = raw_sigs.iter().map(|s| s.subject_id.clone()).collect();
    let groups: Vec<Group> = subjects
        .iter()
        .map(|s| {
            prepared
                .bundle
                .group_of(s)
                .ok_or_else(|| Error::Invariant(format!("subject {s} missing from manifest")))
        })
        .collect::<Result<_>>()?;
    let (std_sigs, standardizer) =
        standardize(&raw_sigs).map_err(|e| e.at_stage("signatures", &bundle_path))?;
    sink.write(
        "signatures",
        "signatures/signatures_raw.csv",
        json!({"gestures": layout.gestures, "n_channels": layout.n_channels}),
        |w| write_signature_csv(w, &layout, &raw_sigs),
    )?;
    sink.write(
        "signatures",
        "signatures/signatures_standardized.csv",
        json!({"zero_variance_dims": standardizer.n_zero_variance()}),
        |w| write_signature_csv(w, &layout, &std_sigs),
    )?;

    // cluster + pca on both variants
    let rows_of = |s: &[SubjectSignature]| s.iter().map(|x| x.vector.clone()).collect::<Vec<_>>();
    let (primary_rows, alt_rows) = if cfg.standardize {
        (rows_of(&std_sigs), rows_of(&raw_sigs))
    } else {
        (rows_of(&raw_sigs), rows_of(&std_sigs))
    };
    let primary = cluster_variant(&primary_rows, &subjects, cfg.standardize, cfg)
        .map_err(|e| e.at_stage("cluster", &bundle_path))?;
    let alternate = cluster_variant(&alt_rows, &subjects, !cfg.standardize, cfg)
        .map_err(|e| e.at_stage("cluster", &bundle_path))?;
    let cluster_params = json!({
        "standardized": cfg.standardize,
        "inconsistency_depth": cfg.inconsistency_depth,
        "height": "sqrt(2*delta)",
    });
    let d = &primary.dendrogram;
    sink.write_json("cluster", "cluster/dendrogram.json", cluster_params.clone(), d)?;
    sink.write("cluster", "cluster/merges.csv", cluster_params.clone(), |w| d.write_merges_csv(w))?;
    sink.write("cluster", "cluster/dendrogram.dot", cluster_params.clone(), |w| {
        w.write_all(d.to_dot().as_bytes())
    })?;
    sink.write("cluster", "cluster/inconsistency.csv", cluster_params.clone(), |w| {
        primary.inconsistency.write_csv(w)
    })?;
    for (k, labels) in &primary.cuts {
        sink.write(
            "cluster",
            &format!("cluster/cut_k{k}.csv"),
            json!({"k": k, "standardized": cfg.standardize}),
            |w| write_cut_csv(w, &subjects, labels),
        )?;
    }

    let pca = pca_fit(&primary_rows).map_err(|e| e.at_stage("pca", &bundle_path))?;
    let scores = pca_transform(&pca, &primary_rows)?;
    let n_export = cfg.pca_export_components.min(pca.n_components());
    let exported: Vec<Vec<f64>> = scores.iter().map(|r| r[..n_export].to_vec()).collect();
    let group_names: Vec<String> = groups.iter().map(|g| g.to_string()).collect();
    let pca_params = json!({"standardized": cfg.standardize, "normalization": "n-1"});
    sink.write("pca", "pca/scores.csv", pca_params.clone(), |w| {
        write_scores_csv(w, &subjects, &group_names, &exported)
    })?;
    sink.write("pca", "pca/variance.csv", pca_params, |w| pca.write_variance_csv(w))?;

    // classify
    let group_map: BTreeMap<String, Group> = subjects.iter().cloned().zip(groups.iter().copied()).collect();
    let gesture_cfg = GestureCvConfig {
        gestures: prepared.gestures.clone(),
        gamma: cfg.gamma,
        scoring: cfg.scoring,
        repetitions: cfg.gesture_repetitions,
    };
    let gesture = skip_too_few(cv_gesture(&tensor, &gesture_cfg))
        .map_err(|e| e.at_stage("classify", &bundle_path))?;
    let gesture_groups = match &gesture {
        Outcome::Done(reports) => Outcome::Done(gesture_group_summary(reports, &group_map)),
        Outcome::Skipped(r) => Outcome::Skipped(r.clone()),
    };
    let subject_signature = skip_too_few(cv_subject_group_signature(
        &raw_sigs,
        &groups,
        cfg.gamma,
        cfg.standardize,
    ))
    .map_err(|e| e.at_stage("classify", &bundle_path))?;
    let subject_window = skip_too_few(cv_subject_group_window(&tensor, &group_map, cfg.gamma))
        .map_err(|e| e.at_stage("classify", &bundle_path))?;

    for report in gesture.done().into_iter().flatten() {
        report.check_hygiene()?;
    }
    for report in [&subject_signature, &subject_window].into_iter().filter_map(|o| o.done()) {
        report.check_hygiene()?;
    }

    let class_params = json!({
        "gamma": cfg.gamma,
        "gestures": cfg.gestures,
        "scoring": cfg.scoring,
        "repetitions": cfg.gesture_repetitions,
    });
    sink.write("classify", "classify/gesture_folds.csv", class_params.clone(), |w| {
        writeln!(w, "scheme,subject,fold,n_test,n_correct,accuracy")?;
        for r in gesture.done().into_iter().flatten() {
            r.write_folds_csv(&mut *w, false)?;
        }
        Ok(())
    })?;
    sink.write("classify", "classify/gesture_subjects.csv", class_params.clone(), |w| {
        writeln!(w, "subject,group,mean,std,min,max")?;
        for r in gesture.done().into_iter().flatten() {
            let s = r.subject.as_deref().unwrap_or("");
            let g = group_map.get(s).map(|g| g.as_str()).unwrap_or("");
            writeln!(w, "{s},{g},{},{},{},{}", r.mean, r.std, r.min, r.max)?;
        }
        Ok(())
    })?;
    for (name, outcome) in [
        ("subject_sig", &subject_signature),
        ("subject_window", &subject_window),
    ] {
        sink.write("classify", &format!("classify/{name}_folds.csv"), class_params.clone(), |w| {
            match outcome {
                Outcome::Done(r) => r.write_folds_csv(w, true),
                Outcome::Skipped(_) => writeln!(w, "scheme,subject,fold,n_test,n_correct,accuracy"),
            }
        })?;
    }

    let results = RunResults {
        subjects,
        groups,
        primary,
        alternate,
        pca_scores: exported,
        gesture,
        gesture_groups,
        subject_signature,
        subject_window,
    };
    sink.write_json("summary", RESULTS_NAME, params.clone(), &results)?;

    Ok(RunManifest {
        tool: TOOL.to_string(),
        version: VERSION.to_string(),
        parameters: params,
        sample_rate: prepared.sample_rate,
        window_samples: tensor.window_samples,
        increment_samples: tensor.increment_samples,
        n_subjects: results.subjects.len(),
        n_segments: tensor.segments.len(),
        n_windows: tensor.n_windows(),
        clean_cache_key: cache_key,
        inputs: prepared.inputs,
        outputs: Vec::new(),
    })
}

fn gesture_group_summary(reports: &[CvReport], groups: &BTreeMap<String, Group>) -> GestureGroups {
    let accs = |g: Group| -> Vec<f64> {
        reports
            .iter()
            .filter(|r| r.subject.as_ref().and_then(|s| groups.get(s)) == Some(&g))
            .map(|r| r.mean)
            .collect()
    };
    let (intact, amputee) = (accs(Group::Intact), accs(Group::Amputee));
    let welch = match welch_ttest(&intact, &amputee) {
        Ok(t) => Outcome::Done(t),
        Err(e) => Outcome::Skipped(e.to_string()),
    };
    GestureGroups {
        intact: Summary::of(&intact),
        amputee: Summary::of(&amputee),
        welch,
    }
}

fn write_segments_csv(
    w: &mut dyn Write,
    tensor: &FeatureTensor,
    segments: &[crate::bundle::RepetitionSegment],
) -> std::io::Result<()> {
    writeln!(w, "segment,subject,gesture,repetition,trial,start,end,n_windows")?;
    for (i, (e, s)) in tensor.segments.iter().zip(segments).enumerate() {
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{}",
            e.subject_id,
            e.gesture_id,
            e.repetition,
            e.trial,
            s.sample_range.start,
            s.sample_range.end,
            e.n_windows
        )?;
    }
    Ok(())
}
