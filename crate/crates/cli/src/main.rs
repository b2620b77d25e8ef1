use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use myopattern::bundle::{read_bundle, segment_bundle, write_bundle, EmgBundle, Group};
use myopattern::classify::{
    cv_gesture, cv_subject_group_signature, cv_subject_group_window, CvReport, GestureCvConfig, Scoring,
};
use myopattern::cluster::{cut, inconsistency, ward_linkage, write_cut_csv};
use myopattern::features::{extract, FeatureTensor};
use myopattern::pipeline::{
    report_figures, resolve_gestures, run_pipeline, PipelineConfig, RunResults, ThresholdMode,
};
use myopattern::preprocess::{clean_bundle, trim_transitions};
use myopattern::project::{pca_fit, pca_transform, write_scores_csv};
use myopattern::signatures::{build_signatures, standardize, write_signature_csv, SubjectSignature};
use myopattern::synth::{synth_bundle, SynthConfig};
use myopattern::{Error, Result};

#[derive(Parser)]
#[command(name = "myopattern", version, about = "Surface-EMG pattern analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a bundle against the format and report conformance advisories.
    Validate { bundle: PathBuf },
    /// Remove line interference and write a cleaned bundle.
    Preprocess {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Write the per-window feature table.
    Features {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Write raw and standardized subject signatures.
    Signatures {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Ward clustering of subject signatures.
    Cluster {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Principal components of subject signatures.
    Pca {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Cross-validated LDA classification.
    Classify {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SchemeArg::Gesture)]
        scheme: SchemeArg,
        #[command(flatten)]
        opts: Opts,
    },
    /// Full pipeline followed by figure data.
    Run {
        /// Bundle directory; overrides the config file.
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Output directory; overrides the config file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Figure data for a completed run.
    Report { output: PathBuf },
    /// Print (or write) a config file holding every default.
    InitConfig { path: Option<PathBuf> },
    /// Write a seeded synthetic bundle.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        intact: usize,
        #[arg(long, default_value_t = 3)]
        amputee: usize,
        #[arg(long, default_value_t = 6)]
        gestures: usize,
        #[arg(long, default_value_t = 4)]
        channels: usize,
        #[arg(long, default_value_t = 500.0)]
        sample_rate: f64,
        /// Amplitude of an added line tone.
        #[arg(long, default_value_t = 0.0)]
        line_noise: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Gesture,
    SubjectSig,
    SubjectWindow,
}

/// Parameter overrides on top of `--config` (or the defaults).
#[derive(Args, Default)]
struct Opts {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    line_freq: Option<f64>,
    /// Half-width of the spectral median window, in bins.
    #[arg(long)]
    hampel_window: Option<usize>,
    #[arg(long)]
    hampel_nsigma: Option<f64>,
    #[arg(long)]
    no_hampel: bool,
    #[arg(long)]
    trim_ms: Option<f64>,
    #[arg(long)]
    window_ms: Option<f64>,
    #[arg(long)]
    increment_ms: Option<f64>,
    /// Absolute ZC threshold; switches thresholds to absolute mode.
    #[arg(long)]
    eps_zc: Option<f64>,
    /// Absolute SSC threshold; switches thresholds to absolute mode.
    #[arg(long)]
    eps_ssc: Option<f64>,
    #[arg(long)]
    threshold_fraction: Option<f64>,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated gesture names.
    #[arg(long, value_delimiter = ',')]
    gestures: Option<Vec<String>>,
    /// Score each held-out repetition by majority vote over its windows.
    #[arg(long)]
    vote: bool,
    #[arg(long)]
    feature_table: bool,
}

impl Opts {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.line_freq {
            cfg.line_freq = v;
        }
        if let Some(v) = self.hampel_window {
            cfg.hampel_window = v;
        }
        if let Some(v) = self.hampel_nsigma {
            cfg.hampel_nsigma = v;
        }
        if self.no_hampel {
            cfg.hampel = false;
        }
        if let Some(v) = self.trim_ms {
            cfg.trim_ms = v;
        }
        if let Some(v) = self.window_ms {
            cfg.window_ms = v;
        }
        if let Some(v) = self.increment_ms {
            cfg.increment_ms = v;
        }
        if self.eps_zc.is_some() || self.eps_ssc.is_some() {
            cfg.threshold_mode = ThresholdMode::Absolute;
            cfg.eps_zc = self.eps_zc.unwrap_or(cfg.eps_zc);
            cfg.eps_ssc = self.eps_ssc.unwrap_or(cfg.eps_ssc);
        }
        if let Some(v) = self.threshold_fraction {
            cfg.threshold_fraction = v;
        }
        if self.no_standardize {
            cfg.standardize = false;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = &self.gestures {
            cfg.gestures = v.iter().map(|s| s.trim().to_string()).collect();
        }
        if self.vote {
            cfg.scoring = Scoring::MajorityVote;
        }
        if self.feature_table {
            cfg.export_feature_table = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_to(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn load(bundle: &Path) -> Result<EmgBundle> {
    read_bundle(bundle).map_err(|e| e.at_stage("validate", bundle))
}

/// Features of a bundle as given; no cleaning happens here.
fn tensor(bundle: &EmgBundle, cfg: &PipelineConfig, path: &Path) -> Result<FeatureTensor> {
    let mut segments = segment_bundle(bundle);
    if cfg.trim_ms > 0.0 {
        segments = segments
            .iter()
            .map(|s| trim_transitions(s, cfg.trim_ms, bundle.trials[s.trial].sample_rate))
            .collect::<Result<_>>()
            .map_err(|e| e.at_stage("features", path))?;
    }
    extract(bundle, &segments, &cfg.windowing(), &cfg.thresholds()).map_err(|e| e.at_stage("features", path))
}

fn signatures(
    bundle: &EmgBundle,
    cfg: &PipelineConfig,
    path: &Path,
) -> Result<(FeatureTensor, Vec<SubjectSignature>, Vec<SubjectSignature>)> {
    let t = tensor(bundle, cfg, path)?;
    let (_, raw) = build_signatures(&t).map_err(|e| e.at_stage("signatures", path))?;
    let (std, _) = standardize(&raw).map_err(|e| e.at_stage("signatures", path))?;
    Ok((t, raw, std))
}

fn rows(sigs: &[SubjectSignature]) -> Vec<Vec<f64>> {
    sigs.iter().map(|s| s.vector.clone()).collect()
}

fn groups_of(bundle: &EmgBundle) -> BTreeMap<String, Group> {
    bundle.manifest.subjects.iter().map(|s| (s.id.clone(), s.group)).collect()
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn validate(path: &Path) -> Result<()> {
    let b = load(path)?;
    b.validate().map_err(|e| e.at_stage("validate", path))?;
    let samples: usize = b.trials.iter().map(|t| t.n_samples()).sum();
    println!(
        "ok: {} subjects, {} trials, {} gestures, {samples} samples",
        b.manifest.subjects.len(),
        b.trials.len(),
        b.manifest.gestures.len()
    );
    for issue in b.conformance_issues() {
        println!("advisory: {issue}");
    }
    Ok(())
}

fn preprocess(path: &Path, out: &Path, cfg: &PipelineConfig) -> Result<()> {
    let mut b = load(path)?;
    if cfg.hampel {
        clean_bundle(&mut b, &cfg.hampel_config()).map_err(|e| e.at_stage("preprocess", path))?;
    }
    write_bundle(&b, out).map_err(|e| e.at_stage("preprocess", out))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn features(path: &Path, out: &Path, cfg: &PipelineConfig) -> Result<()> {
    let b = load(path)?;
    let t = tensor(&b, cfg, path)?;
    write_to(out, |w| t.write_csv(w))?;
    println!(
        "{} windows of {} samples (increment {}) -> {}",
        t.n_windows(),
        t.window_samples,
        t.increment_samples,
        out.display()
    );
    Ok(())
}

fn signatures_cmd(path: &Path, out: &Path, cfg: &PipelineConfig) -> Result<()> {
    let b = load(path)?;
    let t = tensor(&b, cfg, path)?;
    let (layout, raw) = build_signatures(&t).map_err(|e| e.at_stage("signatures", path))?;
    let (std, st) = standardize(&raw).map_err(|e| e.at_stage("signatures", path))?;
    write_to(&out.join("signatures_raw.csv"), |w| write_signature_csv(w, &layout, &raw))?;
    write_to(&out.join("signatures_standardized.csv"), |w| write_signature_csv(w, &layout, &std))?;
    println!(
        "{} signatures of dimension {} ({} constant) -> {}",
        raw.len(),
        layout.dim(),
        st.n_zero_variance(),
        out.display()
    );
    Ok(())
}

fn cluster_cmd(path: &Path, out: &Path, cfg: &PipelineConfig) -> Result<()> {
    let b = load(path)?;
    let (_, raw, std) = signatures(&b, cfg, path)?;
    let sigs = if cfg.standardize { &std } else { &raw };
    let names: Vec<String> = sigs.iter().map(|s| s.subject_id.clone()).collect();
    let stage = |e: Error| e.at_stage("cluster", path);
    let tree = ward_linkage(&rows(sigs)).and_then(|d| d.with_labels(names.clone())).map_err(stage)?;
    let report = inconsistency(&tree, cfg.inconsistency_depth).map_err(stage)?;
    write_to(&out.join("merges.csv"), |w| tree.write_merges_csv(w))?;
    write_to(&out.join("dendrogram.dot"), |w| w.write_all(tree.to_dot().as_bytes()))?;
    write_to(&out.join("inconsistency.csv"), |w| report.write_csv(w))?;
    for &k in cfg.cuts.iter().filter(|&&k| k <= tree.n_leaves) {
        let labels = cut(&tree, k).map_err(stage)?;
        write_to(&out.join(format!("cut_k{k}.csv")), |w| write_cut_csv(w, &names, &labels))?;
        let clusters: Vec<String> = (1..=k)
            .map(|c| {
                let m: Vec<&str> = names
                    .iter()
                    .zip(&labels)
                    .filter(|(_, l)| **l == c)
                    .map(|(n, _)| n.as_str())
                    .collect();
                format!("{{{}}}", m.join(" "))
            })
            .collect();
        println!("k={k}: {}", clusters.join(" "));
    }
    Ok(())
}

fn pca_cmd(path: &Path, out: &Path, cfg: &PipelineConfig) -> Result<()> {
    let b = load(path)?;
    let (_, raw, std) = signatures(&b, cfg, path)?;
    let sigs = if cfg.standardize { &std } else { &raw };
    let x = rows(sigs);
    let model = pca_fit(&x).map_err(|e| e.at_stage("pca", path))?;
    let scores = pca_transform(&model, &x)?;
    let k = cfg.pca_export_components.min(model.n_components());
    let kept: Vec<Vec<f64>> = scores.iter().map(|r| r[..k].to_vec()).collect();
    let names: Vec<String> = sigs.iter().map(|s| s.subject_id.clone()).collect();
    let groups = groups_of(&b);
    let group_names: Vec<String> = names.iter().map(|n| groups[n].to_string()).collect();
    write_to(&out.join("scores.csv"), |w| write_scores_csv(w, &names, &group_names, &kept))?;
    write_to(&out.join("variance.csv"), |w| model.write_variance_csv(w))?;
    println!("top-3 explained variance {}", pct(model.cumulative_ratio(3)));
    Ok(())
}

fn classify_cmd(path: &Path, out: &Path, scheme: SchemeArg, cfg: &PipelineConfig) -> Result<()> {
    let b = load(path)?;
    let stage = |e: Error| e.at_stage("classify", path);
    let reports: Vec<CvReport> = match scheme {
        SchemeArg::Gesture => {
            let gestures = resolve_gestures(&b, &cfg.gestures).map_err(|e| e.at_stage("validate", path))?;
            let t = tensor(&b, cfg, path)?;
            let gcfg = GestureCvConfig {
                gestures,
                gamma: cfg.gamma,
                scoring: cfg.scoring,
                repetitions: cfg.gesture_repetitions,
            };
            cv_gesture(&t, &gcfg).map_err(stage)?
        }
        SchemeArg::SubjectSig => {
            let (_, raw, _) = signatures(&b, cfg, path)?;
            let groups = groups_of(&b);
            let labels: Vec<Group> = raw.iter().map(|s| groups[&s.subject_id]).collect();
            vec![cv_subject_group_signature(&raw, &labels, cfg.gamma, cfg.standardize).map_err(stage)?]
        }
        SchemeArg::SubjectWindow => {
            let t = tensor(&b, cfg, path)?;
            vec![cv_subject_group_window(&t, &groups_of(&b), cfg.gamma).map_err(stage)?]
        }
    };
    for r in &reports {
        r.check_hygiene().map_err(stage)?;
    }
    write_to(&out.join("folds.csv"), |w| {
        writeln!(w, "scheme,subject,fold,n_test,n_correct,accuracy")?;
        reports.iter().try_for_each(|r| r.write_folds_csv(&mut *w, false))
    })?;
    for r in &reports {
        let who = r.subject.as_deref().unwrap_or("all");
        println!(
            "{who}: mean {} std {} range {}..{} chance {}",
            pct(r.mean),
            pct(r.std),
            pct(r.min),
            pct(r.max),
            pct(r.chance)
        );
    }
    Ok(())
}

fn run(bundle: Option<PathBuf>, out: Option<PathBuf>, opts: &Opts) -> Result<()> {
    let mut cfg = opts.config()?;
    if let Some(b) = bundle {
        cfg.bundle = b;
    }
    if let Some(o) = out {
        cfg.output = o;
    }
    let manifest = run_pipeline(&cfg)?;
    let manifest_after = report_figures(&cfg.output)?;
    let results = RunResults::load(&cfg.output)?;
    println!(
        "{} subjects, {} segments, {} windows (W={}, I={}); {} outputs in {}",
        manifest.n_subjects,
        manifest.n_segments,
        manifest.n_windows,
        manifest.window_samples,
        manifest.increment_samples,
        manifest_after.outputs.len(),
        cfg.output.display()
    );
    match results.gesture_groups.done() {
        Some(g) => println!(
            "gesture CV: intact {} ± {}, amputee {} ± {}",
            pct(g.intact.mean),
            pct(g.intact.std),
            pct(g.amputee.mean),
            pct(g.amputee.std)
        ),
        None => println!("gesture CV by group: skipped"),
    }
    match results.subject_signature.done() {
        Some(r) => println!("subject-group (signature LOSO): {}", pct(r.mean)),
        None => println!("subject-group (signature LOSO): skipped"),
    }
    match results.subject_window.done() {
        Some(r) => println!("subject-group (window LOSO): {} (chance {})", pct(r.mean), pct(r.chance)),
        None => println!("subject-group (window LOSO): skipped"),
    }
    Ok(())
}

fn report(output: &Path) -> Result<()> {
    let m = report_figures(output)?;
    for o in m.outputs.iter().filter(|o| o.stage == "report") {
        println!("{}", o.path);
    }
    Ok(())
}

fn init_config(path: Option<PathBuf>) -> Result<()> {
    let text = PipelineConfig::default().to_toml();
    match path {
        Some(p) => write_to(&p, |w| w.write_all(text.as_bytes())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate { bundle } => validate(&bundle),
        Command::Preprocess { bundle, out, opts } => preprocess(&bundle, &out, &opts.config()?),
        Command::Features { bundle, out, opts } => features(&bundle, &out, &opts.config()?),
        Command::Signatures { bundle, out, opts } => signatures_cmd(&bundle, &out, &opts.config()?),
        Command::Cluster { bundle, out, opts } => cluster_cmd(&bundle, &out, &opts.config()?),
        Command::Pca { bundle, out, opts } => pca_cmd(&bundle, &out, &opts.config()?),
        Command::Classify {
            bundle,
            out,
            scheme,
            opts,
        } => classify_cmd(&bundle, &out, scheme, &opts.config()?),
        Command::Run { bundle, out, opts } => run(bundle, out, &opts),
        Command::Report { output } => report(&output),
        Command::InitConfig { path } => init_config(path),
        Command::Synth {
            out,
            intact,
            amputee,
            gestures,
            channels,
            sample_rate,
            line_noise,
            seed,
        } => {
            let cfg = SynthConfig {
                n_intact: intact,
                n_amputee: amputee,
                n_gestures: gestures,
                n_channels: channels,
                sample_rate,
                line_noise,
                seed,
                ..SynthConfig::default()
            };
            let b = synth_bundle(&cfg)?;
            write_bundle(&b, &out)?;
            println!("wrote {} subjects to {}", b.manifest.subjects.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
