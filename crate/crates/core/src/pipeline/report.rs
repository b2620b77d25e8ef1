//! Figure data from a completed run. Nothing here renders; every output is
//! a CSV or DOT file for external plotting.

use std::path::Path;

use serde_json::json;

use super::{ArtifactSink, RunManifest, RunResults, RESULTS_NAME};
use crate::bundle::Group;
use crate::classify::BoxStats;
use crate::cluster::{cut, write_cut_csv};
use crate::error::{Error, Result};

pub const FIGURE_CUTS: [usize; 2] = [2, 6];

/// Reference values printed next to the measured ones in `summary.csv`.
pub const REFERENCE_INTACT_ACCURACY: f64 = 90.54;
pub const REFERENCE_AMPUTEE_ACCURACY: f64 = 80.58;
pub const REFERENCE_SIGNATURE_LOSO: f64 = 90.0;
pub const REFERENCE_WINDOW_LOSO: f64 = 66.0;
pub const REFERENCE_TOP3_VARIANCE: f64 = 54.0;
pub const REFERENCE_COEFF_K2: f64 = 4.38;
pub const REFERENCE_COEFF_K6: f64 = 3.11;

const REQUIRED: [&str; 4] = [
    RESULTS_NAME,
    "cluster/dendrogram.dot",
    "pca/scores.csv",
    "classify/gesture_folds.csv",
];

/// Writes `figures/*` into `output_dir` and appends them to the run manifest.
pub fn report_figures(output_dir: &Path) -> Result<RunManifest> {
    let mut manifest = RunManifest::load(output_dir)?;
    for rel in REQUIRED {
        if manifest.output(rel).is_none() || !output_dir.join(rel).exists() {
            return Err(Error::Coverage(format!(
                "run in {} is missing stage output {rel}",
                output_dir.display()
            ))
            .at_stage("report", output_dir.join(rel)));
        }
    }
    let results = RunResults::load(output_dir)?;
    let mut sink = ArtifactSink::new(output_dir.to_path_buf());
    write_figures(&results, &mut sink).map_err(|e| e.at_stage("report", output_dir))?;

    manifest.outputs.retain(|o| o.stage != "report");
    manifest.outputs.extend(sink.records);
    manifest.save(output_dir)?;
    Ok(manifest)
}

fn write_figures(results: &RunResults, sink: &mut ArtifactSink) -> Result<()> {
    let by_group = |g: Group| -> Vec<f64> {
        results
            .gesture
            .done()
            .into_iter()
            .flatten()
            .filter(|r| r.subject.as_deref().and_then(|s| results.group_of(s)) == Some(g))
            .map(|r| r.mean)
            .collect()
    };
    sink.write("report", "figures/boxplot_stats.csv", json!({"whisker": 1.5}), |w| {
        writeln!(w, "group,n,min,q1,median,q3,max,whisker_low,whisker_high,outliers")?;
        for g in [Group::Intact, Group::Amputee] {
            if let Some(b) = BoxStats::of(&by_group(g)) {
                let outliers: Vec<String> = b.outliers.iter().map(|v| v.to_string()).collect();
                writeln!(
                    w,
                    "{g},{},{},{},{},{},{},{},{},{}",
                    b.n,
                    b.min,
                    b.q1,
                    b.median,
                    b.q3,
                    b.max,
                    b.whisker_low,
                    b.whisker_high,
                    outliers.join(";")
                )?;
            }
        }
        Ok(())
    })?;

    let d = &results.primary.dendrogram;
    let standardized = results.primary.standardized;
    sink.write("report", "figures/dendrogram.dot", json!({"standardized": standardized}), |w| {
        w.write_all(d.to_dot().as_bytes())
    })?;
    for k in FIGURE_CUTS {
        if k > d.n_leaves {
            continue;
        }
        let labels = cut(d, k)?;
        sink.write(
            "report",
            &format!("figures/cut_k{k}.csv"),
            json!({"k": k, "standardized": standardized}),
            |w| write_cut_csv(w, &results.subjects, &labels),
        )?;
    }

    sink.write("report", "figures/pc_scatter.csv", json!({"standardized": standardized}), |w| {
        let k = results.pca_scores.first().map_or(0, |r| r.len());
        write!(w, "subject,group")?;
        for i in 1..=k {
            write!(w, ",pc{i}")?;
        }
        writeln!(w)?;
        for ((s, g), row) in results.subjects.iter().zip(&results.groups).zip(&results.pca_scores) {
            write!(w, "{s},{g}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;

    let rows = summary_rows(results);
    sink.write("report", "figures/summary.csv", json!({}), |w| {
        writeln!(w, "metric,value,reference")?;
        for (metric, value, reference) in &rows {
            let value = value.map(|v| v.to_string()).unwrap_or_default();
            let reference = reference.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{metric},{value},{reference}")?;
        }
        Ok(())
    })
}

type SummaryRow = (String, Option<f64>, Option<f64>);

fn summary_rows(r: &RunResults) -> Vec<SummaryRow> {
    let pct = |v: f64| 100.0 * v;
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut push = |m: &str, v: Option<f64>, reference: Option<f64>| rows.push((m.to_string(), v, reference));

    let gg = r.gesture_groups.done();
    push("gesture_accuracy_intact_pct", gg.map(|g| pct(g.intact.mean)), Some(REFERENCE_INTACT_ACCURACY));
    push("gesture_accuracy_intact_std_pct", gg.map(|g| pct(g.intact.std)), Some(3.6));
    push("gesture_accuracy_amputee_pct", gg.map(|g| pct(g.amputee.mean)), Some(REFERENCE_AMPUTEE_ACCURACY));
    push("gesture_accuracy_amputee_std_pct", gg.map(|g| pct(g.amputee.std)), Some(9.8));
    let welch = gg.and_then(|g| g.welch.done());
    push("welch_t", welch.map(|t| t.t), None);
    push("welch_df", welch.map(|t| t.df), None);
    push("welch_p", welch.map(|t| t.p), None);

    let sig = r.subject_signature.done();
    push("subject_signature_loso_pct", sig.map(|c| pct(c.mean)), Some(REFERENCE_SIGNATURE_LOSO));
    let win = r.subject_window.done();
    push("subject_window_loso_pct", win.map(|c| pct(c.mean)), Some(REFERENCE_WINDOW_LOSO));
    push("subject_window_loso_min_pct", win.map(|c| pct(c.min)), Some(46.0));
    push("subject_window_loso_max_pct", win.map(|c| pct(c.max)), Some(78.0));
    push("subject_window_chance_pct", win.map(|c| pct(c.chance)), Some(66.0));

    for (variant, c) in [("primary", &r.primary), ("alternate", &r.alternate)] {
        let tag = if c.standardized { "standardized" } else { "raw" };
        push(
            &format!("pca_top3_variance_pct_{tag}"),
            Some(pct(c.top3_ratio)),
            (variant == "primary").then_some(REFERENCE_TOP3_VARIANCE),
        );
    }
    for (k, reference) in [(2, REFERENCE_COEFF_K2), (6, REFERENCE_COEFF_K6)] {
        let v = r
            .primary
            .cut_coefficients
            .iter()
            .find(|(kk, _)| *kk == k)
            .map(|(_, c)| *c);
        push(&format!("inconsistency_k{k}"), v, Some(reference));
    }
    rows
}
