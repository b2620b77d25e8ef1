mod common;

use std::collections::BTreeMap;

use myopattern::bundle::{segment_bundle, EmgBundle, Group};
use myopattern::classify::{
    cv_gesture, cv_subject_group_signature, cv_subject_group_window, lda_fit, GestureCvConfig, Scheme,
    Scoring, DEFAULT_GAMMA,
};
use myopattern::features::{extract, FeatureTensor, Thresholds, WindowingConfig};
use myopattern::signatures::{build_signatures, Standardizer};
use myopattern::synth::{synth_bundle, SynthConfig};
use myopattern::Error;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(cfg: &SynthConfig) -> (EmgBundle, FeatureTensor) {
    let b = synth_bundle(cfg).unwrap();
    let t = extract(&b, &segment_bundle(&b), &WindowingConfig::default(), &Thresholds::default()).unwrap();
    (b, t)
}

fn groups_of(b: &EmgBundle) -> BTreeMap<String, Group> {
    b.manifest.subjects.iter().map(|s| (s.id.clone(), s.group)).collect()
}

fn windows_where(t: &FeatureTensor, keep: impl Fn(&str, u16, u32) -> bool) -> Vec<(Vec<f64>, u16)> {
    let mut out = Vec::new();
    for (s, e) in t.segments.iter().enumerate() {
        if keep(&e.subject_id, e.gesture_id, e.repetition) {
            for w in t.segment_windows(s) {
                out.push((w.to_vec(), e.gesture_id));
            }
        }
    }
    out
}

#[test]
fn gesture_folds_equal_refits_on_raw_windows() {
    let (_, t) = setup(&common::small_synth());
    let cfg = GestureCvConfig::new(vec![1, 2, 3]);
    let reports = cv_gesture(&t, &cfg).unwrap();
    assert_eq!(reports.len(), 6);
    for r in &reports {
        assert_eq!(r.scheme, Scheme::Gesture);
        assert_eq!(r.folds.len(), 6);
        r.check_hygiene().unwrap();
        let subject = r.subject.clone().unwrap();
        for (i, f) in r.folds.iter().enumerate() {
            let rep = i as u32 + 1;
            assert_eq!(f.held_out, format!("r{rep}"));
            assert_eq!(f.test_ids, vec![format!("{subject}/r{rep}")]);
            assert!(!f.train_ids.contains(&f.test_ids[0]));
            assert_eq!(f.train_ids.len(), 5);

            let train = windows_where(&t, |s, _, r| s == subject && r != rep);
            let test = windows_where(&t, |s, _, r| s == subject && r == rep);
            let rows: Vec<Vec<f64>> = train.iter().map(|(x, _)| x.clone()).collect();
            let labels: Vec<u16> = train.iter().map(|(_, y)| *y).collect();
            let model = lda_fit(&rows, &labels, DEFAULT_GAMMA).unwrap();
            let correct = test.iter().filter(|(x, y)| model.predict(x).unwrap() == *y).count();
            assert_eq!(f.n_test, test.len());
            assert_eq!(f.n_correct, correct, "{subject} r{rep}");
        }
    }
}

#[test]
fn majority_vote_scores_one_decision_per_repetition() {
    let (_, t) = setup(&common::small_synth());
    let cfg = GestureCvConfig {
        scoring: Scoring::MajorityVote,
        ..GestureCvConfig::new(vec![1, 2, 3])
    };
    for r in cv_gesture(&t, &cfg).unwrap() {
        for f in &r.folds {
            assert_eq!(f.n_test, 3);
        }
    }
}

#[test]
fn gesture_cv_needs_every_repetition() {
    let (_, mut t) = setup(&common::small_synth());
    t.segments.retain(|e| !(e.subject_id == "S1" && e.gesture_id == 2 && e.repetition == 4));
    let err = cv_gesture(&t, &GestureCvConfig::new(vec![1, 2, 3])).unwrap_err();
    assert!(matches!(err, Error::Coverage(_)), "{err}");
    assert!(err.to_string().contains("S1"));
}

#[test]
fn shuffled_gesture_labels_fall_to_chance() {
    let (_, mut t) = setup(&SynthConfig {
        n_intact: 4,
        n_amputee: 2,
        n_gestures: 3,
        n_channels: 3,
        ..SynthConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let subjects = t.subjects();
    for s in subjects {
        let idx: Vec<usize> = (0..t.segments.len()).filter(|&i| t.segments[i].subject_id == s).collect();
        let mut labels: Vec<u16> = idx.iter().map(|&i| t.segments[i].gesture_id).collect();
        labels.shuffle(&mut rng);
        for (&i, l) in idx.iter().zip(labels) {
            t.segments[i].gesture_id = l;
        }
    }
    let reports = cv_gesture(&t, &GestureCvConfig::new(vec![1, 2, 3]));
    // shuffling can leave a (repetition, gesture) cell empty; then coverage fails
    if let Ok(reports) = reports {
        let mean = reports.iter().map(|r| r.mean).sum::<f64>() / reports.len() as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.15, "mean {mean}");
    }
}

#[test]
fn signature_loso_refits_with_in_fold_standardization() {
    let (b, t) = setup(&common::small_synth());
    let (_, sigs) = build_signatures(&t).unwrap();
    let g = groups_of(&b);
    let groups: Vec<Group> = sigs.iter().map(|s| g[&s.subject_id]).collect();
    let r = cv_subject_group_signature(&sigs, &groups, DEFAULT_GAMMA, true).unwrap();
    assert_eq!(r.folds.len(), sigs.len());
    r.check_hygiene().unwrap();
    assert!((r.chance - 0.5).abs() < 1e-12);
    for (held, f) in r.folds.iter().enumerate() {
        assert_eq!(f.held_out, sigs[held].subject_id);
        assert_eq!(f.test_ids, vec![sigs[held].subject_id.clone()]);
        assert_eq!(f.train_ids.len(), sigs.len() - 1);
        assert!(!f.train_ids.contains(&sigs[held].subject_id));

        let train: Vec<usize> = (0..sigs.len()).filter(|&i| i != held).collect();
        let raw: Vec<&[f64]> = train.iter().map(|&i| sigs[i].vector.as_slice()).collect();
        let st = Standardizer::fit(&raw).unwrap();
        let rows: Vec<Vec<f64>> = raw.iter().map(|x| st.apply(x).unwrap()).collect();
        let labels: Vec<Group> = train.iter().map(|&i| groups[i]).collect();
        let model = lda_fit(&rows, &labels, DEFAULT_GAMMA).unwrap();
        let pred = model.predict(&st.apply(&sigs[held].vector).unwrap()).unwrap();
        assert_eq!(f.n_correct, usize::from(pred == groups[held]));
    }
}

#[test]
fn window_loso_refits_on_raw_windows() {
    let (b, t) = setup(&common::small_synth());
    let g = groups_of(&b);
    let r = cv_subject_group_window(&t, &g, DEFAULT_GAMMA).unwrap();
    assert_eq!(r.folds.len(), 6);
    r.check_hygiene().unwrap();
    let total_windows = t.n_windows() as f64;
    let intact_windows: usize = t.segments.iter().filter(|e| g[&e.subject_id] == Group::Intact).map(|e| e.n_windows).sum();
    let chance = (intact_windows as f64 / total_windows).max(1.0 - intact_windows as f64 / total_windows);
    // chance reflects subject counts, not window counts
    assert!((r.chance - 0.5).abs() < 1e-12, "{} vs window share {chance}", r.chance);
    for f in &r.folds {
        let held = f.held_out.clone();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut test = Vec::new();
        for (s, e) in t.segments.iter().enumerate() {
            for w in t.segment_windows(s) {
                if e.subject_id == held {
                    test.push(w.to_vec());
                } else {
                    rows.push(w.to_vec());
                    labels.push(g[&e.subject_id]);
                }
            }
        }
        let model = lda_fit(&rows, &labels, DEFAULT_GAMMA).unwrap();
        let truth = g[&held];
        let correct = test.iter().filter(|x| model.predict(x).unwrap() == truth).count();
        assert_eq!(f.n_test, test.len());
        assert_eq!(f.n_correct, correct, "fold {held}");
    }
}

#[test]
fn group_cv_needs_two_subjects_per_group() {
    let (b, t) = setup(&SynthConfig {
        n_intact: 3,
        n_amputee: 1,
        n_gestures: 2,
        ..SynthConfig::default()
    });
    let g = groups_of(&b);
    assert!(matches!(cv_subject_group_window(&t, &g, DEFAULT_GAMMA), Err(Error::TooFew(_))));
    let (_, sigs) = build_signatures(&t).unwrap();
    let groups: Vec<Group> = sigs.iter().map(|s| g[&s.subject_id]).collect();
    assert!(matches!(
        cv_subject_group_signature(&sigs, &groups, DEFAULT_GAMMA, true),
        Err(Error::TooFew(_))
    ));
}

#[test]
fn intact_subjects_are_classified_better_than_amputee_subjects() {
    let (b, t) = setup(&SynthConfig {
        n_intact: 6,
        n_amputee: 4,
        ..SynthConfig::default()
    });
    let g = groups_of(&b);
    let reports = cv_gesture(&t, &GestureCvConfig::new((1..=6).collect())).unwrap();
    let mean_of = |grp: Group| {
        let v: Vec<f64> = reports
            .iter()
            .filter(|r| g[r.subject.as_ref().unwrap()] == grp)
            .map(|r| r.mean)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (intact, amputee) = (mean_of(Group::Intact), mean_of(Group::Amputee));
    assert!(intact > amputee, "intact {intact} amputee {amputee}");
}

#[test]
fn folds_csv_rows() {
    let (_, t) = setup(&common::small_synth());
    let reports = cv_gesture(&t, &GestureCvConfig::new(vec![1, 2, 3])).unwrap();
    let mut out = Vec::new();
    reports[0].write_folds_csv(&mut out, true).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().nth(1).unwrap().starts_with("gesture,A1,r1,"));
}
