mod common;

use std::collections::BTreeMap;

use myopattern::classify::{lda_fit, ScatterStats};
use myopattern::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn two_gaussians(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = (i % 2) as u8;
        let mu = if c == 0 { -1.0 } else { 1.0 };
        rows.push(vec![mu + z.sample(rng)]);
        labels.push(c);
    }
    (rows, labels)
}

#[test]
fn one_dimensional_task_reaches_bayes_rate() {
    let bayes = common::normal_cdf(1.0);
    assert!((bayes - 0.8413).abs() < 1e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (train, ytrain) = two_gaussians(&mut rng, 10_000);
    let (test, ytest) = two_gaussians(&mut rng, 10_000);
    let model = lda_fit(&train, &ytrain, 0.0).unwrap();
    let pred = model.predict_many(&test).unwrap();
    let acc = pred.iter().zip(&ytest).filter(|(p, t)| p == t).count() as f64 / 10_000.0;
    assert!((acc - bayes).abs() <= 0.02, "accuracy {acc}, Bayes {bayes}");
}

fn random_task(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let z = Normal::new(0.0, 1.0).unwrap();
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let mixing: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        // unequal class sizes so priors matter
        let c = if i % 5 == 0 { 0 } else { i % k };
        let e: Vec<f64> = (0..d).map(|_| z.sample(rng)).collect();
        let row = (0..d)
            .map(|a| centers[c][a] + (0..d).map(|b| mixing[a][b] * e[b]).sum::<f64>() + 0.3 * e[a])
            .collect();
        rows.push(row);
        labels.push(c);
    }
    (rows, labels)
}

#[test]
fn scores_match_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..50 {
        let d = rng.random_range(1..6);
        let k = rng.random_range(2..5);
        let (rows, labels) = random_task(&mut rng, 60 + 10 * case, d, k);
        let gamma = [0.0, 1e-3, 0.2, 1.0][case % 4];
        let model = lda_fit(&rows, &labels, gamma).unwrap();
        for x in rows.iter().take(20) {
            let got = model.scores(x).unwrap();
            let want = common::lda_scores_direct(&rows, &labels, gamma, x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-8 * w.abs().max(1.0), "case {case}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn predictions_are_invariant_to_affine_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (rows, labels) = random_task(&mut rng, 300, 3, 3);
    let a = [[2.0, 0.5, 0.0], [0.0, 1.0, -0.3], [0.1, 0.0, 0.7]];
    let shift = [5.0, -2.0, 1.0];
    let mapped: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| (0..3).map(|i| (0..3).map(|j| a[i][j] * r[j]).sum::<f64>() + shift[i]).collect())
        .collect();
    let m1 = lda_fit(&rows, &labels, 0.0).unwrap();
    let m2 = lda_fit(&mapped, &labels, 0.0).unwrap();
    assert_eq!(m1.predict_many(&rows).unwrap(), m2.predict_many(&mapped).unwrap());
}

#[test]
fn merged_statistics_equal_direct_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (rows, _) = random_task(&mut rng, 97, 4, 2);
    let whole = ScatterStats::from_rows(4, rows.iter().map(|r| r.as_slice()));
    let mut parts = ScatterStats::empty(4);
    for chunk in rows.chunks(13) {
        parts.merge(&ScatterStats::from_rows(4, chunk.iter().map(|r| r.as_slice())));
    }
    assert_eq!(parts.n, whole.n);
    assert!((&parts.mean - &whole.mean).amax() < 1e-12);
    assert!((&parts.scatter - &whole.scatter).amax() < 1e-9);
}

#[test]
fn singular_covariance_without_shrinkage_is_reported() {
    // second feature is an exact copy of the first
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, i as f64]).collect();
    let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
    match lda_fit(&rows, &labels, 0.0) {
        Err(e @ Error::SingularCovariance { .. }) => assert!(e.to_string().contains("gamma")),
        other => panic!("expected singular covariance, got {other:?}"),
    }
    assert!(lda_fit(&rows, &labels, 1e-3).is_ok());
}

#[test]
fn priors_shift_the_boundary_toward_the_rare_class() {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..90 {
        rows.push(vec![-1.0 + (i % 3) as f64 - 1.0]);
        labels.push("common");
    }
    for i in 0..10 {
        rows.push(vec![1.0 + (i % 3) as f64 - 1.0]);
        labels.push("rare");
    }
    let m = lda_fit(&rows, &labels, 0.0).unwrap();
    // the midpoint between class means goes to the more frequent class
    assert_eq!(m.predict(&[0.0]).unwrap(), "common");
    assert_eq!(m.predict(&[2.0]).unwrap(), "rare");
}

#[test]
fn fit_errors() {
    let rows = vec![vec![1.0], vec![2.0]];
    assert!(matches!(lda_fit(&rows, &[0, 0], 0.1), Err(Error::TooFew(_))));
    assert!(matches!(lda_fit(&rows, &[0, 1], 0.1), Err(Error::TooFew(_))));
    assert!(lda_fit(&rows, &[0], 0.1).is_err());
    assert!(matches!(lda_fit(&rows, &[0, 1], 1.5), Err(Error::Config(_))));
    let empty: BTreeMap<u8, ScatterStats> = BTreeMap::new();
    assert!(myopattern::classify::LdaModel::from_stats(&empty, 0.1).is_err());
}
