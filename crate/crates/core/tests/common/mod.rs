//! Slow, obvious reimplementations used as test oracles. None of these share
//! code with the library.
#![allow(dead_code)]

use std::path::Path;

use myopattern::bundle::{write_bundle, EmgBundle};
use myopattern::synth::{synth_bundle, SynthConfig};
use rand::Rng;

// ---- features ----

pub fn mav(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += if x[i] < 0.0 { -x[i] } else { x[i] };
    }
    s / x.len() as f64
}

pub fn wl(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..x.len() {
        let d = x[i] - x[i - 1];
        s += if d < 0.0 { -d } else { d };
    }
    s
}

pub fn zc(x: &[f64], eps: f64) -> usize {
    let mut n = 0;
    for i in 0..x.len() - 1 {
        let opposite = (x[i] > 0.0 && x[i + 1] < 0.0) || (x[i] < 0.0 && x[i + 1] > 0.0);
        let d = x[i] - x[i + 1];
        if opposite && (if d < 0.0 { -d } else { d }) >= eps {
            n += 1;
        }
    }
    n
}

pub fn ssc(x: &[f64], eps: f64) -> usize {
    let mut n = 0;
    for i in 1..x.len() - 1 {
        let peak = x[i] > x[i - 1] && x[i] > x[i + 1];
        let trough = x[i] < x[i - 1] && x[i] < x[i + 1];
        if (peak || trough) && (x[i] - x[i - 1]) * (x[i] - x[i + 1]) >= eps {
            n += 1;
        }
    }
    n
}

// ---- Ward ----

#[derive(Debug, Clone, Copy)]
pub struct OracleMerge {
    pub lo: usize,
    pub hi: usize,
    pub height: f64,
    pub size: usize,
}

fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let d = points[0].len();
    let mut c = vec![0.0; d];
    for &m in members {
        for j in 0..d {
            c[j] += points[m][j];
        }
    }
    for v in c.iter_mut() {
        *v /= members.len() as f64;
    }
    c
}

/// Increase in within-cluster sum of squares when `a` and `b` are joined,
/// computed from the member points.
pub fn ward_cost(points: &[Vec<f64>], a: &[usize], b: &[usize]) -> f64 {
    let mut joined = a.to_vec();
    joined.extend_from_slice(b);
    sse(points, &joined) - sse(points, a) - sse(points, b)
}

pub fn sse(points: &[Vec<f64>], members: &[usize]) -> f64 {
    let c = centroid(points, members);
    let mut s = 0.0;
    for &m in members {
        for j in 0..c.len() {
            s += (points[m][j] - c[j]).powi(2);
        }
    }
    s
}

/// Brute-force Ward agglomeration. Every step recomputes every pairwise
/// cost from scratch; node ids are `n + step`.
pub fn ward_brute_force(points: &[Vec<f64>]) -> Vec<OracleMerge> {
    let n = points.len();
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut out = Vec::new();
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..active.len() {
            for j in i + 1..active.len() {
                let cost = ward_cost(points, &active[i].1, &active[j].1);
                let (lo, hi) = if active[i].0 < active[j].0 {
                    (active[i].0, active[j].0)
                } else {
                    (active[j].0, active[i].0)
                };
                let better = match best {
                    None => true,
                    Some((c, blo, bhi, _, _)) => cost < c || (cost == c && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((cost, lo, hi, i, j));
                }
            }
        }
        let (cost, lo, hi, i, j) = best.unwrap();
        let mut members = active[i].1.clone();
        members.extend_from_slice(&active[j].1);
        out.push(OracleMerge {
            lo,
            hi,
            height: (2.0 * cost).sqrt(),
            size: members.len(),
        });
        active.remove(j);
        active.remove(i);
        active.push((n + step, members));
    }
    out
}

// ---- linear algebra ----

pub type Mat = Vec<Vec<f64>>;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i][j] * m[i][j];
                }
            }
        }
        let mut scale = 0.0;
        for i in 0..n {
            scale += m[i][i] * m[i][i];
        }
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Sample covariance (n - 1) of the rows.
pub fn covariance(rows: &[Vec<f64>]) -> Mat {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j] / n as f64;
        }
    }
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    c
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &Mat, b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Mat = a.iter().zip(b).map(|(r, &v)| {
        let mut r = r.clone();
        r.push(v);
        r
    }).collect();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = m[r][n];
        for c in r + 1..n {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    x
}

/// LDA discriminant scores written out directly from class means, pooled
/// covariance with shrinkage, and empirical priors.
pub fn lda_scores_direct(rows: &[Vec<f64>], labels: &[usize], gamma: f64, x: &[f64]) -> Vec<f64> {
    let d = rows[0].len();
    let k = labels.iter().max().unwrap() + 1;
    let n = rows.len();
    let mut means = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (r, &c) in rows.iter().zip(labels) {
        counts[c] += 1;
        for j in 0..d {
            means[c][j] += r[j];
        }
    }
    for c in 0..k {
        for j in 0..d {
            means[c][j] /= counts[c] as f64;
        }
    }
    let mut s = vec![vec![0.0; d]; d];
    for (r, &c) in rows.iter().zip(labels) {
        for i in 0..d {
            for j in 0..d {
                s[i][j] += (r[i] - means[c][i]) * (r[j] - means[c][j]);
            }
        }
    }
    let mut trace = 0.0;
    for i in 0..d {
        for j in 0..d {
            s[i][j] /= (n - k) as f64;
        }
        trace += s[i][i];
    }
    for i in 0..d {
        for j in 0..d {
            s[i][j] *= 1.0 - gamma;
        }
        s[i][i] += gamma * trace / d as f64;
    }
    (0..k)
        .map(|c| {
            let w = gauss_solve(&s, &means[c]);
            let mut xw = 0.0;
            let mut mw = 0.0;
            for j in 0..d {
                xw += x[j] * w[j];
                mw += means[c][j] * w[j];
            }
            xw - 0.5 * mw + (counts[c] as f64 / n as f64).ln()
        })
        .collect()
}

// ---- statistics ----

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn t_pdf(t: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (1.0 + t * t / df).ln()).exp()
}

/// Two-sided p value of Student's t by Simpson quadrature of the density.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let a = t.abs();
    let steps = 20_000;
    let h = a / steps as f64;
    let mut s = t_pdf(0.0, df) + t_pdf(a, df);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * t_pdf(i as f64 * h, df);
    }
    let central = s * h / 3.0;
    2.0 * (0.5 - central)
}

pub fn normal_cdf(x: f64) -> f64 {
    // Simpson on the density from 0
    let steps = 20_000;
    let h = x.abs() / steps as f64;
    let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(x.abs());
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(i as f64 * h);
    }
    let half = s * h / 3.0;
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

// ---- fixtures ----

pub fn random_points<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect()
}

pub fn small_synth() -> SynthConfig {
    SynthConfig {
        n_intact: 3,
        n_amputee: 3,
        n_gestures: 3,
        repetitions: 6,
        n_channels: 3,
        ..SynthConfig::default()
    }
}

pub fn write_synth(dir: &Path, cfg: &SynthConfig) -> EmgBundle {
    let b = synth_bundle(cfg).unwrap();
    write_bundle(&b, dir).unwrap();
    b
}
