//! Ward agglomerative clustering, inconsistency coefficients and flat cuts.
//!
//! Node ids follow the usual linkage-matrix convention: leaves are `0..n`,
//! the cluster created by merge `t` is node `n + t`.
//!
//! Heights are reported as `sqrt(2 * delta)` where `delta` is the increase in
//! within-cluster sum of squares caused by the merge, so two singletons merge
//! at their Euclidean distance.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

impl Merge {
    /// Increase in total within-cluster sum of squares.
    pub fn delta(&self) -> f64 {
        0.5 * self.height * self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
    pub labels: Vec<String>,
}

impl Dendrogram {
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_leaves {
            return Err(Error::Dimension {
                expected: self.n_leaves,
                actual: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.n_leaves
    }

    pub fn node_size(&self, node: usize) -> usize {
        if self.is_leaf(node) {
            1
        } else {
            self.merges[node - self.n_leaves].size
        }
    }

    /// Leaves under `node`, ascending.
    pub fn leaves_of(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if self.is_leaf(x) {
                out.push(x);
            } else {
                let m = &self.merges[x - self.n_leaves];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.merges.windows(2).all(|w| w[0].height <= w[1].height)
    }

    /// Index of the merge that joins k clusters into k - 1.
    pub fn merge_for_clusters(&self, k: usize) -> Option<usize> {
        (k >= 2 && k <= self.n_leaves).then(|| self.n_leaves - k)
    }

    pub fn write_merges_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,left,right,height,size")?;
        for (t, m) in self.merges.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                t + 1,
                self.node_name(m.left),
                self.node_name(m.right),
                m.height,
                m.size
            )?;
        }
        out.flush()
    }

    fn node_name(&self, node: usize) -> String {
        if self.is_leaf(node) {
            self.labels[node].clone()
        } else {
            format!("n{node}")
        }
    }

    /// Graphviz rendering: leaves are boxes named by label, internal nodes
    /// carry their merge height.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph dendrogram {\n  rankdir=LR;\n");
        for (i, label) in self.labels.iter().enumerate() {
            let _ = writeln!(s, "  leaf{i} [shape=box, label=\"{}\"];", escape(label));
        }
        for (t, m) in self.merges.iter().enumerate() {
            let id = self.n_leaves + t;
            let _ = writeln!(
                s,
                "  n{id} [shape=point, xlabel=\"h={:.4}\", height={:.6}];",
                m.height, m.height
            );
            for child in [m.left, m.right] {
                let name = if self.is_leaf(child) {
                    format!("leaf{child}")
                } else {
                    format!("n{child}")
                };
                let _ = writeln!(s, "  n{id} -> {name};");
            }
        }
        s.push_str("}\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    if points.len() < 2 {
        return Err(Error::TooFew(format!(
            "clustering needs at least 2 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("point {i}")));
        }
    }
    Ok(dim)
}

fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
}

/// Ward's minimum-variance linkage.
///
/// Pairwise merge costs are kept in a dense matrix and updated with the
/// Lance-Williams recurrence; ties go to the lexicographically smallest
/// `(lower node id, higher node id)`.
pub fn ward_linkage(points: &[Vec<f64>]) -> Result<Dendrogram> {
    check_points(points)?;
    let n = points.len();

    // cost[i][j] = delta of merging the clusters currently held in slots i, j
    let mut cost = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = half_sq_dist(&points[i], &points[j]);
            cost[i][j] = d;
            cost[j][i] = d;
        }
    }
    let mut node = (0..n).collect::<Vec<_>>();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);

    for t in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let (lo, hi) = if node[i] < node[j] {
                    (node[i], node[j])
                } else {
                    (node[j], node[i])
                };
                let c = cost[i][j];
                let better = match best {
                    None => true,
                    Some((bc, blo, bhi, _, _)) => (c, lo, hi) < (bc, blo, bhi),
                };
                if better {
                    best = Some((c, lo, hi, i, j));
                }
            }
        }
        let (delta, lo, hi, a, b) = best.expect("at least two active clusters");
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let updated = ((na + nk) * cost[a][k] + (nb + nk) * cost[b][k] - nk * delta)
                / (na + nb + nk);
            cost[a][k] = updated;
            cost[k][a] = updated;
        }
        active[b] = false;
        size[a] += size[b];
        node[a] = n + t;
        merges.push(Merge {
            left: lo,
            right: hi,
            height: (2.0 * delta.max(0.0)).sqrt(),
            size: size[a],
        });
    }

    Ok(Dendrogram {
        n_leaves: n,
        merges,
        labels: (0..n).map(|i| i.to_string()).collect(),
    })
}

/// Total squared deviation of all points from their common centroid.
pub fn total_sse(points: &[Vec<f64>]) -> f64 {
    let n = points.len() as f64;
    let dim = points.first().map_or(0, |p| p.len());
    let mut c = vec![0.0; dim];
    for p in points {
        for (a, v) in c.iter_mut().zip(p) {
            *a += v / n;
        }
    }
    points
        .iter()
        .map(|p| p.iter().zip(&c).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyRow {
    pub height: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyReport {
    pub depth: usize,
    pub rows: Vec<InconsistencyRow>,
}

impl InconsistencyReport {
    /// Merge indices sorted by decreasing coefficient (ties: later merge first).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        idx.sort_by(|&a, &b| {
            self.rows[b]
                .coefficient
                .total_cmp(&self.rows[a].coefficient)
                .then(b.cmp(&a))
        });
        idx
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,height,mean,std,count,coefficient")?;
        for (t, r) in self.rows.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                t + 1,
                r.height,
                r.mean,
                r.std,
                r.count,
                r.coefficient
            )?;
        }
        out.flush()
    }
}

/// Inconsistency coefficient of every merge: its height standardized against
/// the heights of the merges up to `depth` levels below it (itself included),
/// using the sample standard deviation.
pub fn inconsistency(dendro: &Dendrogram, depth: usize) -> Result<InconsistencyReport> {
    if depth < 1 {
        return Err(Error::Config("inconsistency depth must be >= 1".into()));
    }
    let n = dendro.n_leaves;
    let mut rows = Vec::with_capacity(dendro.merges.len());
    for (t, m) in dendro.merges.iter().enumerate() {
        let mut heights = Vec::new();
        let mut queue = VecDeque::from([(n + t, 1usize)]);
        while let Some((id, level)) = queue.pop_front() {
            let merge = &dendro.merges[id - n];
            heights.push(merge.height);
            if level < depth {
                for child in [merge.left, merge.right] {
                    if child >= n {
                        queue.push_back((child, level + 1));
                    }
                }
            }
        }
        let count = heights.len();
        let mean = heights.iter().sum::<f64>() / count as f64;
        let std = if count < 2 {
            0.0
        } else {
            (heights.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        };
        let coefficient = if std > 0.0 { (m.height - mean) / std } else { 0.0 };
        rows.push(InconsistencyRow {
            height: m.height,
            mean,
            std,
            count,
            coefficient,
        });
    }
    Ok(InconsistencyReport { depth, rows })
}

/// Flat `k`-cluster solution: undo the last `k - 1` merges. Cluster labels
/// start at 1 and are numbered by first leaf appearance.
pub fn cut(dendro: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    let n = dendro.n_leaves;
    if k < 1 || k > n {
        return Err(Error::Config(format!("cut into {k} clusters of {n} leaves")));
    }
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (t, m) in dendro.merges.iter().take(n - k).enumerate() {
        let id = n + t;
        let l = find(&mut parent, m.left);
        let r = find(&mut parent, m.right);
        parent[l] = id;
        parent[r] = id;
    }
    let mut labels = vec![0; n];
    let mut seen: Vec<usize> = Vec::new();
    for (leaf, label) in labels.iter_mut().enumerate() {
        let root = find(&mut parent, leaf);
        *label = match seen.iter().position(|&r| r == root) {
            Some(p) => p + 1,
            None => {
                seen.push(root);
                seen.len()
            }
        };
    }
    Ok(labels)
}

pub fn write_cut_csv<W: Write>(
    mut out: W,
    labels: &[String],
    clusters: &[usize],
) -> std::io::Result<()> {
    writeln!(out, "subject,cluster")?;
    for (l, c) in labels.iter().zip(clusters) {
        writeln!(out, "{l},{c}")?;
    }
    out.flush()
}
