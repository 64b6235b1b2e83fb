//! Axis-aligned decision trees shared by the forest and boosting
//! trainers.
//!
//! Splits minimize the summed squared error of the targets. For binary
//! 0/1 targets this is exactly half the weighted gini impurity
//! (`count * 2p(1-p) = 2 * sse`), so one criterion serves both the
//! classification trees (leaf = class probability) and the gradient
//! regression trees (leaf = Newton step `sum g / sum h`).
//!
//! Sparse rows are bucketed by nonzero presence: candidate values for a
//! feature are its stored nonzeros plus one implicit zero group, which
//! keeps split search proportional to stored entries rather than to the
//! full column count.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::Features;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: u32,
    pub threshold: f64,
    /// Child index, or -1 when this is a leaf.
    pub left: i32,
    pub right: i32,
    /// Leaf output (class probability or regression value).
    pub value: f64,
}

impl TreeNode {
    fn leaf(value: f64) -> Self {
        TreeNode {
            feature: 0,
            threshold: 0.0,
            left: -1,
            right: -1,
            value,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.left < 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, features: &Features, row: usize) -> f64 {
        let mut at = 0usize;
        loop {
            let node = &self.nodes[at];
            if node.is_leaf() {
                return node.value;
            }
            at = if features.get(row, node.feature) <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            let n = &nodes[at];
            if n.is_leaf() {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }
}

/// How a leaf turns its targets into an output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    /// Mean target; with 0/1 targets this is the class probability.
    Mean,
    /// `sum(gradient) / (sum(hessian) + eps)`, the Newton step used by
    /// boosting rounds.
    NewtonStep,
}

#[derive(Debug, Clone, Copy)]
pub struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features considered per split; `None` means all.
    pub features_per_split: Option<usize>,
    pub leaf: LeafKind,
}

/// Running (count, sum, sum of squares, hessian sum) of a row set.
#[derive(Debug, Clone, Copy, Default)]
struct Agg {
    cnt: f64,
    sum: f64,
    sum_sq: f64,
    sum_h: f64,
}

impl Agg {
    fn add(&mut self, t: f64, h: f64) {
        self.cnt += 1.0;
        self.sum += t;
        self.sum_sq += t * t;
        self.sum_h += h;
    }

    fn merge(&mut self, other: &Agg) {
        self.cnt += other.cnt;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.sum_h += other.sum_h;
    }

    fn minus(&self, other: &Agg) -> Agg {
        Agg {
            cnt: self.cnt - other.cnt,
            sum: self.sum - other.sum,
            sum_sq: self.sum_sq - other.sum_sq,
            sum_h: self.sum_h - other.sum_h,
        }
    }

    fn sse(&self) -> f64 {
        if self.cnt <= 0.0 {
            0.0
        } else {
            (self.sum_sq - self.sum * self.sum / self.cnt).max(0.0)
        }
    }

    fn leaf_value(&self, kind: LeafKind) -> f64 {
        match kind {
            LeafKind::Mean => {
                if self.cnt > 0.0 {
                    self.sum / self.cnt
                } else {
                    0.0
                }
            }
            LeafKind::NewtonStep => self.sum / (self.sum_h + 1e-16),
        }
    }
}

/// Grows one tree over `rows`. `targets` and `hessians` are indexed by
/// global row id; hessians default to 1.
pub fn grow_tree(
    features: &Features,
    rows: &[usize],
    targets: &[f64],
    hessians: Option<&[f64]>,
    params: &GrowParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let hess = |r: usize| hessians.map_or(1.0, |h| h[r]);
    let mut nodes: Vec<TreeNode> = vec![TreeNode::leaf(0.0)];
    // (node index, rows, depth)
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, rows.to_vec(), 0)];
    while let Some((at, node_rows, depth)) = stack.pop() {
        let mut agg = Agg::default();
        for &r in &node_rows {
            agg.add(targets[r], hess(r));
        }
        nodes[at].value = agg.leaf_value(params.leaf);
        if depth >= params.max_depth
            || node_rows.len() < 2 * params.min_leaf.max(1)
            || agg.sse() < 1e-12
        {
            continue;
        }
        let split = best_split(
            features,
            &node_rows,
            targets,
            hessians,
            &agg,
            params,
            rng.as_deref_mut(),
        );
        let Some((feature, threshold)) = split else { continue };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = node_rows
            .iter()
            .partition(|&&r| features.get(r, feature) <= threshold);
        if left_rows.is_empty() || right_rows.is_empty() {
            continue;
        }
        let left = nodes.len();
        nodes.push(TreeNode::leaf(0.0));
        let right = nodes.len();
        nodes.push(TreeNode::leaf(0.0));
        nodes[at].feature = feature;
        nodes[at].threshold = threshold;
        nodes[at].left = left as i32;
        nodes[at].right = right as i32;
        stack.push((left, left_rows, depth + 1));
        stack.push((right, right_rows, depth + 1));
    }
    Tree { nodes }
}

/// Picks the (feature, threshold) with the largest SSE reduction; the
/// first best in (feature asc, threshold asc) order wins ties.
fn best_split(
    features: &Features,
    node_rows: &[usize],
    targets: &[f64],
    hessians: Option<&[f64]>,
    node_agg: &Agg,
    params: &GrowParams,
    rng: Option<&mut ChaCha8Rng>,
) -> Option<(u32, f64)> {
    let hess = |r: usize| hessians.map_or(1.0, |h| h[r]);
    let n_cols = features.n_cols();
    let sampled: Option<Vec<u32>> = match (params.features_per_split, rng) {
        (Some(k), Some(rng)) if k < n_cols => {
            use rand::Rng;
            let mut set = std::collections::BTreeSet::new();
            while set.len() < k {
                set.insert(rng.random_range(0..n_cols) as u32);
            }
            Some(set.into_iter().collect())
        }
        _ => None,
    };

    // (value, target, hessian) triples per candidate feature.
    let mut per_feature: HashMap<u32, Vec<(f64, f64, f64)>> = HashMap::new();
    match features {
        Features::Sparse(_) => {
            let allowed: Option<std::collections::HashSet<u32>> =
                sampled.as_ref().map(|s| s.iter().copied().collect());
            for &r in node_rows {
                for (col, value) in features.row_nonzeros(r) {
                    debug_assert!(value >= 0.0, "sparse split search expects nonnegative values");
                    if allowed.as_ref().is_none_or(|a| a.contains(&col)) {
                        per_feature.entry(col).or_default().push((value, targets[r], hess(r)));
                    }
                }
            }
        }
        Features::Dense(_) => {
            let cols: Vec<u32> = match &sampled {
                Some(s) => s.clone(),
                None => (0..n_cols as u32).collect(),
            };
            for &col in &cols {
                let entry = per_feature.entry(col).or_default();
                for &r in node_rows {
                    entry.push((features.get(r, col), targets[r], hess(r)));
                }
            }
        }
    }

    let mut candidate_cols: Vec<u32> = per_feature.keys().copied().collect();
    candidate_cols.sort_unstable();

    let parent_sse = node_agg.sse();
    let min_leaf = params.min_leaf.max(1) as f64;
    let mut best: Option<(u32, f64)> = None;
    let mut best_improvement = 1e-12;
    for col in candidate_cols {
        let mut triples = per_feature.remove(&col).unwrap();
        // implicit zero group for rows without a stored entry
        if matches!(features, Features::Sparse(_)) && triples.len() < node_rows.len() {
            let mut nnz = Agg::default();
            for &(_, t, h) in &triples {
                nnz.add(t, h);
            }
            let zero = node_agg.minus(&nnz);
            scan_groups_with_zero(&triples, zero, parent_sse, node_agg, min_leaf, col, &mut best, &mut best_improvement);
            continue;
        }
        triples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        scan_groups(&triples, parent_sse, node_agg, min_leaf, col, &mut best, &mut best_improvement);
    }
    best
}

/// Collapses sorted triples into distinct-value groups and scans split
/// points between them.
fn scan_groups(
    sorted: &[(f64, f64, f64)],
    parent_sse: f64,
    node_agg: &Agg,
    min_leaf: f64,
    col: u32,
    best: &mut Option<(u32, f64)>,
    best_improvement: &mut f64,
) {
    let mut groups: Vec<(f64, Agg)> = Vec::new();
    for &(v, t, h) in sorted {
        match groups.last_mut() {
            Some((gv, agg)) if *gv == v => agg.add(t, h),
            _ => {
                let mut agg = Agg::default();
                agg.add(t, h);
                groups.push((v, agg));
            }
        }
    }
    scan_group_list(&groups, parent_sse, node_agg, min_leaf, col, best, best_improvement);
}

/// Same as [`scan_groups`], with an aggregated zero block merged in.
fn scan_groups_with_zero(
    triples: &[(f64, f64, f64)],
    zero: Agg,
    parent_sse: f64,
    node_agg: &Agg,
    min_leaf: f64,
    col: u32,
    best: &mut Option<(u32, f64)>,
    best_improvement: &mut f64,
) {
    let mut sorted = triples.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut groups: Vec<(f64, Agg)> = Vec::new();
    if zero.cnt > 0.0 {
        groups.push((0.0, zero));
    }
    for &(v, t, h) in &sorted {
        match groups.last_mut() {
            Some((gv, agg)) if *gv == v => agg.add(t, h),
            _ => {
                let mut agg = Agg::default();
                agg.add(t, h);
                groups.push((v, agg));
            }
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    scan_group_list(&groups, parent_sse, node_agg, min_leaf, col, best, best_improvement);
}

fn scan_group_list(
    groups: &[(f64, Agg)],
    parent_sse: f64,
    node_agg: &Agg,
    min_leaf: f64,
    col: u32,
    best: &mut Option<(u32, f64)>,
    best_improvement: &mut f64,
) {
    if groups.len() < 2 {
        return;
    }
    let mut left = Agg::default();
    for w in groups.windows(2) {
        left.merge(&w[0].1);
        let right = node_agg.minus(&left);
        if left.cnt < min_leaf || right.cnt < min_leaf {
            continue;
        }
        let improvement = parent_sse - left.sse() - right.sse();
        if improvement > *best_improvement {
            *best_improvement = improvement;
            *best = Some((col, (w[0].0 + w[1].0) / 2.0));
        }
    }
}
