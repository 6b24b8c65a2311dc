//! Constrained inference over a noisy prefix tree.
//!
//! Two constraint families hold in any exact prefix tree: counts never grow
//! going down a root-to-leaf path, and a node's count is at least the sum of
//! its children. Inference first fits every root-to-leaf path to the nearest
//! (least-squares) monotone sequence, averages each node's estimates over all
//! paths through it, and then trims children top-down whenever they
//! collectively exceed their parent.

use alloc::vec;
use alloc::vec::Vec;

use crate::tree::{NodeId, NoisyPrefixTree};

/// Noisy counts along one root-to-leaf path, ordered leaf first.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSequence {
    nodes: Vec<NodeId>,
    values: Vec<f64>,
}

impl PathSequence {
    /// The path ending at `leaf` (any non-root node works).
    pub fn from_node(tree: &NoisyPrefixTree, leaf: NodeId) -> Self {
        let mut nodes = Vec::with_capacity(tree.node(leaf).depth as usize);
        let mut at = leaf;
        while at != NodeId::ROOT {
            nodes.push(at);
            at = tree.node(at).parent.expect("non-root node has a parent");
        }
        let values = nodes.iter().map(|id| tree.node(*id).noisy_count).collect();
        PathSequence { nodes, values }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Least-squares non-decreasing fit by pool-adjacent-violators.
pub fn isotonic_fit(values: &[f64]) -> Vec<f64> {
    // (block mean, block size)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        let mut mean = v;
        let mut size = 1usize;
        while let Some(&(prev_mean, prev_size)) = blocks.last() {
            if prev_mean <= mean {
                break;
            }
            blocks.pop();
            let total = size + prev_size;
            mean = (prev_mean * prev_size as f64 + mean * size as f64) / total as f64;
            size = total;
        }
        blocks.push((mean, size));
    }
    let mut out = Vec::with_capacity(values.len());
    for (mean, size) in blocks {
        out.extend(core::iter::repeat_n(mean, size));
    }
    out
}

fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut sums = Vec::with_capacity(values.len() + 1);
    sums.push(0.0);
    for v in values {
        sums.push(sums.last().unwrap() + v);
    }
    sums
}

/// The same fit by the min–max formula
/// `L_m = min_{j ≥ m} max_{i ≤ j} mean[i, j]`. Quadratic; a cross-check for
/// [`isotonic_fit`].
pub fn isotonic_fit_min_max(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let sums = prefix_sums(values);
    let mean = |i: usize, j: usize| (sums[j + 1] - sums[i]) / (j - i + 1) as f64;
    // best[j] = max_{i ≤ j} mean[i, j]
    let best: Vec<f64> = (0..n)
        .map(|j| (0..=j).map(|i| mean(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut out = vec![0.0; n];
    let mut running = f64::INFINITY;
    for m in (0..n).rev() {
        running = running.min(best[m]);
        out[m] = running;
    }
    out
}

/// The max–min form `U_m = max_{i ≤ m} min_{j ≥ i} mean[i, j]`.
pub fn isotonic_fit_max_min(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let sums = prefix_sums(values);
    let mean = |i: usize, j: usize| (sums[j + 1] - sums[i]) / (j - i + 1) as f64;
    let worst: Vec<f64> = (0..n)
        .map(|i| (i..n).map(|j| mean(i, j)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut out = vec![0.0; n];
    let mut running = f64::NEG_INFINITY;
    for m in 0..n {
        running = running.max(worst[m]);
        out[m] = running;
    }
    out
}

/// Fills `consolidated` on every non-root node with the mean of its
/// path-wise isotonic estimates, one per leaf below it. Leaves include
/// branches that stopped before the full height.
pub fn consolidate(tree: &mut NoisyPrefixTree) {
    let n = tree.len();
    let mut sum = vec![0.0f64; n];
    let mut hits = vec![0u32; n];
    let leaves: Vec<NodeId> = tree.leaves().collect();
    for leaf in leaves {
        let path = PathSequence::from_node(tree, leaf);
        for (id, est) in path.nodes.iter().zip(isotonic_fit(&path.values)) {
            sum[id.index()] += est;
            hits[id.index()] += 1;
        }
    }
    for (i, node) in tree.nodes_mut().iter_mut().enumerate().skip(1) {
        debug_assert!(hits[i] > 0);
        node.consolidated = sum[i] / hits[i] as f64;
    }
}

/// Fills `consistent` top-down. Level-1 nodes keep their consolidated
/// estimate; below that, when the children of `w` sum to more than `c̄(w)`
/// the excess is taken off them in equal shares. Children are never raised.
pub fn consistent_estimates(tree: &mut NoisyPrefixTree) {
    let nodes = tree.nodes_mut();
    for i in 0..nodes.len() {
        if nodes[i].depth == 1 {
            nodes[i].consistent = nodes[i].consolidated;
        }
        if i == 0 || nodes[i].child_count() == 0 {
            continue;
        }
        // Arena order is breadth-first, so c̄ of node i is final here.
        let parent = nodes[i].consistent;
        let kids: Vec<NodeId> = nodes[i].children().collect();
        let kid_sum: f64 = kids.iter().map(|k| nodes[k.index()].consolidated).sum();
        let share = ((parent - kid_sum) / kids.len() as f64).min(0.0);
        for k in kids {
            let kid = &mut nodes[k.index()];
            kid.consistent = kid.consolidated + share;
        }
    }
}

/// Both inference passes.
pub fn infer(tree: &mut NoisyPrefixTree) {
    consolidate(tree);
    consistent_estimates(tree);
}

/// How far a tree's consistent estimates are from the two constraint families.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConsistencyReport {
    /// max over internal non-root nodes of `Σ c̄(children) − c̄(node)`.
    pub max_children_excess: f64,
    /// Number of child/parent pairs with `c̄(child) > c̄(parent)`.
    pub path_violations: usize,
}

impl ConsistencyReport {
    pub fn sum_constraint_holds(&self, tolerance: f64) -> bool {
        self.max_children_excess <= tolerance
    }
}

pub fn check_consistency(tree: &NoisyPrefixTree) -> ConsistencyReport {
    let mut report = ConsistencyReport {
        max_children_excess: f64::NEG_INFINITY,
        path_violations: 0,
    };
    for id in tree.ids().skip(1) {
        let node = tree.node(id);
        if node.is_leaf() {
            continue;
        }
        let kids = tree.children(id);
        let excess = kids.iter().map(|k| k.consistent).sum::<f64>() - node.consistent;
        report.max_children_excess = report.max_children_excess.max(excess);
        report.path_violations += kids.iter().filter(|k| k.consistent > node.consistent).count();
    }
    if report.max_children_excess == f64::NEG_INFINITY {
        report.max_children_excess = 0.0;
    }
    report
}
