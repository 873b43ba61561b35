use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::{best_split, ThresholdRule, TrainingMatrix};
use crate::error::{Error, Result};
use crate::features::{bin_continuous, Feature, Sample};

/// Growth limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub max_depth: u8,
    /// Minimum leaf size as a fraction of the root sample count.
    pub min_leaf_fraction: f64,
    /// Quantile bins for the binned features.
    pub bin_count: usize,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            max_depth: 5,
            min_leaf_fraction: 0.001,
            bin_count: 32,
        }
    }
}

impl Constraints {
    pub fn validate(&self) -> Result<()> {
        // 0 means unconstrained: `min_leaf` still clamps to one sample.
        if !(self.min_leaf_fraction >= 0.0 && self.min_leaf_fraction < 1.0) {
            return Err(Error::domain(format!(
                "min leaf fraction {} outside [0, 1)",
                self.min_leaf_fraction
            )));
        }
        if self.bin_count < 2 {
            return Err(Error::domain("bin count must be at least 2"));
        }
        Ok(())
    }

    pub fn min_leaf(&self, root_total: usize) -> usize {
        ((self.min_leaf_fraction * root_total as f64).ceil() as usize).max(1)
    }
}

/// `x < threshold` goes left, everything else right.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
}

impl Split {
    pub fn goes_left(&self, x: f64) -> bool {
        x < self.threshold
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub split: Option<Split>,
    pub left: Option<Box<TreeNode>>,
    pub right: Option<Box<TreeNode>>,
    /// `[not_split, split]` training counts reaching this node.
    pub counts: [u64; 2],
    pub node_depth: u8,
    /// `true` when the majority class is "split"; ties resolve to not-split.
    pub majority: bool,
    pub accuracy: f64,
    pub coverage: f64,
}

impl TreeNode {
    fn leaf(counts: (u64, u64), node_depth: u8, root_total: u64) -> Self {
        let total = counts.0 + counts.1;
        let majority = counts.1 > counts.0;
        let hits = if majority { counts.1 } else { counts.0 };
        TreeNode {
            split: None,
            left: None,
            right: None,
            counts: [counts.0, counts.1],
            node_depth,
            majority,
            accuracy: hits as f64 / total as f64,
            coverage: total as f64 / root_total as f64,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts[0] + self.counts[1]
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn children(&self) -> Option<(&TreeNode, &TreeNode)> {
        Some((self.left.as_deref()?, self.right.as_deref()?))
    }

    /// Gini impurity of the node's own counts.
    pub fn gini(&self) -> f64 {
        super::gini_impurity((self.counts[0], self.counts[1])).unwrap_or(0.0)
    }
}

/// Position of a node: its level and its index within the level, where the
/// left child of `(d, p)` is `(d + 1, 2p)` and the right child `(d + 1, 2p + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub depth: u8,
    pub position: u64,
}

impl NodeRef {
    pub const ROOT: NodeRef = NodeRef {
        depth: 0,
        position: 0,
    };

    pub fn left(self) -> NodeRef {
        NodeRef {
            depth: self.depth + 1,
            position: self.position * 2,
        }
    }

    pub fn right(self) -> NodeRef {
        NodeRef {
            depth: self.depth + 1,
            position: self.position * 2 + 1,
        }
    }

    /// Branch directions from the root, `true` meaning left.
    pub fn path(self) -> impl Iterator<Item = bool> {
        (0..self.depth)
            .rev()
            .map(move |l| (self.position >> l) & 1 == 0)
    }
}

/// Grows a tree on `matrix` under `constraints`.
pub fn grow(matrix: &TrainingMatrix, constraints: &Constraints) -> Result<TreeNode> {
    if matrix.is_empty() {
        return Err(Error::domain("cannot grow a tree on an empty sample set"));
    }
    constraints.validate()?;
    let min_leaf = constraints.min_leaf(matrix.len());
    let all: Vec<usize> = (0..matrix.len()).collect();
    Ok(grow_node(
        matrix,
        &all,
        0,
        matrix.len() as u64,
        min_leaf,
        constraints.max_depth,
    ))
}

fn grow_node(
    matrix: &TrainingMatrix,
    indices: &[usize],
    depth: u8,
    root_total: u64,
    min_leaf: usize,
    max_depth: u8,
) -> TreeNode {
    let mut node = TreeNode::leaf(matrix.counts(indices), depth, root_total);
    if depth >= max_depth {
        return node;
    }
    let Some(cand) = best_split(matrix, indices, min_leaf) else {
        return node;
    };
    let split = Split {
        feature: cand.feature,
        threshold: cand.threshold,
    };
    let column = &matrix.columns[cand.feature];
    let (l, r): (Vec<usize>, Vec<usize>) =
        indices.iter().partition(|&&i| split.goes_left(column[i]));
    node.split = Some(split);
    node.left = Some(Box::new(grow_node(
        matrix,
        &l,
        depth + 1,
        root_total,
        min_leaf,
        max_depth,
    )));
    node.right = Some(Box::new(grow_node(
        matrix,
        &r,
        depth + 1,
        root_total,
        min_leaf,
        max_depth,
    )));
    node
}

/// Result of routing one feature vector through a tree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub split: bool,
    pub accuracy: f64,
    pub coverage: f64,
    pub leaf: NodeRef,
}

/// A trained per-CU-depth model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub cu_depth: u8,
    pub constraints: Constraints,
    /// Bin edges applied to binned features during training.
    pub bin_edges: Vec<(Feature, Vec<f64>)>,
    /// Sequence ids the training samples came from.
    pub trained_on: Vec<String>,
    pub root: TreeNode,
}

impl DecisionTree {
    pub fn root_total(&self) -> u64 {
        self.root.total()
    }

    pub fn node(&self, at: NodeRef) -> Option<&TreeNode> {
        let mut node = &self.root;
        for left in at.path() {
            let (l, r) = node.children()?;
            node = if left { l } else { r };
        }
        Some(node)
    }

    /// Every node with its position, breadth-first and left to right.
    pub fn nodes_bfs(&self) -> Vec<(NodeRef, &TreeNode)> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([(NodeRef::ROOT, &self.root)]);
        while let Some((at, n)) = queue.pop_front() {
            out.push((at, n));
            if let Some((l, r)) = n.children() {
                queue.push_back((at.left(), l));
                queue.push_back((at.right(), r));
            }
        }
        out
    }

    /// Routes a raw feature row (indexed by feature id) to a leaf.
    pub fn predict(&self, row: &[f64]) -> Prediction {
        let mut node = &self.root;
        let mut at = NodeRef::ROOT;
        while let (Some(split), Some((l, r))) = (node.split, node.children()) {
            if split.goes_left(row[split.feature]) {
                node = l;
                at = at.left();
            } else {
                node = r;
                at = at.right();
            }
        }
        Prediction {
            split: node.majority,
            accuracy: node.accuracy,
            coverage: node.coverage,
            leaf: at,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("tree serializes");
        std::fs::write(path, text + "\n").map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
    }
}

/// Grows the model for one CU depth from samples of that depth. Binned
/// features are quantile-binned first; their thresholds land on bin edges so
/// the tree routes raw values exactly as it routed the binned training data.
pub fn grow_tree<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    cu_depth: u8,
    constraints: &Constraints,
) -> Result<DecisionTree> {
    let samples: Vec<&Sample> = samples.into_iter().collect();
    if samples.is_empty() {
        return Err(Error::domain(format!("no samples at CU depth {cu_depth}")));
    }
    if let Some(s) = samples.iter().find(|s| s.depth != cu_depth) {
        return Err(Error::domain(format!(
            "sample at depth {} passed to the depth-{cu_depth} model",
            s.depth
        )));
    }
    let mut columns = Vec::with_capacity(Feature::ALL.len());
    let mut rules = Vec::with_capacity(Feature::ALL.len());
    let mut bin_edges = Vec::new();
    for f in Feature::ALL {
        let raw: Vec<f64> = samples.iter().map(|s| s.features.get(f)).collect();
        if f.is_binned() {
            let b = bin_continuous(&raw, constraints.bin_count)?;
            bin_edges.push((f, b.edges));
            columns.push(b.values);
            rules.push(ThresholdRule::UpperValue);
        } else {
            columns.push(raw);
            rules.push(ThresholdRule::Midpoint);
        }
    }
    let labels = samples.iter().map(|s| s.label).collect();
    let matrix = TrainingMatrix::with_rules(columns, rules, labels)?;
    let root = grow(&matrix, constraints)?;
    let mut trained_on: Vec<String> = samples
        .iter()
        .map(|s| s.provenance.sequence_id.clone())
        .collect();
    trained_on.sort();
    trained_on.dedup();
    Ok(DecisionTree {
        cu_depth,
        constraints: *constraints,
        bin_edges,
        trained_on,
        root,
    })
}
