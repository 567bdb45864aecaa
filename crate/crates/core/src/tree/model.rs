use serde::{Deserialize, Serialize};

use super::criterion::Criterion;
use super::split::{PathStep, SplitFunction, SplitKind};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Split {
        split: SplitFunction,
        children: [usize; 2],
    },
    /// `None` until the labeling pass.
    Leaf { label: Option<u32> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub depth: u32,
    pub parent: Option<usize>,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

/// Binary decision tree stored as an arena; node 0 is the root at depth 0
/// and children get consecutive ids in creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl Default for DecisionTree {
    fn default() -> Self {
        Self::new()
    }
}

impl DecisionTree {
    /// A single unlabeled leaf.
    pub fn new() -> Self {
        DecisionTree {
            nodes: vec![Node {
                id: 0,
                depth: 0,
                parent: None,
                kind: NodeKind::Leaf { label: None },
            }],
        }
    }

    pub const ROOT: usize = 0;

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect()
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes.len() - self.leaves().len()
    }

    pub fn depth(&self) -> u32 {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Turns `leaf` into an internal node; returns `[left, right]` ids.
    pub fn split_leaf(&mut self, leaf: usize, split: SplitFunction) -> Result<[usize; 2]> {
        let node = self
            .nodes
            .get(leaf)
            .ok_or_else(|| Error::invalid(format!("no node {leaf}")))?;
        if !node.is_leaf() {
            return Err(Error::invalid(format!("node {leaf} is not a leaf")));
        }
        let depth = node.depth + 1;
        let children = [self.nodes.len(), self.nodes.len() + 1];
        for &id in &children {
            self.nodes.push(Node {
                id,
                depth,
                parent: Some(leaf),
                kind: NodeKind::Leaf { label: None },
            });
        }
        self.nodes[leaf].kind = NodeKind::Split { split, children };
        Ok(children)
    }

    pub fn set_label(&mut self, leaf: usize, label: u32) -> Result<()> {
        match &mut self.nodes.get_mut(leaf).map(|n| &mut n.kind) {
            Some(NodeKind::Leaf { label: l }) => {
                *l = Some(label);
                Ok(())
            }
            _ => Err(Error::invalid(format!("node {leaf} is not a leaf"))),
        }
    }

    /// Root-to-node sequence of (split id, branch) pairs.
    pub fn path(&self, id: usize) -> Vec<PathStep> {
        let mut steps = Vec::new();
        let mut cur = id;
        while let Some(parent) = self.nodes[cur].parent {
            if let NodeKind::Split { split, children } = &self.nodes[parent].kind {
                let branch = u8::from(children[1] == cur);
                steps.push(PathStep {
                    split: split.id,
                    branch,
                });
            }
            cur = parent;
        }
        steps.reverse();
        steps
    }

    /// The leaf reached by `x`.
    pub fn route(&self, x: &[f64]) -> usize {
        let mut cur = Self::ROOT;
        while let NodeKind::Split { split, children } = &self.nodes[cur].kind {
            cur = children[split.eval(x) as usize];
        }
        cur
    }

    pub fn predict(&self, x: &[f64]) -> Result<u32> {
        let leaf = self.route(x);
        match self.nodes[leaf].kind {
            NodeKind::Leaf { label: Some(y) } => Ok(y),
            _ => Err(Error::UnlabeledTree(leaf)),
        }
    }

    /// Row indices reaching each node id (empty for internal nodes).
    pub fn leaf_rows(&self, data: &LabeledDataset) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.nodes.len()];
        for (i, (x, _)) in data.rows().enumerate() {
            rows[self.route(x)].push(i);
        }
        rows
    }

    /// Fraction of rows of `data` misclassified.
    pub fn tree_error(&self, data: &LabeledDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("error of an empty dataset is undefined"));
        }
        let mut wrong = 0usize;
        for (x, y) in data.rows() {
            if self.predict(x)? != y {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / data.len() as f64)
    }

    pub fn accuracy(&self, data: &LabeledDataset) -> Result<f64> {
        Ok(1.0 - self.tree_error(data)?)
    }

    /// `Σ_ℓ w(ℓ)·G(q(ℓ))` with empirical leaf weights.
    pub fn potential(&self, data: &LabeledDataset, criterion: Criterion) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("potential of an empty dataset is undefined"));
        }
        let n = data.len() as f64;
        let mut total = 0.0;
        for rows in self.leaf_rows(data) {
            if rows.is_empty() {
                continue;
            }
            let mut counts = vec![0.0; data.n_labels()];
            for &r in &rows {
                counts[data.label(r) as usize] += 1.0;
            }
            total += rows.len() as f64 / n * criterion.of_counts(&counts);
        }
        Ok(total)
    }

    /// Labels every leaf with its exact majority label on `data`, ties to the
    /// lowest label; empty leaves get label 0.
    pub fn label_by_majority(&mut self, data: &LabeledDataset) {
        let rows = self.leaf_rows(data);
        for leaf in self.leaves() {
            let mut counts = vec![0usize; data.n_labels()];
            for &r in &rows[leaf] {
                counts[data.label(r) as usize] += 1;
            }
            let label = argmax_lowest(&counts);
            self.set_label(leaf, label as u32).expect("leaf id");
        }
    }

    pub fn to_records(&self) -> Vec<NodeRecord> {
        self.nodes
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Split { split, children } => {
                    let (feature, block, threshold) = match &split.kind {
                        SplitKind::Threshold { feature, threshold } => {
                            (Some(*feature), None, *threshold)
                        }
                        SplitKind::BlockAverage { features, threshold } => {
                            (None, Some(features.clone()), *threshold)
                        }
                    };
                    NodeRecord {
                        id: n.id,
                        kind: RecordKind::Split,
                        split_id: Some(split.id),
                        feature,
                        block,
                        threshold: Some(threshold),
                        label: None,
                        children: children.to_vec(),
                        depth: n.depth,
                    }
                }
                NodeKind::Leaf { label } => NodeRecord {
                    id: n.id,
                    kind: RecordKind::Leaf,
                    split_id: None,
                    feature: None,
                    block: None,
                    threshold: None,
                    label: *label,
                    children: Vec::new(),
                    depth: n.depth,
                },
            })
            .collect()
    }

    pub fn from_records(records: &[NodeRecord]) -> Result<Self> {
        let bad = |msg: String| Error::invalid(format!("tree records: {msg}"));
        let mut nodes: Vec<Node> = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.id != i {
                return Err(bad(format!("record {i} has id {}", r.id)));
            }
            let kind = match r.kind {
                RecordKind::Leaf => NodeKind::Leaf { label: r.label },
                RecordKind::Split => {
                    let threshold = r.threshold.ok_or_else(|| bad(format!("node {i} lacks a threshold")))?;
                    let kind = match (&r.feature, &r.block) {
                        (Some(f), None) => SplitKind::Threshold {
                            feature: *f,
                            threshold,
                        },
                        (None, Some(b)) => SplitKind::BlockAverage {
                            features: b.clone(),
                            threshold,
                        },
                        _ => return Err(bad(format!("node {i} needs exactly one of feature/block"))),
                    };
                    let children: [usize; 2] = r
                        .children
                        .as_slice()
                        .try_into()
                        .map_err(|_| bad(format!("node {i} must have two children")))?;
                    if children.iter().any(|&c| c <= i || c >= records.len()) {
                        return Err(bad(format!("node {i} has invalid children")));
                    }
                    NodeKind::Split {
                        split: SplitFunction {
                            id: r.split_id.unwrap_or(0),
                            kind,
                        },
                        children,
                    }
                }
            };
            nodes.push(Node {
                id: i,
                depth: r.depth,
                parent: None,
                kind,
            });
        }
        if nodes.is_empty() {
            return Err(bad("no nodes".into()));
        }
        for i in 0..nodes.len() {
            if let NodeKind::Split { children, .. } = nodes[i].kind.clone() {
                for c in children {
                    if nodes[c].parent.is_some() || nodes[c].depth != nodes[i].depth + 1 {
                        return Err(bad(format!("node {c} has inconsistent parent or depth")));
                    }
                    nodes[c].parent = Some(i);
                }
            }
        }
        if nodes.iter().skip(1).any(|n| n.parent.is_none()) || nodes[0].depth != 0 {
            return Err(bad("tree is not rooted at node 0".into()));
        }
        Ok(DecisionTree { nodes })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_records()).expect("records serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let records: Vec<NodeRecord> = serde_json::from_str(s)?;
        Self::from_records(&records)
    }
}

pub(crate) fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Split,
    Leaf,
}

/// Serialized form of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub kind: RecordKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
    #[serde(default)]
    pub children: Vec<usize>,
    pub depth: u32,
}
