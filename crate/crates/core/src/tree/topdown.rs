use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::counts::split_gain;
use super::criterion::Criterion;
use super::model::DecisionTree;
use super::split::{SplitClass, SplitTable};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Leaves with fewer rows than this are never split.
pub const MIN_SPLIT_ROWS: usize = 3;

pub const DEFAULT_MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopDownParams {
    /// Maximum number of internal nodes `M`.
    pub max_splits: usize,
    pub criterion: Criterion,
    /// Leaves whose best gain is not above this are not queued.
    pub min_gain: f64,
    /// Optional lower bound on the leaf weight for queuing, like the private
    /// algorithm's `ε/M` filter.
    pub weight_floor: Option<f64>,
}

impl TopDownParams {
    pub fn new(max_splits: usize, criterion: Criterion) -> Self {
        TopDownParams {
            max_splits,
            criterion,
            min_gain: DEFAULT_MIN_GAIN,
            weight_floor: None,
        }
    }
}

/// Max-priority queue; equal priorities pop in insertion order.
#[derive(Debug)]
pub struct LeafQueue<T> {
    heap: BinaryHeap<QueueEntry<T>>,
    next_seq: u64,
}

#[derive(Debug)]
struct QueueEntry<T> {
    priority: f64,
    seq: u64,
    item: T,
}

impl<T> PartialEq for QueueEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for QueueEntry<T> {}

impl<T> PartialOrd for QueueEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for QueueEntry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<T> Default for LeafQueue<T> {
    fn default() -> Self {
        LeafQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }
}

impl<T> LeafQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, priority: f64, item: T) {
        self.heap.push(QueueEntry {
            priority,
            seq: self.next_seq,
            item,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<(f64, T)> {
        self.heap.pop().map(|e| (e.priority, e.item))
    }

    pub fn max_priority(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.priority)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Exact best split at `rows`: `(split id, J)`, lowest id on ties. `None`
/// when the leaf has fewer than [`MIN_SPLIT_ROWS`] rows.
pub fn best_split(table: &SplitTable, rows: &[usize], criterion: Criterion) -> Option<(usize, f64)> {
    if rows.len() < MIN_SPLIT_ROWS {
        return None;
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (h, c) in table.joint_counts(rows).iter().enumerate() {
        let j = split_gain(c, criterion).value;
        if j > best.1 {
            best = (h, j);
        }
    }
    Some(best)
}

/// Greedy non-private TopDown with exact gains and majority labels.
pub fn topdown_nonprivate(
    data: &LabeledDataset,
    class: &SplitClass,
    params: &TopDownParams,
) -> Result<DecisionTree> {
    if params.max_splits == 0 {
        return Err(Error::invalid("max_splits must be at least 1"));
    }
    if data.is_empty() {
        return Err(Error::invalid("cannot grow a tree on an empty dataset"));
    }
    let table = SplitTable::build(data, class)?;
    let n = data.len() as f64;
    let mut tree = DecisionTree::new();
    let mut rows_of: Vec<Vec<usize>> = vec![(0..data.len()).collect()];
    let mut queue = LeafQueue::new();

    if let Some((h, j)) = best_split(&table, &rows_of[0], params.criterion) {
        if j > params.min_gain {
            queue.push(j, (DecisionTree::ROOT, h));
        }
    }
    for t in 1..=params.max_splits {
        let Some((_, (leaf, h))) = queue.pop() else {
            break;
        };
        let children = tree.split_leaf(leaf, class.get(h).clone())?;
        let parent_rows = std::mem::take(&mut rows_of[leaf]);
        let (left, right): (Vec<usize>, Vec<usize>) =
            parent_rows.iter().partition(|&&r| table.branch(r, h) == 0);
        rows_of.push(left);
        rows_of.push(right);
        if t == params.max_splits {
            break;
        }
        for c in children {
            let w = rows_of[c].len() as f64 / n;
            if params.weight_floor.is_some_and(|f| w < f) {
                continue;
            }
            if let Some((hc, j)) = best_split(&table, &rows_of[c], params.criterion) {
                if j > params.min_gain {
                    queue.push(w * j, (c, hc));
                }
            }
        }
    }
    tree.label_by_majority(data);
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::split::SplitKind;

    fn grid_class(n_features: usize, thresholds: &[f64]) -> SplitClass {
        let kinds = (0..n_features)
            .flat_map(|f| {
                thresholds
                    .iter()
                    .map(move |&t| SplitKind::Threshold { feature: f, threshold: t })
            })
            .collect();
        SplitClass::new(n_features, kinds).unwrap()
    }

    fn dataset(rows: Vec<Vec<f64>>, labels: Vec<u32>) -> LabeledDataset {
        let d = rows[0].len();
        LabeledDataset::from_rows(
            (0..d).map(|i| format!("x{i}")).collect(),
            vec!["0".into(), "1".into()],
            &rows,
            labels,
        )
        .unwrap()
    }

    #[test]
    fn queue_ties_pop_in_insertion_order() {
        let mut q = LeafQueue::new();
        q.push(0.5, "a");
        q.push(0.9, "b");
        q.push(0.5, "c");
        assert_eq!(q.pop(), Some((0.9, "b")));
        assert_eq!(q.pop(), Some((0.5, "a")));
        assert_eq!(q.pop(), Some((0.5, "c")));
        assert!(q.pop().is_none());
    }

    #[test]
    fn single_label_gives_single_leaf() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0]).collect();
        let d = dataset(rows, vec![1; 20]);
        let t = topdown_nonprivate(&d, &grid_class(1, &[0.25, 0.5, 0.75]), &TopDownParams::new(8, Criterion::Gini)).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.tree_error(&d).unwrap(), 0.0);
    }

    #[test]
    fn xor_needs_two_levels() {
        // XOR on a 4x4 grid: no single threshold has positive gain.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = (0.125 + 0.25 * i as f64, 0.125 + 0.25 * j as f64);
                rows.push(vec![a, b]);
                labels.push(u32::from((a > 0.5) != (b > 0.5)));
            }
        }
        let d = dataset(rows, labels);
        let class = grid_class(2, &[0.5]);
        let table = SplitTable::build(&d, &class).unwrap();
        let all: Vec<usize> = (0..d.len()).collect();
        assert_eq!(best_split(&table, &all, Criterion::Entropy).unwrap().1, 0.0);
        let params = TopDownParams {
            min_gain: -1.0,
            ..TopDownParams::new(3, Criterion::Entropy)
        };
        let t = topdown_nonprivate(&d, &class, &params).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.tree_error(&d).unwrap(), 0.0);
    }

    #[test]
    fn depth_two_truth_is_recovered() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..5000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let y = if x[0] <= 0.6 { x[1] > 0.3 } else { x[2] > 0.7 };
            rows.push(x);
            labels.push(u32::from(y));
        }
        let d = dataset(rows, labels);
        let thresholds: Vec<f64> = (1..10).map(|r| r as f64 / 10.0).collect();
        let class = grid_class(3, &thresholds);
        let t = topdown_nonprivate(&d, &class, &TopDownParams::new(8, Criterion::Entropy)).unwrap();
        assert_eq!(t.tree_error(&d).unwrap(), 0.0);
    }
}
