use serde::{Deserialize, Serialize};

use super::counts::LeafCounts;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitKind {
    Threshold { feature: usize, threshold: f64 },
    /// Threshold on the mean of several features (e.g. a pixel block).
    BlockAverage { features: Vec<usize>, threshold: f64 },
}

/// A binary splitting function `h: X → {0, 1}`; `id` is its index in H.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFunction {
    pub id: usize,
    pub kind: SplitKind,
}

impl SplitFunction {
    pub fn threshold(id: usize, feature: usize, threshold: f64) -> Self {
        SplitFunction {
            id,
            kind: SplitKind::Threshold { feature, threshold },
        }
    }

    /// 0 (left) iff the feature value or block mean is ≤ the threshold.
    pub fn eval(&self, x: &[f64]) -> u8 {
        let (value, t) = match &self.kind {
            SplitKind::Threshold { feature, threshold } => (x[*feature], *threshold),
            SplitKind::BlockAverage { features, threshold } => {
                let sum: f64 = features.iter().map(|&j| x[j]).sum();
                (sum / features.len() as f64, *threshold)
            }
        };
        u8::from(value > t)
    }

    pub fn threshold_value(&self) -> f64 {
        match &self.kind {
            SplitKind::Threshold { threshold, .. } | SplitKind::BlockAverage { threshold, .. } => {
                *threshold
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match &self.kind {
            SplitKind::Threshold { feature, .. } => Some(*feature),
            SplitKind::BlockAverage { features, .. } => features.iter().copied().max(),
        }
    }
}

/// The splitting class H, ids equal to positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitClass {
    n_features: usize,
    splits: Vec<SplitFunction>,
}

impl SplitClass {
    /// Renumbers `kinds` as ids 0..len.
    pub fn new(n_features: usize, kinds: Vec<SplitKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::invalid("splitting class must not be empty"));
        }
        let splits: Vec<SplitFunction> = kinds
            .into_iter()
            .enumerate()
            .map(|(id, kind)| SplitFunction { id, kind })
            .collect();
        for s in &splits {
            if let SplitKind::BlockAverage { features, .. } = &s.kind {
                if features.is_empty() {
                    return Err(Error::invalid(format!("split {} has an empty block", s.id)));
                }
            }
            match s.max_feature() {
                Some(j) if j < n_features => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "split {} refers to a feature outside 0..{n_features}",
                        s.id
                    )))
                }
            }
            if !s.threshold_value().is_finite() {
                return Err(Error::invalid(format!("split {} has a non-finite threshold", s.id)));
            }
        }
        Ok(SplitClass { n_features, splits })
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn get(&self, id: usize) -> &SplitFunction {
        &self.splits[id]
    }

    pub fn splits(&self) -> &[SplitFunction] {
        &self.splits
    }
}

/// One step of a root-to-leaf path: the split taken and the branch followed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub split: usize,
    pub branch: u8,
}

/// Precomputed `h(x)` for every row and split, one byte per entry.
#[derive(Debug, Clone)]
pub struct SplitTable {
    n_rows: usize,
    n_splits: usize,
    n_labels: usize,
    bits: Vec<u8>,
    labels: Vec<u32>,
}

impl SplitTable {
    pub fn build(data: &LabeledDataset, class: &SplitClass) -> Result<Self> {
        if data.n_features() != class.n_features() {
            return Err(Error::invalid(format!(
                "dataset has {} features, splitting class expects {}",
                data.n_features(),
                class.n_features()
            )));
        }
        let h = class.len();
        let mut bits = Vec::with_capacity(data.len() * h);
        for (x, _) in data.rows() {
            bits.extend(class.splits().iter().map(|s| s.eval(x)));
        }
        Ok(SplitTable {
            n_rows: data.len(),
            n_splits: h,
            n_labels: data.n_labels(),
            bits,
            labels: data.labels().to_vec(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_splits(&self) -> usize {
        self.n_splits
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn label(&self, row: usize) -> u32 {
        self.labels[row]
    }

    pub fn branch(&self, row: usize, split: usize) -> u8 {
        self.bits[row * self.n_splits + split]
    }

    /// Rows of `rows` that follow `path`.
    pub fn follow(&self, rows: impl IntoIterator<Item = usize>, path: &[PathStep]) -> Vec<usize> {
        rows.into_iter()
            .filter(|&r| path.iter().all(|s| self.branch(r, s.split) == s.branch))
            .collect()
    }

    /// Rows of the whole table that follow `path`.
    pub fn rows_at(&self, path: &[PathStep]) -> Vec<usize> {
        self.follow(0..self.n_rows, path)
    }

    pub fn label_counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_labels];
        for &r in rows {
            counts[self.labels[r] as usize] += 1;
        }
        counts
    }

    /// Joint counts at `rows` for every split in H.
    pub fn joint_counts(&self, rows: &[usize]) -> Vec<LeafCounts> {
        let all: Vec<usize> = (0..self.n_splits).collect();
        self.joint_counts_for(rows, &all)
    }

    /// Joint counts at `rows` for the listed split ids (duplicates allowed).
    pub fn joint_counts_for(&self, rows: &[usize], splits: &[usize]) -> Vec<LeafCounts> {
        let k = self.n_labels;
        let totals = self.label_counts(rows);
        let mut ones = vec![0u32; splits.len() * k];
        for &r in rows {
            let y = self.labels[r] as usize;
            let row_bits = &self.bits[r * self.n_splits..(r + 1) * self.n_splits];
            for (i, &h) in splits.iter().enumerate() {
                ones[i * k + y] += u32::from(row_bits[h]);
            }
        }
        let totals: Vec<f64> = totals.into_iter().map(|c| c as f64).collect();
        ones.chunks(k)
            .map(|o| {
                let o: Vec<f64> = o.iter().map(|&c| f64::from(c)).collect();
                LeafCounts::from_label_branch(&totals, &o)
            })
            .collect()
    }
}
