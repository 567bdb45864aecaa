use serde::{Deserialize, Serialize};

use super::criterion::Criterion;

/// Joint label × branch counts at a leaf under one split.
///
/// Cell `(y, b)` counts rows with label `y` sent to branch `b`. Cells are
/// reals so the same type carries noisy counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafCounts {
    n_labels: usize,
    cells: Vec<f64>,
}

/// Split gain together with a flag raised when the sanitized counts were
/// all zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gain {
    pub value: f64,
    pub degenerate: bool,
}

impl LeafCounts {
    pub fn zeros(n_labels: usize) -> Self {
        LeafCounts {
            n_labels,
            cells: vec![0.0; 2 * n_labels],
        }
    }

    /// Builds from per-label totals and per-label counts on branch 1.
    pub fn from_label_branch(label_totals: &[f64], branch_one: &[f64]) -> Self {
        assert_eq!(label_totals.len(), branch_one.len());
        let mut c = LeafCounts::zeros(label_totals.len());
        for (y, (&tot, &one)) in label_totals.iter().zip(branch_one).enumerate() {
            c.cells[2 * y] = tot - one;
            c.cells[2 * y + 1] = one;
        }
        c
    }

    /// Builds from a flat `[y0b0, y0b1, y1b0, ...]` cell vector.
    pub fn from_cells(cells: Vec<f64>) -> Self {
        assert!(cells.len().is_multiple_of(2), "cell vector must hold label x branch pairs");
        LeafCounts {
            n_labels: cells.len() / 2,
            cells,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }

    pub fn get(&self, label: usize, branch: usize) -> f64 {
        self.cells[2 * label + branch]
    }

    pub fn add(&mut self, label: usize, branch: usize, amount: f64) {
        self.cells[2 * label + branch] += amount;
    }

    /// Cell-wise sum, as the coordinator does across entities.
    pub fn merge(&mut self, other: &LeafCounts) {
        assert_eq!(self.n_labels, other.n_labels);
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn label_totals(&self) -> Vec<f64> {
        self.cells.chunks(2).map(|p| p[0] + p[1]).collect()
    }

    pub fn branch_totals(&self) -> [f64; 2] {
        let mut t = [0.0; 2];
        for p in self.cells.chunks(2) {
            t[0] += p[0];
            t[1] += p[1];
        }
        t
    }

    fn branch_labels(&self, branch: usize) -> Vec<f64> {
        self.cells.chunks(2).map(|p| p[branch]).collect()
    }

    /// Negative cells clamped to zero; marginals follow by summation.
    pub fn sanitized(&self) -> LeafCounts {
        LeafCounts {
            n_labels: self.n_labels,
            cells: self.cells.iter().map(|&c| c.max(0.0)).collect(),
        }
    }
}

/// `J = G(parent) − Σ_b (n_b/n)·G(child_b)` on sanitized counts.
pub fn split_gain(counts: &LeafCounts, criterion: Criterion) -> Gain {
    let c = counts.sanitized();
    let total = c.total();
    if total <= 0.0 {
        return Gain {
            value: 0.0,
            degenerate: true,
        };
    }
    let parent = criterion.of_counts(&c.label_totals());
    let branch = c.branch_totals();
    let mut children = 0.0;
    for (b, &nb) in branch.iter().enumerate() {
        if nb > 0.0 {
            children += nb / total * criterion.of_counts(&c.branch_labels(b));
        }
    }
    Gain {
        value: parent - children,
        degenerate: false,
    }
}
