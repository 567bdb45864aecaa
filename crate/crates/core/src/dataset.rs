use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Encoded sample: a row-major feature matrix and a label column over a
/// declared finite label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    feature_names: Vec<String>,
    label_names: Vec<String>,
    features: Vec<f64>,
    labels: Vec<u32>,
}

impl LabeledDataset {
    pub fn new(
        feature_names: Vec<String>,
        label_names: Vec<String>,
        features: Vec<f64>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if label_names.is_empty() {
            return Err(Error::invalid("label set must not be empty"));
        }
        if features.len() != d * labels.len() {
            return Err(Error::invalid(format!(
                "feature matrix has {} values, expected {} rows x {} columns",
                features.len(),
                labels.len(),
                d
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y as usize >= label_names.len()) {
            return Err(Error::invalid(format!(
                "label index {bad} outside label set of size {}",
                label_names.len()
            )));
        }
        Ok(LabeledDataset {
            feature_names,
            label_names,
            features,
            labels,
        })
    }

    /// Builds a dataset from rows; convenient in tests and generators.
    pub fn from_rows(
        feature_names: Vec<String>,
        label_names: Vec<String>,
        rows: &[Vec<f64>],
        labels: Vec<u32>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if let Some(r) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::invalid(format!("row {r} does not have {d} features")));
        }
        let features = rows.iter().flatten().copied().collect();
        Self::new(feature_names, label_names, features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], u32)> + '_ {
        (0..self.len()).map(move |i| (self.row(i), self.labels[i]))
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let d = self.n_features();
        let mut features = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
            features,
            labels,
        }
    }

    /// Per-label counts over all rows.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_labels()];
        for &y in &self.labels {
            counts[y as usize] += 1;
        }
        counts
    }

    /// Concatenates datasets that share a schema.
    pub fn concat(parts: &[LabeledDataset]) -> Result<LabeledDataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("cannot concatenate zero datasets"))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.feature_names != first.feature_names || p.label_names != first.label_names {
                return Err(Error::invalid("datasets have different schemas"));
            }
            features.extend_from_slice(&p.features);
            labels.extend_from_slice(&p.labels);
        }
        Self::new(
            first.feature_names.clone(),
            first.label_names.clone(),
            features,
            labels,
        )
    }
}
