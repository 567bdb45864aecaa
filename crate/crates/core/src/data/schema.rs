use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{SplitClass, SplitKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    /// Real-valued with a public declared range.
    Continuous { min: f64, max: f64 },
    /// One-hot encoded, one column per declared value.
    Categorical { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub name: String,
    pub values: Vec<String>,
}

/// Threshold counts for continuous features plus optional block-average
/// splits. Categorical features always get one threshold at 0.5 per
/// one-hot column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    /// Threshold count `T` for continuous features not listed below.
    pub thresholds: Option<i64>,
    /// Per-feature overrides of `T`.
    pub per_feature: BTreeMap<String, i64>,
    /// Features that get no thresholds at all.
    pub exclude: Vec<String>,
    pub blocks: Vec<BlockSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    /// Encoded column names averaged by the split.
    pub features: Vec<String>,
    pub thresholds: Vec<f64>,
}

/// Public description of a dataset: features, labels and splitting class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSchema {
    pub features: Vec<FeatureSpec>,
    pub label: LabelSpec,
    #[serde(default)]
    pub splits: SplitSpec,
}

impl DataSchema {
    pub fn from_json(s: &str) -> Result<Self> {
        let schema: DataSchema = serde_json::from_str(s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.values.is_empty() {
            return Err(Error::Spec("label set must not be empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) || f.name == self.label.name {
                return Err(Error::Spec(format!("duplicate column name {:?}", f.name)));
            }
            match &f.kind {
                FeatureKind::Continuous { min, max } => {
                    if !(min.is_finite() && max.is_finite() && min < max) {
                        return Err(Error::Spec(format!("feature {:?} has an invalid range", f.name)));
                    }
                }
                FeatureKind::Categorical { values } => {
                    if values.is_empty() {
                        return Err(Error::Spec(format!("feature {:?} has no values", f.name)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Names of the encoded columns: continuous features keep their name,
    /// categorical ones become `name=value`.
    pub fn encoded_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.features {
            match &f.kind {
                FeatureKind::Continuous { .. } => out.push(f.name.clone()),
                FeatureKind::Categorical { values } => {
                    out.extend(values.iter().map(|v| format!("{}={v}", f.name)))
                }
            }
        }
        out
    }

    pub fn n_encoded(&self) -> usize {
        self.encoded_names().len()
    }

    /// Builds H from the schema alone: continuous features get `T` evenly
    /// spaced interior thresholds of their declared range, one-hot columns
    /// a single threshold at 0.5, then block splits. Ordering is
    /// feature-major with ascending thresholds.
    pub fn build_splitting_class(&self) -> Result<SplitClass> {
        let spec = &self.splits;
        let names = self.encoded_names();
        for key in spec.per_feature.keys().chain(&spec.exclude) {
            if !self.features.iter().any(|f| &f.name == key) {
                return Err(Error::Spec(format!("unknown feature {key:?} in split spec")));
            }
        }
        let mut kinds = Vec::new();
        let mut col = 0;
        for f in &self.features {
            let skip = spec.exclude.contains(&f.name);
            match &f.kind {
                FeatureKind::Continuous { min, max } => {
                    if !skip {
                        let t = spec.per_feature.get(&f.name).copied().or(spec.thresholds).ok_or_else(|| {
                            Error::Spec(format!("no threshold count for continuous feature {:?}", f.name))
                        })?;
                        if t <= 0 {
                            return Err(Error::Spec(format!(
                                "threshold count for {:?} must be positive, got {t}",
                                f.name
                            )));
                        }
                        for r in 1..=t {
                            let threshold = min + (max - min) * r as f64 / (t + 1) as f64;
                            kinds.push(SplitKind::Threshold { feature: col, threshold });
                        }
                    }
                    col += 1;
                }
                FeatureKind::Categorical { values } => {
                    for c in col..col + values.len() {
                        if !skip {
                            kinds.push(SplitKind::Threshold { feature: c, threshold: 0.5 });
                        }
                    }
                    col += values.len();
                }
            }
        }
        for b in &spec.blocks {
            let features = b
                .features
                .iter()
                .map(|n| {
                    names
                        .iter()
                        .position(|m| m == n)
                        .ok_or_else(|| Error::Spec(format!("unknown block column {n:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if features.is_empty() || b.thresholds.is_empty() {
                return Err(Error::Spec("block splits need columns and thresholds".into()));
            }
            let mut ts = b.thresholds.clone();
            ts.sort_by(f64::total_cmp);
            for threshold in ts {
                kinds.push(SplitKind::BlockAverage {
                    features: features.clone(),
                    threshold,
                });
            }
        }
        if kinds.is_empty() {
            return Err(Error::Spec("splitting class is empty".into()));
        }
        SplitClass::new(names.len(), kinds).map_err(|e| Error::Spec(e.to_string()))
    }
}
