use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::dp::RandomSource;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PartitionMode {
    /// Each row goes to an entity chosen independently and uniformly.
    Uniform,
    /// Rows grouped by the value of an encoded column; distinct values in
    /// ascending order are dealt to entities round-robin.
    ByColumn { column: String },
    /// CSV of `row,entity` pairs.
    Explicit { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub k: usize,
    #[serde(flatten)]
    pub mode: PartitionMode,
}

impl PartitionSpec {
    pub fn uniform(k: usize) -> Self {
        PartitionSpec {
            k,
            mode: PartitionMode::Uniform,
        }
    }
}

/// Row indices of each of the `k` shards, in ascending row order.
pub fn partition_indices(data: &LabeledDataset, spec: &PartitionSpec, rng: &mut RandomSource) -> Result<Vec<Vec<usize>>> {
    if spec.k == 0 {
        return Err(Error::invalid("entity count must be at least 1"));
    }
    let mut shards = vec![Vec::new(); spec.k];
    match &spec.mode {
        PartitionMode::Uniform => {
            for r in 0..data.len() {
                shards[rng.gen_range(0..spec.k)].push(r);
            }
        }
        PartitionMode::ByColumn { column } => {
            let c = data
                .feature_names()
                .iter()
                .position(|n| n == column)
                .ok_or_else(|| Error::invalid(format!("no column {column:?}")))?;
            let mut values: Vec<f64> = data.rows().map(|(x, _)| x[c]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for (r, (x, _)) in data.rows().enumerate() {
                let rank = values.binary_search_by(|v| v.total_cmp(&x[c])).expect("value present");
                shards[rank % spec.k].push(r);
            }
        }
        PartitionMode::Explicit { path } => {
            let mut seen = vec![false; data.len()];
            for (row, entity) in read_assignment(path)? {
                if row >= data.len() || entity >= spec.k {
                    return Err(Error::invalid(format!("assignment ({row}, {entity}) out of range")));
                }
                if std::mem::replace(&mut seen[row], true) {
                    return Err(Error::invalid(format!("row {row} assigned twice")));
                }
                shards[entity].push(row);
            }
            if let Some(r) = seen.iter().position(|s| !s) {
                return Err(Error::invalid(format!("row {r} is not assigned")));
            }
            for s in &mut shards {
                s.sort_unstable();
            }
        }
    }
    Ok(shards)
}

fn read_assignment(path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<usize> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Load {
                    path: path.to_path_buf(),
                    line,
                    message: "expected two non-negative integers".into(),
                })
        };
        out.push((field(0)?, field(1)?));
    }
    Ok(out)
}

/// Splits `data` into `k` disjoint shards covering every row. Shards may
/// be empty when `k > n`.
pub fn partition(data: &LabeledDataset, spec: &PartitionSpec, rng: &mut RandomSource) -> Result<Vec<LabeledDataset>> {
    Ok(partition_indices(data, spec, rng)?
        .iter()
        .map(|idx| data.subset(idx))
        .collect())
}

/// Seeded shuffle then prefix cut: `⌊n·train/(train+test)⌋` training rows.
pub fn train_test_split(
    data: &LabeledDataset,
    ratio: (u32, u32),
    rng: &mut RandomSource,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (a, b) = ratio;
    if a == 0 || b == 0 {
        return Err(Error::invalid("train:test ratio parts must be positive"));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(rng);
    let cut = data.len() * a as usize / (a + b) as usize;
    Ok((data.subset(&idx[..cut]), data.subset(&idx[cut..])))
}

/// Random subset of `round(fraction·n)` rows (all rows at fraction 1).
pub fn subsample(data: &LabeledDataset, fraction: f64, rng: &mut RandomSource) -> Result<LabeledDataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    if fraction == 1.0 {
        return Ok(data.clone());
    }
    let m = (fraction * data.len() as f64).round() as usize;
    let mut idx = rand::seq::index::sample(rng, data.len(), m).into_vec();
    idx.sort_unstable();
    Ok(data.subset(&idx))
}
