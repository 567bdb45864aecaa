use rand::Rng;

use super::schema::{DataSchema, FeatureKind, FeatureSpec, LabelSpec, SplitSpec};
use crate::dataset::LabeledDataset;
use crate::dp::RandomSource;
use crate::error::{Error, Result};
use crate::tree::{DecisionTree, SplitFunction};

/// Threshold count used by the synthetic grid: thresholds 0.1, ..., 0.9.
pub const SYNTHETIC_THRESHOLDS: i64 = 9;

/// Schema of `d` features uniform on [0, 1] with `t` thresholds each and a
/// binary label.
pub fn synthetic_schema(d: usize, t: i64) -> DataSchema {
    DataSchema {
        features: (0..d)
            .map(|j| FeatureSpec {
                name: format!("x{j}"),
                kind: FeatureKind::Continuous { min: 0.0, max: 1.0 },
            })
            .collect(),
        label: LabelSpec {
            name: "y".into(),
            values: vec!["0".into(), "1".into()],
        },
        splits: SplitSpec {
            thresholds: Some(t),
            ..SplitSpec::default()
        },
    }
}

// Split with the id it has in `synthetic_schema(_, SYNTHETIC_THRESHOLDS)`.
fn grid_split(feature: usize, r: i64) -> SplitFunction {
    let t = SYNTHETIC_THRESHOLDS;
    let id = feature * t as usize + (r - 1) as usize;
    SplitFunction::threshold(id, feature, r as f64 / (t + 1) as f64)
}

/// Depth-2 target over 3 features.
pub fn depth2_truth() -> DecisionTree {
    let mut t = DecisionTree::new();
    let [l, r] = t.split_leaf(DecisionTree::ROOT, grid_split(0, 6)).unwrap();
    let [ll, lr] = t.split_leaf(l, grid_split(1, 3)).unwrap();
    let [rl, rr] = t.split_leaf(r, grid_split(2, 7)).unwrap();
    for (leaf, y) in [(ll, 0), (lr, 1), (rl, 0), (rr, 1)] {
        t.set_label(leaf, y).unwrap();
    }
    t
}

/// Depth-3 target over 4 features with 8 leaves.
pub fn depth3_truth() -> DecisionTree {
    let mut t = DecisionTree::new();
    let [l, r] = t.split_leaf(DecisionTree::ROOT, grid_split(0, 6)).unwrap();
    let [ll, lr] = t.split_leaf(l, grid_split(1, 3)).unwrap();
    let [rl, rr] = t.split_leaf(r, grid_split(2, 7)).unwrap();
    let [a, b] = t.split_leaf(ll, grid_split(3, 4)).unwrap();
    let [c, d] = t.split_leaf(lr, grid_split(1, 8)).unwrap();
    let [e, f] = t.split_leaf(rl, grid_split(3, 2)).unwrap();
    let [g, h] = t.split_leaf(rr, grid_split(0, 9)).unwrap();
    for (leaf, y) in [a, b, c, d, e, f, g, h].into_iter().zip([0, 1, 1, 0, 1, 0, 0, 1]) {
        t.set_label(leaf, y).unwrap();
    }
    t
}

/// Draws `n` points uniform on [0, 1]^d, labels them with `truth` and flips
/// each binary label with probability `label_noise`.
pub fn generate(
    truth: &DecisionTree,
    n: usize,
    d: usize,
    label_noise: f64,
    rng: &mut RandomSource,
) -> Result<LabeledDataset> {
    if !(0.0..=0.5).contains(&label_noise) {
        return Err(Error::invalid(format!("label noise must lie in [0, 0.5], got {label_noise}")));
    }
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        features.extend((0..d).map(|_| rng.gen::<f64>()));
        let mut y = truth.predict(&features[start..])?;
        if label_noise > 0.0 && rng.gen::<f64>() < label_noise {
            y = 1 - y;
        }
        labels.push(y);
    }
    let schema = synthetic_schema(d, SYNTHETIC_THRESHOLDS);
    LabeledDataset::new(schema.encoded_names(), schema.label.values, features, labels)
}
