//! Non-private decision tree core.

pub mod counts;
pub mod criterion;
pub mod model;
pub mod split;
pub mod topdown;

pub use counts::{split_gain, Gain, LeafCounts};
pub use criterion::Criterion;
pub use model::{DecisionTree, Node, NodeKind, NodeRecord, RecordKind};
pub use split::{PathStep, SplitClass, SplitFunction, SplitKind, SplitTable};
pub use topdown::{
    best_split, topdown_nonprivate, LeafQueue, TopDownParams, DEFAULT_MIN_GAIN, MIN_SPLIT_ROWS,
};
