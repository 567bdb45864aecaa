//! Dataset schemas, CSV input/output, partitioning and synthetic targets.

pub mod csv_io;
pub mod partition;
pub mod schema;
pub mod synthetic;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use partition::{partition, partition_indices, subsample, train_test_split, PartitionMode, PartitionSpec};
pub use schema::{BlockSpec, DataSchema, FeatureKind, FeatureSpec, LabelSpec, SplitSpec};
pub use synthetic::{depth2_truth, depth3_truth, generate, synthetic_schema, SYNTHETIC_THRESHOLDS};
