//! Differentially private top-down decision tree learning.
//!
//! The greedy TopDown boosting loop with private split selection, noisy
//! leaf weights and private leaf labels, on a single machine or across
//! simulated data-holding entities.

pub mod data;
pub mod dataset;
pub mod dp;
pub mod dp_topdown;
pub mod error;
pub mod experiment;
pub mod split_strategies;
pub mod theory;
pub mod tree;

pub use dataset::LabeledDataset;
pub use error::{Error, Result};
