//! Differential privacy primitives: Laplace noise, Report Noisy Max and the
//! composition-aware privacy ledger.

pub mod ledger;
pub mod noise;

pub use ledger::{Charge, Holder, LedgerMode, Level, PrivacyLedger, Purpose, Scope, ROUNDING_SLACK};
pub use noise::{
    laplace_max_tail_threshold, laplace_mechanism, laplace_tail_threshold, report_noisy_max,
    sample_laplace, stream_id, NoiseScale, RandomSource,
};
