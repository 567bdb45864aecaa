//! PrivateSplit implementations and the simulated entity layer.
//!
//! * [`RnmSplitter`]: Report Noisy Max on a single machine.
//! * [`NoisyCountsSplitter`]: entities publish noisy joint histograms for
//!   every split; the coordinator sums them and picks the best.
//! * [`LocalRnmSplitter`]: entities first pick local candidates with RNM,
//!   then NoisyCounts runs over those `k` candidates.

mod central;
mod federation;
mod messages;

pub use central::{rnm_noise_scale, rnm_score_sensitivity, single_machine_rnm_split, CentralData, RnmSplitter};
pub use federation::{Federation, LocalRnmSplitter, NoisyCountsSplitter};
pub use messages::{
    Direction, Entity, InProcessTransport, LogRecord, Payload, Query, QueryKind, Response, Transport,
};
