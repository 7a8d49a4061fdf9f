//! Fluctuations of IDLA runs against the deterministic flow: early and late
//! points, boundary distances, thin tentacles, and scaling fits across
//! resolutions.

mod events;
mod fit;
mod tentacle;

pub use events::{
    detect_events, event_depths, measure_run, measure_state, write_records_csv, EventDepths,
    Events, FluctuationRecord, LandingAudit, ReferenceTrack, RunMeasurement, MIN_CHECKPOINTS,
};
pub use fit::{
    compare_growth, envelope_check, fit_exponent, kolmogorov_tail, ks_two_sample, linear_fit,
    median, EnvelopeLevel, EnvelopeReport, GrowthComparison, GrowthFit, KsTest, Level, ScalingFit,
};
pub use tentacle::{tentacle_scan, TentacleStats};
