//! Growth engines: IDLA and smash sums, the divisible sandpile, and the
//! deterministic reference flow built from it.

mod idla;
mod reference;
mod sandpile;

pub use idla::{init_idla, run_idla, smash_sum, IdlaState, Landing, WalkObserver, STEP_BUDGET};
pub use reference::{
    quadrature_check, reference_flow, reference_flow_with, sandpile_flow, site_box, FlowSnapshot,
    LatticeShape, ReferenceMode, ReferenceSampler, TestHarmonic,
};
pub use sandpile::{
    stabilize_sandpile, SandpileState, Schedule, OCCUPIED_THRESHOLD, SANDPILE_TOLERANCE,
};
