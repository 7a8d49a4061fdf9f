use thiserror::Error;

use crate::lattice::Site;
use crate::sources::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("resolution must be at least 1, got {0}")]
    InvalidResolution(i64),

    #[error("region is unbounded or has non-finite extent")]
    UnboundedRegion,

    #[error("malformed region: {0}")]
    InvalidRegion(String),

    #[error("neighborhood width must be nonnegative, got {0}")]
    NegativeEpsilon(f64),

    #[error("point set is empty")]
    EmptySet,

    #[error("time {s} outside [0, {total}]")]
    TimeOutOfRange { s: f64, total: f64 },

    #[error("flow specification rejected:\n{0}")]
    InvalidFlow(ValidationReport),

    #[error("mass partition never increases after s = {0}")]
    StalledPartition(f64),

    #[error("degenerate flow: {0}")]
    DegenerateFlow(String),

    #[error("random walk from {start} exceeded the {budget}-step budget")]
    StepBudget { start: Site, budget: u64 },

    #[error("sandpile did not stabilize within {iterations} iterations (max excess {excess:e})")]
    SandpileDiverged { iterations: usize, excess: f64 },

    #[error("potential table half-width {0} outside the supported range [2, {max}]", max = crate::potential::MAX_HALF_WIDTH)]
    TableSize(i64),

    #[error("site {site} outside potential table of half-width {half_width}")]
    OutOfTable { site: Site, half_width: i32 },

    #[error("corrupt potential table: {0}")]
    CorruptTable(String),

    #[error("dirichlet problem: {0}")]
    Dirichlet(String),

    #[error("pole configuration: {0}")]
    Pole(String),

    #[error("site {0} lies outside the field's domain")]
    OutsideField(Site),

    #[error("fit: {0}")]
    Fit(String),

    #[error("analysis: {0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
