//! One module per subcommand. Each writes its artifacts under the output
//! directory and returns a report; hard check failures are reported by the
//! caller after the artifacts are on disk.

mod harmonic;
mod kernel;
mod sandpile;
mod scaling;
mod simulate;

pub use harmonic::{harmonic_verify, GreenReport, HarmonicReport, PoleReport};
pub use kernel::{kernel, InclusionSummary, KernelReport};
pub use sandpile::{sandpile, SandpileLevel, SandpileReport};
pub use scaling::{scaling, ScalingReport};
pub use simulate::{simulate, SimulateReport};

use serde::{Deserialize, Serialize};

/// One named pass/fail measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance bound.
    pub bound: String,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, bound: &str, passed: bool) -> Self {
        Check {
            name: name.into(),
            value,
            bound: bound.into(),
            passed,
        }
    }
}

pub fn failures<'a>(checks: impl IntoIterator<Item = &'a Check>) -> Vec<String> {
    checks
        .into_iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} = {} (want {})", c.name, c.value, c.bound))
        .collect()
}
