use std::fmt;
use std::path::{Path, PathBuf};

use idla_core::aggregation::Schedule;
use idla_core::analysis::{Level, MIN_CHECKPOINTS};
use idla_core::sources::{validate_flow, FlowSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the cache directory.
pub const CACHE_ENV: &str = "IDLA_LAB_CACHE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    Kernel,
    HarmonicVerify,
    Scaling,
    Sandpile,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Simulate => "simulate",
            Kind::Kernel => "kernel",
            Kind::HarmonicVerify => "harmonic-verify",
            Kind::Scaling => "scaling",
            Kind::Sandpile => "sandpile",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to a single source disk growing inside the unit disk.
    #[serde(default = "example_flow")]
    pub flow: FlowSpec,
    /// When present, must match the subcommand.
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default = "default_m")]
    pub m: Vec<u32>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Snapshots per run, spread evenly over the checkpoints and ending at
    /// the final one.
    #[serde(default = "one")]
    pub snapshots: usize,
    /// Release particles with equal times in reverse order.
    #[serde(default)]
    pub reverse_ties: bool,
    #[serde(default = "default_flow_samples")]
    pub flow_samples: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub kernel: KernelOptions,
    #[serde(default)]
    pub harmonic: HarmonicOptions,
    #[serde(default)]
    pub scaling: ScalingOptions,
    #[serde(default)]
    pub sandpile: SandpileOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelOptions {
    pub half_width: i64,
    pub directions: usize,
    /// Level-set inclusion is checked for these direction angles in [0, π/4].
    pub inclusion_angles: Vec<f64>,
    pub inclusion_m: u32,
    pub inclusion_r0: f64,
    pub inclusion_r0_prime: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            half_width: 150,
            directions: 32,
            inclusion_angles: vec![0.0, 0.4],
            inclusion_m: 1,
            inclusion_r0: 10.0,
            inclusion_r0_prime: 4000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarmonicOptions {
    pub poles: usize,
    /// Angle of the first pole; the rest are spaced by 2π/poles.
    pub first_angle: f64,
    /// Resolutions of the disk Green's function convergence table.
    pub green_m: Vec<u32>,
    pub green_alpha: f64,
    /// Sites closer than this to the pole (scaled units) are skipped in ratio checks.
    pub away: f64,
    /// Constant `C₂` used for the tangent radius `R₀`.
    pub c2: f64,
}

impl Default for HarmonicOptions {
    fn default() -> Self {
        HarmonicOptions {
            poles: 8,
            first_angle: 0.1,
            green_m: vec![16, 32, 64],
            green_alpha: 0.2,
            away: 0.25,
            c2: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingOptions {
    pub resamples: usize,
    pub envelope_exponent: f64,
    /// Fit these values instead of running a campaign.
    pub synthetic: Option<Vec<Level>>,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions {
            resamples: 2000,
            envelope_exponent: 0.6,
            synthetic: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SandpileOptions {
    pub schedule: Schedule,
    /// Defaults to the total volume.
    pub time: Option<f64>,
}

fn example_flow() -> FlowSpec {
    FlowSpec::concentric_disks(1)
}

fn default_m() -> Vec<u32> {
    vec![16]
}

fn one() -> usize {
    1
}

fn default_checkpoints() -> usize {
    MIN_CHECKPOINTS
}

fn default_flow_samples() -> usize {
    16
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                CliError::Config(format!("{}: file not found", path.display()))
            }
            _ => CliError::io(path, e),
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks the fields needed by `kind`, including the flow's defining
    /// conditions for commands that simulate it.
    pub fn validate(&self, kind: Kind) -> CliResult<()> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(CliError::Config(format!(
                    "config is for `{k}`, not `{kind}`"
                )));
            }
        }
        if self.m.is_empty() || self.m[0] == 0 {
            return Err(CliError::Config(
                "m must be a nonempty list of positive resolutions".into(),
            ));
        }
        if self.m.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config(format!(
                "m must be strictly increasing, got {:?}",
                self.m
            )));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        match kind {
            Kind::Simulate | Kind::Scaling => {
                if self.checkpoints < MIN_CHECKPOINTS {
                    return Err(CliError::Config(format!(
                        "checkpoints must be at least {MIN_CHECKPOINTS}"
                    )));
                }
            }
            Kind::Kernel => {
                if !(2..=idla_core::potential::MAX_HALF_WIDTH).contains(&self.kernel.half_width) {
                    return Err(CliError::Config(format!(
                        "kernel.half_width {} out of range",
                        self.kernel.half_width
                    )));
                }
            }
            Kind::HarmonicVerify | Kind::Sandpile => {}
        }
        if kind == Kind::Scaling {
            let count = self
                .scaling
                .synthetic
                .as_ref()
                .map_or(self.m.len(), Vec::len);
            if count < 3 {
                return Err(CliError::Config(format!(
                    "scaling needs at least 3 resolutions, got {count}"
                )));
            }
        }
        if kind != Kind::Kernel {
            let report = validate_flow(&self.flow, self.flow_samples.max(2))?;
            if !report.passed() {
                return Err(CliError::InvalidFlow(report));
            }
        }
        Ok(())
    }

    /// Hash of the fields that determine a single run's output. Runs whose
    /// manifest carries this hash can be reused.
    pub fn run_hash(&self) -> String {
        let key = serde_json::json!({
            "flow": self.flow,
            "seed": self.seed,
            "checkpoints": self.checkpoints,
            "snapshots": self.snapshots,
            "reverse_ties": self.reverse_ties,
        });
        hex::encode(Sha256::digest(key.to_string().as_bytes()))
    }

    /// Cache directory: `IDLA_LAB_CACHE`, else the configured one, else
    /// `cache/` under the output directory.
    pub fn resolve_cache_dir(&self, out: &Path) -> PathBuf {
        match std::env::var_os(CACHE_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.cache_dir.clone().unwrap_or_else(|| out.join("cache")),
        }
    }
}
