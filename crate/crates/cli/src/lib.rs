//! Command-line experiment runner: seeded IDLA campaigns, potential-kernel
//! and harmonic-field verification, scaling fits, and sandpile references.

pub mod campaign;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::failures;
pub use crate::config::{ExperimentConfig, Kind};
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "idla-lab",
    version,
    about = "Extended-source internal DLA experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run IDLA campaigns and write per-run records, snapshots, and manifests.
    Simulate(Common),
    /// Build or load the potential kernel table and report its constants.
    Kernel(Common),
    /// Check the harmonic-field invariants at sampled boundary poles.
    HarmonicVerify(Common),
    /// Run a campaign across resolutions and fit the fluctuation exponent.
    Scaling(Common),
    /// Stabilize divisible sandpiles and check the quadrature identity.
    Sandpile(Common),
}

#[derive(Clone, Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Command {
    pub fn split(&self) -> (Kind, &Common) {
        match self {
            Command::Simulate(c) => (Kind::Simulate, c),
            Command::Kernel(c) => (Kind::Kernel, c),
            Command::HarmonicVerify(c) => (Kind::HarmonicVerify, c),
            Command::Scaling(c) => (Kind::Scaling, c),
            Command::Sandpile(c) => (Kind::Sandpile, c),
        }
    }
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    // Fail early on directories that exist but cannot be written.
    let probe = dir.join(".idla-lab-write-test");
    std::fs::write(&probe, b"").map_err(|e| CliError::io(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| CliError::io(&probe, e))
}

/// Runs one subcommand, printing a summary to `stdout`.
pub fn run(cli: &Cli, stdout: &mut (dyn Write + Send)) -> CliResult<()> {
    let (kind, common) = cli.command.split();
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate(kind)?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("idla-out"));
    prepare_out(&out)?;
    let cache = cfg.resolve_cache_dir(&out);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| dispatch(kind, &cfg, &out, &cache, stdout))
}

fn say(stdout: &mut (dyn Write + Send), line: String) -> CliResult<()> {
    writeln!(stdout, "{line}").map_err(|e| CliError::io("<stdout>", e))
}

fn dispatch(
    kind: Kind,
    cfg: &ExperimentConfig,
    out: &Path,
    cache: &Path,
    stdout: &mut (dyn Write + Send),
) -> CliResult<()> {
    match kind {
        Kind::Simulate => {
            let r = commands::simulate(cfg, out)?;
            say(
                stdout,
                format!(
                    "simulate: {} runs ({} reused), summary in {}",
                    r.runs,
                    r.reused,
                    r.campaign_csv.display()
                ),
            )?;
            for l in r.campaign.levels() {
                say(
                    stdout,
                    format!(
                        "  m = {:4}: median max fluctuation {:.4}",
                        l.m,
                        idla_core::analysis::median(&l.values)
                    ),
                )?;
            }
            Ok(())
        }
        Kind::Kernel => {
            let r = commands::kernel(cfg, out, cache)?;
            let source = if r.cache_hit { "cache hit" } else { "built" };
            say(
                stdout,
                format!(
                    "kernel: L = {} ({source}, {:.2} s)",
                    r.half_width, r.load_seconds
                ),
            )?;
            say(
                stdout,
                format!(
                    "  residual {:.3e}, laplacian at 0 = {}",
                    r.residual, r.origin_laplacian
                ),
            )?;
            say(
                stdout,
                format!("  lambda = {:.7}, C1 = {:.4}", r.lambda, r.c1),
            )?;
            say(
                stdout,
                format!(
                    "  c = {:.4} (lattice only {:.4}, {} directions)",
                    r.c, r.c_lattice, r.directions
                ),
            )?;
            check_all(&r.checks)
        }
        Kind::HarmonicVerify => {
            let r = commands::harmonic_verify(cfg, out, cache)?;
            let total = r.checks().count();
            let failed = failures(r.checks());
            say(
                stdout,
                format!(
                    "harmonic-verify: {} poles, {} checks, {} failed",
                    r.poles.len(),
                    total,
                    failed.len()
                ),
            )?;
            if let Some(c1) = r.c1 {
                say(stdout, format!("  C1 = {c1:.4} across all poles"))?;
            }
            if let Some(g) = &r.green {
                say(stdout, "  m     error      error(2 alpha)".into())?;
                for l in &g.convergence.levels {
                    say(
                        stdout,
                        format!("  {:<4}  {:.3e}  {:.3e}", l.m, l.error, l.error_2alpha),
                    )?;
                }
                say(stdout, format!("  fitted rate {:.3}", g.convergence.rate))?;
            }
            check_all(r.checks())
        }
        Kind::Scaling => {
            let r = commands::scaling(cfg, out)?;
            let f = &r.fit;
            say(
                stdout,
                format!(
                    "scaling: beta = {:.4}, 95% CI [{:.4}, {:.4}]",
                    f.beta, f.ci_low, f.ci_high
                ),
            )?;
            if !r.synthetic {
                say(stdout, format!("  {} runs ({} reused)", r.runs, r.reused))?;
            }
            let held = if r.envelope.holds() {
                "holds"
            } else {
                "violated"
            };
            say(
                stdout,
                format!(
                    "  envelope m^-{} with C = {:.4}: {held}",
                    r.envelope.exponent, r.envelope.c_hat
                ),
            )
        }
        Kind::Sandpile => {
            let r = commands::sandpile(cfg, out)?;
            for l in &r.levels {
                let worst = l.quadrature.iter().map(|q| q.1).fold(0.0, f64::max);
                say(
                    stdout,
                    format!(
                        "sandpile m = {}: {} sites, max quadrature discrepancy {worst:.3e}",
                        l.m, l.occupied
                    ),
                )?;
            }
            Ok(())
        }
    }
}

fn check_all<'a>(checks: impl IntoIterator<Item = &'a commands::Check>) -> CliResult<()> {
    let failed = failures(checks);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(failed.join("; ")))
    }
}
