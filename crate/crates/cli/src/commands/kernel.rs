use std::f64::consts::FRAC_PI_4;
use std::path::Path;
use std::time::Instant;

use idla_core::lattice::Site;
use idla_core::potential::{
    check_level_set_inclusion, estimate_c, estimate_c_lattice, Direction, PotentialTable,
};
use serde::Serialize;

use super::Check;
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::manifest::write_json;

#[derive(Clone, Debug, Serialize)]
pub struct InclusionSummary {
    pub angle: f64,
    pub checked: usize,
    pub in_level_set: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub half_width: i64,
    pub cache_hit: bool,
    pub load_seconds: f64,
    pub residual: f64,
    pub origin_laplacian: f64,
    pub lambda: f64,
    pub c1: f64,
    /// Smallest `c` over the sampled directions, with sign changes located
    /// along lattice edges.
    pub c: f64,
    pub c_lattice: f64,
    pub directions: usize,
    pub inclusion: Vec<InclusionSummary>,
    pub checks: Vec<Check>,
}

impl KernelReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Loads or builds the potential table, then fits its expansion, estimates
/// `c`, and checks the level-set inclusion. Writes `kernel_report.json`.
pub fn kernel(cfg: &ExperimentConfig, out: &Path, cache: &Path) -> CliResult<KernelReport> {
    let opts = &cfg.kernel;
    let clock = Instant::now();
    let (table, cache_hit) = PotentialTable::cached(cache, opts.half_width)?;
    let load_seconds = clock.elapsed().as_secs_f64();

    let (residual, origin_laplacian) = table.harmonicity_residual();
    let fit = table.fit_lambda();
    let c = estimate_c(&table, opts.directions);
    let c_lattice = estimate_c_lattice(&table, opts.directions);
    let mut inclusion = Vec::new();
    for &angle in &opts.inclusion_angles {
        let n = Direction::from_angle(angle.clamp(0.0, FRAC_PI_4))?;
        let r = check_level_set_inclusion(
            &table,
            n,
            opts.inclusion_m,
            opts.inclusion_r0,
            opts.inclusion_r0_prime,
        );
        inclusion.push(InclusionSummary {
            angle,
            checked: r.checked,
            in_level_set: r.in_level_set,
            violations: r.violations.len(),
        });
    }

    let g10 = table.get(Site::new(1, 0))?;
    let g11 = table.get(Site::new(1, 1))?;
    let violations: usize = inclusion.iter().map(|i| i.violations).sum();
    let checks = vec![
        Check::new(
            "max |laplacian g| away from 0",
            residual,
            "<= 1e-12",
            residual <= 1e-12,
        ),
        Check::new(
            "laplacian g(0)",
            origin_laplacian,
            "1 +- 1e-12",
            (origin_laplacian - 1.0).abs() <= 1e-12,
        ),
        Check::new("g(1,0)", g10, "1 +- 1e-9", (g10 - 1.0).abs() <= 1e-9),
        Check::new(
            "g(1,1)",
            g11,
            "4/pi +- 1e-9",
            (g11 - 4.0 / std::f64::consts::PI).abs() <= 1e-9,
        ),
        Check::new(
            "lambda",
            fit.lambda,
            "[1.02, 1.04]",
            (1.02..=1.04).contains(&fit.lambda),
        ),
        Check::new("C1", fit.c1, "<= 1", fit.c1 <= 1.0),
        Check::new("c", c, ">= 0.15", c >= 0.15),
        Check::new(
            "level-set inclusion violations",
            violations as f64,
            "0",
            violations == 0,
        ),
    ];
    let report = KernelReport {
        half_width: opts.half_width,
        cache_hit,
        load_seconds,
        residual,
        origin_laplacian,
        lambda: fit.lambda,
        c1: fit.c1,
        c,
        c_lattice,
        directions: opts.directions,
        inclusion,
        checks,
    };
    write_json(&out.join("kernel_report.json"), &report)?;
    Ok(report)
}
