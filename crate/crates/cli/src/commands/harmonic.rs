use std::f64::consts::TAU;
use std::path::Path;

use idla_core::harmonic::{
    build_h, build_omega, check_omega, fit_c1, green_convergence_check, green_discrete,
    h_harmonicity_residual, last_exit_ratio, poisson_tilde, sup_mean_value_discrepancy, DiskPole,
    GreenConvergence, PoleEntry,
};
use idla_core::lattice::{Region, Resolution, Site, SiteBox};
use idla_core::potential::{estimate_c, PotentialTable};
use idla_core::sources::{discretize, SourceSequence};
use rayon::prelude::*;
use serde::Serialize;

use super::Check;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::write_json;

#[derive(Clone, Debug, Serialize)]
pub struct PoleReport {
    pub m: u32,
    pub index: usize,
    pub theta: f64,
    pub zeta: [i32; 2],
    pub tau: f64,
    pub h_at_pole: f64,
    /// `max m²|z−ζ|²·|H−F|` over `|z−ζ| ≥ 3/m`.
    pub c1: f64,
    /// Smallest `C₂` with `Ω_ζ` inside the `C₂/m` neighborhood of the flow.
    pub c2_containment: f64,
    pub c2_decay: f64,
    /// Last-exit ratio `H̃_ζ / G(ζ′, ·)` away from the pole.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Sup over sampled times of the mean-value discrepancy of `H_ζ`.
    pub mean_value: f64,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenReport {
    pub convergence: GreenConvergence,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicReport {
    pub table_half_width: i64,
    pub c: f64,
    pub poles: Vec<PoleReport>,
    /// One constant covering every pole and resolution.
    pub c1: Option<f64>,
    pub green: Option<GreenReport>,
}

impl HarmonicReport {
    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.poles
            .iter()
            .flat_map(|p| &p.checks)
            .chain(self.green.iter().flat_map(|g| &g.checks))
    }

    pub fn passed(&self) -> bool {
        self.checks().all(|c| c.passed)
    }
}

fn round_up(n: i64, step: i64) -> i64 {
    (n + step - 1) / step * step
}

/// Half-width covering `H_ζ` on the field boxes and the Green's function
/// table, rounded up so that nearby configurations share a cached table.
fn needed_half_width(cfg: &ExperimentConfig, radius: f64) -> i64 {
    let pole = cfg
        .m
        .iter()
        .map(|&m| 2 * ((radius * f64::from(m)).ceil() as i64 + 8) + 2)
        .max()
        .unwrap_or(0);
    let green = cfg
        .harmonic
        .green_m
        .iter()
        .map(|&m| 2 * (i64::from(m) + 8) + 2)
        .max()
        .unwrap_or(0);
    round_up(pole.max(green).max(150), 50)
}

fn pole_report(
    cfg: &ExperimentConfig,
    table: &PotentialTable,
    c: f64,
    seq: &SourceSequence,
    k: usize,
) -> CliResult<PoleReport> {
    let opts = &cfg.harmonic;
    let spec = &cfg.flow;
    let m = seq.m;
    let mf = m.as_f64();
    let theta = opts.first_angle + k as f64 * TAU / opts.poles as f64;
    let pole = DiskPole::new(spec, m, spec.total(), theta)?;
    let ctx = pole.context(m, c, opts.c2, seq)?;
    let field_box = SiteBox::around(Site::new(0, 0), (pole.radius * mf).ceil() as i32 + 8);
    let h = build_h(table, &ctx, field_box)?;
    let h_at_pole = h.get(ctx.zeta)?;
    let residual = h_harmonicity_residual(&h, &ctx);
    let c1 = fit_c1(&h, &ctx, 3.0 / mf)?;
    let d_tau = pole.interior();
    let omega = build_omega(&ctx, &h, &d_tau)?;
    let om = check_omega(&ctx, &h, &omega, &pole.region())?;

    let slit = poisson_tilde(&ctx, &d_tau, PoleEntry::Slit)?;
    let mut inner = d_tau.clone();
    inner.remove(ctx.zeta);
    let mut pt_range = (f64::INFINITY, f64::NEG_INFINITY);
    for z in inner.iter() {
        let v = slit.get(z)?;
        pt_range = (pt_range.0.min(v), pt_range.1.max(v));
    }
    let g = green_discrete(table, &inner, ctx.inward(), m)?;
    let ratio = last_exit_ratio(&ctx, &slit, &g, &inner, opts.away)?;
    let mean_value = sup_mean_value_discrepancy(&h, spec, seq, ctx.tau, 40)?;

    let pt_zeta = slit.get(ctx.zeta)?;
    let checks = vec![
        Check::new(
            "H(zeta)",
            h_at_pole,
            "[1, 2]",
            (1.0..=2.0).contains(&h_at_pole),
        ),
        Check::new(
            "harmonicity residual of H",
            residual,
            "<= 1e-10",
            residual <= 1e-10,
        ),
        Check::new(
            "min H on Omega",
            om.omega_min,
            ">= -1/(2mR0) - slack",
            om.lower_ok(),
        ),
        Check::new(
            "zeta on boundary of Omega",
            f64::from(u8::from(om.zeta_on_boundary)),
            "1",
            om.zeta_on_boundary,
        ),
        Check::new(
            "max |H| on grid boundary of Omega",
            om.grid_boundary_max,
            "<= 1/(2mR0)",
            om.grid_boundary_ok(),
        ),
        Check::new(
            "flow domain inside Omega",
            f64::from(u8::from(om.contains_flow)),
            "1",
            om.contains_flow,
        ),
        Check::new("Poisson kernel at zeta", pt_zeta, "1", pt_zeta == 1.0),
        Check::new(
            "Poisson kernel range",
            pt_range.1,
            "values in [0, 1]",
            pt_range.0 >= 0.0 && pt_range.1 <= 1.0,
        ),
        Check::new(
            "last-exit ratio spread",
            ratio.spread(),
            "<= 0.05",
            ratio.spread() <= 0.05,
        ),
        Check::new(
            "last-exit ratio",
            ratio.median,
            "[1/16, 1]",
            ratio.min >= 1.0 / 16.0 && ratio.max <= 1.0,
        ),
    ];
    Ok(PoleReport {
        m: m.get(),
        index: k,
        theta,
        zeta: [ctx.zeta.x, ctx.zeta.y],
        tau: ctx.tau,
        h_at_pole,
        c1,
        c2_containment: om.c2_containment,
        c2_decay: om.c2_decay,
        ratio_min: ratio.min,
        ratio_max: ratio.max,
        mean_value,
        checks,
    })
}

fn green_report(cfg: &ExperimentConfig, table: &PotentialTable) -> CliResult<GreenReport> {
    let opts = &cfg.harmonic;
    let ms: Vec<Resolution> = opts
        .green_m
        .iter()
        .map(|&m| Resolution::new(i64::from(m)))
        .collect::<Result<_, _>>()?;
    let conv = green_convergence_check(table, 1.0, opts.first_angle, opts.green_alpha, &ms)?;
    let mut checks = Vec::new();
    for (w, r) in conv.levels.windows(2).zip(&conv.ratios) {
        // An m⁻² decay gives the octave ratio (m₂/m₁)²; accept within a factor of 3.
        let ideal = (f64::from(w[1].m) / f64::from(w[0].m)).powi(2);
        let name = format!("Green error ratio m={} to m={}", w[0].m, w[1].m);
        checks.push(Check::new(
            &name,
            *r,
            "within 3x of (m2/m1)^2",
            *r >= ideal / 3.0 && *r <= ideal * 3.0,
        ));
    }
    Ok(GreenReport {
        convergence: conv,
        checks,
    })
}

/// Runs the pole suite on every configured resolution and pole, plus the
/// disk Green's function convergence table. Writes `harmonic_report.json`.
pub fn harmonic_verify(
    cfg: &ExperimentConfig,
    out: &Path,
    cache: &Path,
) -> CliResult<HarmonicReport> {
    let opts = &cfg.harmonic;
    let radius = match cfg.flow.analytic_disk(cfg.flow.total()) {
        Some(Region::Disk { center, radius }) if center == [0.0, 0.0] => radius,
        _ => {
            return Err(CliError::Config(
                "harmonic-verify needs a flow of disks centered at the origin".into(),
            ))
        }
    };
    if opts.poles == 0 {
        let report = HarmonicReport {
            table_half_width: 0,
            c: f64::NAN,
            poles: Vec::new(),
            c1: None,
            green: None,
        };
        write_json(&out.join("harmonic_report.json"), &report)?;
        return Ok(report);
    }
    let half_width = needed_half_width(cfg, radius);
    let (table, _) = PotentialTable::cached(cache, half_width)?;
    let c = estimate_c(&table, 32);

    let seqs: Vec<SourceSequence> = cfg
        .m
        .iter()
        .map(|&m| Ok(discretize(&cfg.flow, Resolution::new(i64::from(m))?)?))
        .collect::<CliResult<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..seqs.len())
        .flat_map(|i| (0..opts.poles).map(move |k| (i, k)))
        .collect();
    let poles: Vec<PoleReport> = jobs
        .par_iter()
        .map(|&(i, k)| pole_report(cfg, &table, c, &seqs[i], k))
        .collect::<CliResult<_>>()?;
    let green = if opts.green_m.is_empty() {
        None
    } else {
        Some(green_report(cfg, &table)?)
    };
    let c1 = poles
        .iter()
        .map(|p| p.c1)
        .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
    let report = HarmonicReport {
        table_half_width: half_width,
        c,
        poles,
        c1,
        green,
    };
    write_json(&out.join("harmonic_report.json"), &report)?;
    Ok(report)
}
