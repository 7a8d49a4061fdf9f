use std::path::Path;

use idla_core::analysis::{
    envelope_check, fit_exponent, median, EnvelopeReport, Level, ScalingFit,
};
use serde::Serialize;

use crate::campaign::{run_campaign, write_campaign_csv};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{write_atomic, write_json};

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub fit: ScalingFit,
    pub envelope: EnvelopeReport,
    pub levels: Vec<Level>,
    pub synthetic: bool,
    pub runs: usize,
    pub reused: usize,
}

#[derive(Serialize)]
struct Row {
    m: u32,
    trials: usize,
    median: f64,
    fitted: f64,
    residual: f64,
}

/// Runs the campaign (or takes the configured synthetic levels), fits
/// `median ≈ C m^{−β}`, and writes `scaling_fit.json` and `scaling.csv`.
pub fn scaling(cfg: &ExperimentConfig, out: &Path) -> CliResult<ScalingReport> {
    let (levels, runs, reused) = match &cfg.scaling.synthetic {
        Some(levels) => (levels.clone(), 0, 0),
        None => {
            let c = run_campaign(cfg, out)?;
            write_campaign_csv(&c, out)?;
            (c.levels(), c.runs.len(), c.reused())
        }
    };
    let fit = fit_exponent(&levels, cfg.scaling.resamples, cfg.seed)?;
    let envelope = envelope_check(&levels, cfg.scaling.envelope_exponent)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, l) in levels.iter().enumerate() {
        let fitted = (fit.log_c - fit.beta * f64::from(l.m).ln()).exp();
        w.serialize(Row {
            m: l.m,
            trials: l.values.len(),
            median: median(&l.values),
            fitted,
            residual: fit.residuals[i],
        })
        .map_err(|e| CliError::Invariant(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Invariant(e.to_string()))?;
    write_atomic(&out.join("scaling.csv"), &bytes)?;
    let report = ScalingReport {
        fit,
        envelope,
        levels,
        synthetic: cfg.scaling.synthetic.is_some(),
        runs,
        reused,
    };
    write_json(&out.join("scaling_fit.json"), &report)?;
    Ok(report)
}
