use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::campaign::{run_campaign, write_campaign_csv, Campaign};
use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub runs: usize,
    pub reused: usize,
    pub campaign_csv: PathBuf,
    #[serde(skip)]
    pub campaign: Campaign,
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> CliResult<SimulateReport> {
    let campaign = run_campaign(cfg, out)?;
    let campaign_csv = write_campaign_csv(&campaign, out)?;
    Ok(SimulateReport {
        runs: campaign.runs.len(),
        reused: campaign.reused(),
        campaign_csv,
        campaign,
    })
}
