//! Seeded IDLA campaigns over resolutions and trials, with manifest-guarded
//! resume.

use std::path::{Path, PathBuf};

use idla_core::aggregation::{FlowSnapshot, ReferenceSampler};
use idla_core::analysis::{measure_run, write_records_csv, Level, ReferenceTrack};
use idla_core::lattice::Resolution;
use idla_core::rng::derive_seed;
use idla_core::sources::{discretize, SourceSequence};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io::{set_pgm, Snapshot};
use crate::manifest::{load_completed, write_atomic, RunSummary, RunWriter};

/// Per-run seed, independent of scheduling order.
pub fn run_seed(base: u64, m: u32, trial: usize) -> u64 {
    derive_seed(base, &[u64::from(m), trial as u64])
}

pub fn run_dir(out: &Path, m: u32, trial: usize) -> PathBuf {
    out.join("runs")
        .join(format!("m{m:04}"))
        .join(format!("trial{trial:04}"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub m: u32,
    pub trial: usize,
    pub seed: u64,
    pub summary: RunSummary,
    /// Taken from an earlier, verified manifest.
    pub reused: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Campaign {
    /// Sorted by `(m, trial)`.
    pub runs: Vec<RunOutcome>,
}

#[derive(Serialize)]
struct Row {
    m: u32,
    trial: usize,
    seed: u64,
    particles: usize,
    max_fluctuation: f64,
    max_early: f64,
    max_late: f64,
}

impl Campaign {
    pub fn reused(&self) -> usize {
        self.runs.iter().filter(|r| r.reused).count()
    }

    /// Max fluctuation of every trial, grouped by resolution.
    pub fn levels(&self) -> Vec<Level> {
        let mut out: Vec<Level> = Vec::new();
        for r in &self.runs {
            match out.last_mut() {
                Some(l) if l.m == r.m => l.values.push(r.summary.max_fluctuation),
                _ => out.push(Level {
                    m: r.m,
                    values: vec![r.summary.max_fluctuation],
                }),
            }
        }
        out
    }

    pub fn csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.runs {
            w.serialize(Row {
                m: r.m,
                trial: r.trial,
                seed: r.seed,
                particles: r.summary.particles,
                max_fluctuation: r.summary.max_fluctuation,
                max_early: r.summary.max_early,
                max_late: r.summary.max_late,
            })
            .map_err(|e| CliError::Invariant(e.to_string()))?;
        }
        w.into_inner()
            .map_err(|e| CliError::Invariant(e.to_string()))
    }
}

struct Prepared {
    m: u32,
    seq: SourceSequence,
    track: ReferenceTrack<FlowSnapshot>,
}

fn prepare(cfg: &ExperimentConfig, m: u32) -> CliResult<Prepared> {
    let res = Resolution::new(i64::from(m))?;
    let mut seq = discretize(&cfg.flow, res)?;
    if cfg.reverse_ties {
        seq = seq.reverse_ties();
    }
    let sampler = ReferenceSampler::new(cfg.flow.clone(), res);
    let track = ReferenceTrack::new(&cfg.flow, &sampler, res, cfg.checkpoints)?;
    log::info!(
        "m = {m}: {} sources, reference flow sampled at {} times",
        seq.len(),
        track.times.len()
    );
    Ok(Prepared { m, seq, track })
}

/// Checkpoint indices for `count` snapshots, ending at the last record.
fn snapshot_indices(records: usize, count: usize) -> Vec<usize> {
    let last = records.saturating_sub(1);
    let count = count.min(records);
    let mut v: Vec<usize> = (1..=count).map(|j| (last * j).div_ceil(count)).collect();
    v.dedup();
    v
}

fn execute(
    cfg: &ExperimentConfig,
    hash: &str,
    out: &Path,
    p: &Prepared,
    trial: usize,
    seed: u64,
) -> CliResult<RunOutcome> {
    let mut writer = RunWriter::new(run_dir(out, p.m, trial))?;
    let run = measure_run(&cfg.flow, &p.seq, seed, &p.track)?;
    let mut csv = Vec::new();
    write_records_csv(&run.records, &mut csv)?;
    writer.add("records.csv", &csv)?;
    for k in snapshot_indices(run.records.len(), cfg.snapshots) {
        let rec = &run.records[k];
        let mut cluster = run.initial.clone();
        for l in &run.audit.landings[..rec.t] {
            cluster.insert(l.site);
        }
        writer.add(&format!("snapshot-{k:03}.pgm"), &set_pgm(&cluster))?;
        let snap = Snapshot::new(&cluster, p.m, rec.s, rec.t);
        let json = serde_json::to_vec(&snap).map_err(|e| CliError::Invariant(e.to_string()))?;
        writer.add(&format!("snapshot-{k:03}.json"), &json)?;
    }
    let last = run
        .records
        .last()
        .ok_or_else(|| CliError::Invariant("run produced no records".into()))?;
    let summary = RunSummary {
        particles: run.audit.landings.len(),
        max_fluctuation: run.max_fluctuation(),
        max_early: last.max_early,
        max_late: last.max_late,
    };
    writer.finish(hash, p.m, trial, seed, summary.clone())?;
    Ok(RunOutcome {
        m: p.m,
        trial,
        seed,
        summary,
        reused: false,
    })
}

/// Runs every `(m, trial)` of the config that has no valid manifest under
/// `out`, in parallel on the current rayon pool.
pub fn run_campaign(cfg: &ExperimentConfig, out: &Path) -> CliResult<Campaign> {
    let hash = cfg.run_hash();
    let mut runs = Vec::new();
    let mut pending = Vec::new();
    for &m in &cfg.m {
        for trial in 0..cfg.trials {
            let seed = run_seed(cfg.seed, m, trial);
            match load_completed(&run_dir(out, m, trial), &hash, seed) {
                Some(man) => runs.push(RunOutcome {
                    m,
                    trial,
                    seed,
                    summary: man.summary,
                    reused: true,
                }),
                None => pending.push((m, trial, seed)),
            }
        }
    }
    let ms: Vec<u32> = cfg
        .m
        .iter()
        .copied()
        .filter(|m| pending.iter().any(|p| p.0 == *m))
        .collect();
    let prepared: Vec<Prepared> = ms
        .par_iter()
        .map(|&m| prepare(cfg, m))
        .collect::<CliResult<_>>()?;
    let fresh: Vec<RunOutcome> = pending
        .par_iter()
        .map(|&(m, trial, seed)| {
            let p = prepared
                .iter()
                .find(|p| p.m == m)
                .expect("prepared for every pending resolution");
            execute(cfg, &hash, out, p, trial, seed)
        })
        .collect::<CliResult<_>>()?;
    runs.extend(fresh);
    runs.sort_by_key(|r| (r.m, r.trial));
    Ok(Campaign { runs })
}

/// Writes `campaign.csv` under `out`.
pub fn write_campaign_csv(c: &Campaign, out: &Path) -> CliResult<PathBuf> {
    let path = out.join("campaign.csv");
    write_atomic(&path, &c.csv()?)?;
    Ok(path)
}
