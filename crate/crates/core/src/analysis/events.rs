use serde::{Deserialize, Serialize};

use crate::aggregation::{init_idla, run_idla, Landing, WalkObserver};
use crate::error::{Error, Result};
use crate::lattice::{
    boundary, eps_neighborhoods, hausdorff_points, sites_in, Point, Resolution, Shape, Site,
    SiteBox, SiteSet,
};
use crate::sources::{FlowSampler, FlowSpec, SourceSequence};

/// Fewest checkpoint intervals accepted by [`measure_run`].
pub const MIN_CHECKPOINTS: usize = 20;

/// Deepest witnesses of the two inclusion failures at one `ε`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Events {
    /// Occupied site outside the outer ε-neighborhood of `D_s`.
    pub early: Option<Site>,
    /// Unoccupied site inside the inner ε-neighborhood of `D_s`.
    pub late: Option<Site>,
}

pub fn detect_events(
    occupied: &SiteSet,
    m: Resolution,
    flow: &(impl Shape + Clone),
    eps: f64,
) -> Result<Events> {
    let (outer, inner) = eps_neighborhoods(flow, eps)?;
    let mut early: Option<(f64, Site)> = None;
    for z in occupied.iter() {
        let p = z.to_point(m);
        if !outer.contains(p) {
            let d = flow.signed_distance(p);
            if early.is_none_or(|(best, _)| d > best) {
                early = Some((d, z));
            }
        }
    }
    let mut late: Option<(f64, Site)> = None;
    for z in sites_in(&inner, m)?.iter() {
        if !occupied.contains(z) {
            let d = -flow.signed_distance(z.to_point(m));
            if late.is_none_or(|(best, _)| d > best) {
                late = Some((d, z));
            }
        }
    }
    Ok(Events {
        early: early.map(|e| e.1),
        late: late.map(|e| e.1),
    })
}

/// Largest `ε` for which each event occurs, 0 when it never does.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventDepths {
    pub early: f64,
    pub late: f64,
}

/// Exact event depths: the furthest occupied site outside `D_s` and the
/// deepest unoccupied site inside it.
pub fn event_depths(occupied: &SiteSet, m: Resolution, flow: &impl Shape) -> Result<EventDepths> {
    let mut early = 0.0f64;
    for z in occupied.iter() {
        early = early.max(flow.signed_distance(z.to_point(m)));
    }
    let mut late = 0.0f64;
    let rect = flow.bounds().ok_or(Error::EmptySet)?;
    for z in SiteBox::covering(&rect, m)?.sites() {
        if !occupied.contains(z) {
            late = late.max(-flow.signed_distance(z.to_point(m)));
        }
    }
    Ok(EventDepths { early, late })
}

/// Fluctuation of one run at one checkpoint, in scaled units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationRecord {
    pub s: f64,
    /// Particles released.
    pub t: usize,
    /// Hausdorff distance between the cluster boundary and `∂D_s`.
    pub d_boundary: f64,
    pub early: f64,
    pub late: f64,
    /// Running maxima of `early` and `late` over checkpoints up to `s`.
    pub max_early: f64,
    pub max_late: f64,
}

/// The deterministic flow sampled at the checkpoint times of a campaign,
/// shared by every run at one resolution.
pub struct ReferenceTrack<S> {
    pub m: Resolution,
    pub times: Vec<f64>,
    pub snapshots: Vec<S>,
    /// `∂D_s` at arclength spacing `1/(4m)`.
    pub boundaries: Vec<Vec<Point>>,
}

impl<S: Shape> ReferenceTrack<S> {
    pub fn new<F: FlowSampler<Snapshot = S>>(
        spec: &FlowSpec,
        sampler: &F,
        m: Resolution,
        checkpoints: usize,
    ) -> Result<Self> {
        if checkpoints < MIN_CHECKPOINTS {
            return Err(Error::Analysis(format!(
                "need at least {MIN_CHECKPOINTS} checkpoint intervals, got {checkpoints}"
            )));
        }
        let total = spec.total();
        let spacing = 0.25 * m.spacing();
        let times: Vec<f64> = (0..=checkpoints)
            .map(|k| total * k as f64 / checkpoints as f64)
            .collect();
        let mut snapshots = Vec::with_capacity(times.len());
        let mut boundaries = Vec::with_capacity(times.len());
        for &s in &times {
            let snap = sampler.snapshot(s)?;
            boundaries.push(sampler.boundary(&snap, spacing));
            snapshots.push(snap);
        }
        Ok(ReferenceTrack {
            m,
            times,
            snapshots,
            boundaries,
        })
    }
}

/// Fluctuation record of `occupied` against checkpoint `k` of `track`.
pub fn measure_state<S: Shape>(
    occupied: &SiteSet,
    t: usize,
    track: &ReferenceTrack<S>,
    k: usize,
) -> Result<FluctuationRecord> {
    let m = track.m;
    let cluster_boundary = boundary(occupied).points(m);
    let d_boundary = hausdorff_points(&cluster_boundary, &track.boundaries[k])?;
    let depths = event_depths(occupied, m, &track.snapshots[k])?;
    Ok(FluctuationRecord {
        s: track.times[k],
        t,
        d_boundary,
        early: depths.early,
        late: depths.late,
        max_early: depths.early,
        max_late: depths.late,
    })
}

/// Collects every landing of a run.
#[derive(Clone, Debug, Default)]
pub struct LandingAudit {
    pub landings: Vec<Landing>,
}

impl WalkObserver for LandingAudit {
    fn observe(&mut self, landing: &Landing, _occupied: &SiteSet) -> Result<()> {
        self.landings.push(*landing);
        Ok(())
    }
}

/// Everything recorded for one IDLA run.
#[derive(Clone, Debug)]
pub struct RunMeasurement {
    pub seed: u64,
    pub records: Vec<FluctuationRecord>,
    pub initial: SiteSet,
    pub cluster: SiteSet,
    pub audit: LandingAudit,
}

impl RunMeasurement {
    /// `max_s d_boundary(s)`.
    pub fn max_fluctuation(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.d_boundary)
            .fold(0.0, f64::max)
    }
}

/// Runs IDLA through `seq`, measuring at every checkpoint of `track`.
/// Particles released by time `s` are those with release time at most `s`.
pub fn measure_run<S: Shape>(
    spec: &FlowSpec,
    seq: &SourceSequence,
    seed: u64,
    track: &ReferenceTrack<S>,
) -> Result<RunMeasurement> {
    if seq.m != track.m {
        return Err(Error::Analysis(format!(
            "sequence resolution {} differs from reference resolution {}",
            seq.m, track.m
        )));
    }
    let mut state = init_idla(spec, seq.m, seed)?;
    let initial = state.occupied.clone();
    let mut audit = LandingAudit::default();
    let mut records: Vec<FluctuationRecord> = Vec::with_capacity(track.times.len());
    for (k, &s) in track.times.iter().enumerate() {
        let t = seq.count_through(s);
        run_idla(
            &mut state,
            seq,
            t,
            None,
            &mut [&mut audit as &mut dyn WalkObserver],
        )?;
        let mut rec = measure_state(&state.occupied, t, track, k)?;
        if let Some(prev) = records.last() {
            rec.max_early = rec.max_early.max(prev.max_early);
            rec.max_late = rec.max_late.max(prev.max_late);
        }
        records.push(rec);
    }
    Ok(RunMeasurement {
        seed,
        records,
        initial,
        cluster: state.occupied,
        audit,
    })
}

/// Writes records as CSV with a header row.
pub fn write_records_csv<W: std::io::Write>(records: &[FluctuationRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)
            .map_err(|e| Error::Analysis(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}
