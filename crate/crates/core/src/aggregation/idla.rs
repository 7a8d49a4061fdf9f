use crate::error::{Error, Result};
use crate::lattice::{sites_in, Resolution, Site, SiteSet, STEPS};
use crate::rng::{particle_rng, StepSource};
use crate::sources::{FlowSpec, SourceSequence};

/// Default per-particle step budget.
pub const STEP_BUDGET: u64 = 1_000_000_000;

/// Outcome of one particle's walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Landing {
    pub index: usize,
    pub source: Site,
    pub site: Site,
    pub steps: u64,
}

/// Receives each landing after the occupied set has been updated.
pub trait WalkObserver {
    fn observe(&mut self, landing: &Landing, occupied: &SiteSet) -> Result<()>;
}

impl<F: FnMut(&Landing, &SiteSet) -> Result<()>> WalkObserver for F {
    fn observe(&mut self, landing: &Landing, occupied: &SiteSet) -> Result<()> {
        self(landing, occupied)
    }
}

/// Cluster state of an IDLA run.
#[derive(Clone, Debug)]
pub struct IdlaState {
    pub m: Resolution,
    pub occupied: SiteSet,
    /// Particles released so far.
    pub t: usize,
    pub seed: u64,
    pub initial_count: usize,
    pub step_budget: u64,
}

/// Starts from the lattice discretization of D0.
pub fn init_idla(spec: &FlowSpec, m: Resolution, seed: u64) -> Result<IdlaState> {
    spec.validate()?;
    let mut occupied = sites_in(&spec.d0, m)?;
    // Leave room for the cluster to grow to the final flow without regrowing often.
    let grow = ((spec.total() / std::f64::consts::PI).sqrt() * m.as_f64()).ceil() as i32 + 4;
    occupied.regrow(occupied.bounds().expand(grow));
    let initial_count = occupied.len();
    Ok(IdlaState {
        m,
        occupied,
        t: 0,
        seed,
        initial_count,
        step_budget: STEP_BUDGET,
    })
}

impl IdlaState {
    /// Starts from an arbitrary occupied set.
    pub fn from_set(m: Resolution, occupied: SiteSet, seed: u64) -> Self {
        let initial_count = occupied.len();
        IdlaState {
            m,
            occupied,
            t: 0,
            seed,
            initial_count,
            step_budget: STEP_BUDGET,
        }
    }

    /// Releases the next particle at `source`. The walk stops at the first
    /// site outside the cluster, or outside `absorb` when given; that site is
    /// then added to the cluster.
    pub fn step(&mut self, source: Site, absorb: Option<&SiteSet>) -> Result<Landing> {
        let index = self.t;
        let mut steps = StepSource::new(particle_rng(self.seed, index as u64));
        let stopped =
            |z: Site, occ: &SiteSet| !occ.contains(z) || absorb.is_some_and(|a| !a.contains(z));
        let mut z = source;
        let mut n = 0u64;
        while !stopped(z, &self.occupied) {
            if n >= self.step_budget {
                return Err(Error::StepBudget {
                    start: source,
                    budget: self.step_budget,
                });
            }
            let (dx, dy) = STEPS[steps.next_dir()];
            z = z.offset(dx, dy);
            n += 1;
        }
        self.occupied.insert(z);
        self.t += 1;
        Ok(Landing {
            index,
            source,
            site: z,
            steps: n,
        })
    }
}

/// Releases particles `state.t .. t_max` from the sequence, reporting each
/// landing to every observer.
pub fn run_idla(
    state: &mut IdlaState,
    seq: &SourceSequence,
    t_max: usize,
    absorb: Option<&SiteSet>,
    observers: &mut [&mut dyn WalkObserver],
) -> Result<()> {
    if t_max > seq.len() {
        return Err(Error::TimeOutOfRange {
            s: t_max as f64,
            total: seq.len() as f64,
        });
    }
    while state.t < t_max {
        let landing = state.step(seq.site(state.t), absorb)?;
        for o in observers.iter_mut() {
            o.observe(&landing, &state.occupied)?;
        }
    }
    Ok(())
}

/// Discrete smash sum: walks from each point of `A ∩ B`, in site order, stop
/// on leaving the current union and add their exit site.
pub fn smash_sum(a: &SiteSet, b: &SiteSet, seed: u64) -> Result<SiteSet> {
    let mut collisions: Vec<Site> = a.iter().filter(|&z| b.contains(z)).collect();
    collisions.sort();
    let m = Resolution::new(1)?;
    let mut state = IdlaState::from_set(m, a.union(b), seed);
    for z in collisions {
        state.step(z, None)?;
    }
    Ok(state.occupied)
}
