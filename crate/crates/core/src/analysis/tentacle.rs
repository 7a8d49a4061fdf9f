use serde::{Deserialize, Serialize};

use crate::aggregation::Landing;
use crate::error::{Error, Result};
use crate::lattice::{Resolution, Shape, SiteSet};

/// Thin-tentacle counts for one density threshold and several radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentacleStats {
    pub b: f64,
    /// Radii in scaled units.
    pub radii: Vec<f64>,
    /// Events per radius, summed over trials.
    pub events: Vec<usize>,
    pub trials: usize,
    /// Landings examined, summed over trials.
    pub particles: usize,
}

impl TentacleStats {
    pub fn merge(&mut self, other: &TentacleStats) -> Result<()> {
        if self.b != other.b || self.radii != other.radii {
            return Err(Error::Analysis(
                "cannot merge tentacle scans with different parameters".into(),
            ));
        }
        for (a, b) in self.events.iter_mut().zip(&other.events) {
            *a += b;
        }
        self.trials += other.trials;
        self.particles += other.particles;
        Ok(())
    }

    pub fn total_events(&self) -> usize {
        self.events.iter().sum()
    }
}

/// Replays `landings` on top of `initial` and counts landings at sites `z`
/// with `d(z, D_0) ≥ r` whose ball `B(z, r)` holds at most `b m² r²`
/// occupied sites right after the landing.
pub fn tentacle_scan(
    initial: &SiteSet,
    d0: &impl Shape,
    landings: &[Landing],
    m: Resolution,
    b: f64,
    radii: &[f64],
) -> Result<TentacleStats> {
    if !(b >= 0.0) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Analysis(format!(
            "density {b} and radii {radii:?} must be positive"
        )));
    }
    let mf = m.as_f64();
    let mut cluster = initial.clone();
    let mut events = vec![0; radii.len()];
    for l in landings {
        cluster.insert(l.site);
        let depth = d0.signed_distance(l.site.to_point(m));
        for (count, &r) in events.iter_mut().zip(radii) {
            if depth < r {
                continue;
            }
            let occupied = cluster.count_in_ball(l.site, r * mf) as f64;
            if occupied <= b * mf * mf * r * r {
                *count += 1;
            }
        }
    }
    Ok(TentacleStats {
        b,
        radii: radii.to_vec(),
        events,
        trials: 1,
        particles: landings.len(),
    })
}
