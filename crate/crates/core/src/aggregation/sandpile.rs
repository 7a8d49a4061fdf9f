use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lattice::{neighbors, Resolution, Site, SiteBox, SiteSet};

/// Default bound on the excess mass left at any site.
pub const SANDPILE_TOLERANCE: f64 = 1e-8;
/// Sites holding at least this much mass count as occupied.
pub const OCCUPIED_THRESHOLD: f64 = 1.0 - 1e-6;

/// Real-valued mass on a rectangle of sites.
#[derive(Clone, Debug)]
pub struct SandpileState {
    pub m: Resolution,
    pub mass: Grid<f64>,
    pub tolerance: f64,
}

/// Order in which excess mass is redistributed. All schedules reach the same
/// stable configuration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Solves for the odometer (total mass emitted per site) by projected
    /// over-relaxation, then applies it in one step.
    #[default]
    Odometer,
    /// Topples every unstable site in row order, repeatedly.
    Sweep,
    /// Always topples the site with the largest excess.
    LargestFirst,
}

impl SandpileState {
    pub fn new(m: Resolution, mass: Grid<f64>) -> Self {
        SandpileState {
            m,
            mass,
            tolerance: SANDPILE_TOLERANCE,
        }
    }

    /// Point masses on a box around them.
    pub fn from_masses(m: Resolution, masses: &[(Site, f64)]) -> Self {
        let mut b = SiteBox::new(0, 0, 0, 0);
        for (z, _) in masses {
            b = b.union(&SiteBox::new(z.x, z.y, z.x, z.y));
        }
        let mut grid = Grid::new(b.expand(2), 0.0);
        for &(z, v) in masses {
            grid[z] += v;
        }
        SandpileState::new(m, grid)
    }

    pub fn total(&self) -> f64 {
        // Neumaier summation keeps the conservation check meaningful.
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for &v in self.mass.data() {
            let t = s + v;
            if s.abs() >= v.abs() {
                c += (s - t) + v;
            } else {
                c += (v - t) + s;
            }
            s = t;
        }
        s + c
    }

    pub fn max_excess(&self) -> f64 {
        self.mass
            .data()
            .iter()
            .map(|&v| v - 1.0)
            .fold(0.0, f64::max)
    }

    pub fn occupied(&self) -> SiteSet {
        let mut out = SiteSet::new(self.mass.bounds());
        for (z, &v) in self.mass.iter() {
            if v >= OCCUPIED_THRESHOLD {
                out.insert(z);
            }
        }
        out
    }

    fn touches_rim(&self, margin: i32) -> bool {
        let b = self.mass.bounds();
        self.mass.iter().any(|(z, &v)| {
            v > 0.0
                && (z.x - b.x0 < margin
                    || b.x1 - z.x < margin
                    || z.y - b.y0 < margin
                    || b.y1 - z.y < margin)
        })
    }

    fn grow(&mut self) {
        let b = self.mass.bounds();
        let pad = (b.width().max(b.height()) / 4 + 4) as i32;
        self.mass = self.mass.resized(b.expand(pad), 0.0);
    }
}

/// Stabilizes the sandpile; returns the final state and its fully occupied sites.
pub fn stabilize_sandpile(
    initial: &SandpileState,
    schedule: Schedule,
    max_iterations: usize,
) -> Result<(SandpileState, SiteSet)> {
    let mut state = initial.clone();
    loop {
        let result = match schedule {
            Schedule::Odometer => odometer(&state, max_iterations),
            Schedule::Sweep => topple_sweep(&state, max_iterations),
            Schedule::LargestFirst => topple_largest(&state, max_iterations),
        }?;
        match result {
            Some(done) => {
                let occ = done.occupied();
                return Ok((done, occ));
            }
            None => state.grow(),
        }
    }
}

/// Returns `None` if the mass reaches the rim and the grid must grow.
fn odometer(state: &SandpileState, max_iterations: usize) -> Result<Option<SandpileState>> {
    let grid = &state.mass;
    let (w, h) = (grid.width(), grid.height());
    if w < 3 || h < 3 {
        return Ok(None);
    }
    let sigma = grid.data();
    let mut u = vec![0.0f64; w * h];
    let n = w.max(h) as f64;
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / n).sin());
    let tol = state.tolerance * 0.1;
    let mut converged = false;
    for _ in 0..max_iterations {
        let mut change = 0.0f64;
        for color in 0..2 {
            for y in 1..h - 1 {
                let start = 1 + (y + color + 1) % 2;
                let row = y * w;
                let mut x = start;
                while x < w - 1 {
                    let i = row + x;
                    let avg = 0.25 * (u[i - 1] + u[i + 1] + u[i - w] + u[i + w]);
                    let target = sigma[i] - 1.0 + avg;
                    let next = ((1.0 - omega) * u[i] + omega * target).max(0.0);
                    change = change.max((next - u[i]).abs());
                    u[i] = next;
                    x += 2;
                }
            }
        }
        if change <= tol {
            // Confirm with an unrelaxed residual.
            let mut resid = 0.0f64;
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let i = y * w + x;
                    let avg = 0.25 * (u[i - 1] + u[i + 1] + u[i - w] + u[i + w]);
                    resid = resid.max((u[i] - (sigma[i] - 1.0 + avg).max(0.0)).abs());
                }
            }
            if resid <= state.tolerance {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::SandpileDiverged {
            iterations: max_iterations,
            excess: f64::NAN,
        });
    }
    let mut out = state.clone();
    let nu = out.mass.data_mut();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if u[i] == 0.0 {
                continue;
            }
            nu[i] -= u[i];
            let share = 0.25 * u[i];
            nu[i - 1] += share;
            nu[i + 1] += share;
            nu[i - w] += share;
            nu[i + w] += share;
        }
    }
    if out.touches_rim(2) {
        return Ok(None);
    }
    Ok(Some(out))
}

fn topple_sweep(state: &SandpileState, max_iterations: usize) -> Result<Option<SandpileState>> {
    let mut out = state.clone();
    let b = out.mass.bounds();
    let limit = 1.0 + out.tolerance;
    for _ in 0..max_iterations {
        let mut any = false;
        for y in b.y0..=b.y1 {
            for x in b.x0..=b.x1 {
                let z = Site::new(x, y);
                let v = out.mass[z];
                if v > limit {
                    if !b.expand(-1).contains(z) {
                        return Ok(None);
                    }
                    any = true;
                    let share = 0.25 * (v - 1.0);
                    out.mass[z] = 1.0;
                    for w in neighbors(z) {
                        out.mass[w] += share;
                    }
                }
            }
        }
        if !any {
            return Ok(if out.touches_rim(1) { None } else { Some(out) });
        }
    }
    Err(Error::SandpileDiverged {
        iterations: max_iterations,
        excess: out.max_excess(),
    })
}

struct Excess(f64, Site);

impl PartialEq for Excess {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Excess {}
impl PartialOrd for Excess {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Excess {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then_with(|| o.1.cmp(&self.1))
    }
}

fn topple_largest(state: &SandpileState, max_iterations: usize) -> Result<Option<SandpileState>> {
    let mut out = state.clone();
    let b = out.mass.bounds();
    let limit = 1.0 + out.tolerance;
    let mut heap: BinaryHeap<Excess> = out
        .mass
        .iter()
        .filter(|(_, &v)| v > limit)
        .map(|(z, &v)| Excess(v, z))
        .collect();
    let mut topples = 0usize;
    while let Some(Excess(v, z)) = heap.pop() {
        if out.mass[z] != v || v <= limit {
            continue;
        }
        if !b.expand(-1).contains(z) {
            return Ok(None);
        }
        topples += 1;
        if topples > max_iterations {
            return Err(Error::SandpileDiverged {
                iterations: max_iterations,
                excess: out.max_excess(),
            });
        }
        let share = 0.25 * (v - 1.0);
        out.mass[z] = 1.0;
        for w in neighbors(z) {
            let nv = out.mass[w] + share;
            out.mass[w] = nv;
            if nv > limit {
                heap.push(Excess(nv, w));
            }
        }
    }
    Ok(if out.touches_rim(1) { None } else { Some(out) })
}
