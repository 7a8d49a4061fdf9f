//! Concentrated mass distributions and their discretization into ordered
//! source sequences.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{dist, sites_in, Point, Region, Resolution, Shape, Site};

/// How a source family's region grows with its own volume parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Disk of area `u` centered at the given point.
    DiskCentered(Point),
    /// Homothetic copies of a polygon about `center`, scaled to area `u`.
    AffinePolygons { center: Point, vertices: Vec<Point> },
    /// Disk of area `area_factor · u`. Only useful for exercising validation.
    Disk { center: Point, area_factor: f64 },
}

impl Growth {
    /// The region at volume parameter `u`; empty at `u = 0`.
    pub fn region(&self, u: f64) -> Region {
        if u <= 0.0 {
            return Region::empty();
        }
        match self {
            Growth::DiskCentered(c) => Region::disk(*c, (u / std::f64::consts::PI).sqrt()),
            Growth::Disk {
                center,
                area_factor,
            } => Region::disk(*center, (area_factor * u / std::f64::consts::PI).sqrt()),
            Growth::AffinePolygons { center, vertices } => {
                let base = Region::Polygon(vertices.clone()).area();
                let k = (u / base).sqrt();
                Region::Polygon(
                    vertices
                        .iter()
                        .map(|v| {
                            [
                                center[0] + k * (v[0] - center[0]),
                                center[1] + k * (v[1] - center[1]),
                            ]
                        })
                        .collect(),
                )
            }
        }
    }
}

/// A family's share `s_i(s)` of the global volume `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    /// `s_i(s) = min(w·s, T_i)`.
    Proportional(f64),
    /// Grows at unit rate on `[start, end]`, constant elsewhere.
    Sequential([f64; 2]),
}

impl Rate {
    pub fn share(&self, s: f64, t_i: f64) -> f64 {
        match self {
            Rate::Proportional(w) => (w * s).clamp(0.0, t_i),
            Rate::Sequential([a, b]) => (s - a).clamp(0.0, (b - a).min(t_i)),
        }
    }

    /// Smallest global time at which the share reaches `u`.
    pub fn first_time(&self, u: f64) -> f64 {
        match self {
            Rate::Proportional(w) => u / w,
            Rate::Sequential([a, _]) => a + u,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    #[serde(rename = "T")]
    pub total: f64,
    pub growth: Growth,
    pub rate: Rate,
}

impl Family {
    pub fn region_at(&self, s: f64) -> Region {
        self.growth.region(self.rate.share(s, self.total))
    }
}

/// Initial domain plus growing source families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    #[serde(rename = "D0")]
    pub d0: Region,
    pub families: Vec<Family>,
}

impl FlowSpec {
    /// Unit disk with `n` concentric source disks sharing the volume equally,
    /// each growing to radius 1/2.
    pub fn concentric_disks(n: usize) -> Self {
        let quarter = std::f64::consts::FRAC_PI_4;
        FlowSpec {
            d0: Region::disk([0.0, 0.0], 1.0),
            families: (0..n)
                .map(|_| Family {
                    total: quarter,
                    growth: Growth::DiskCentered([0.0, 0.0]),
                    rate: Rate::Proportional(1.0 / n as f64),
                })
                .collect(),
        }
    }

    pub fn total(&self) -> f64 {
        self.families.iter().map(|f| f.total).sum()
    }

    fn check_time(&self, s: f64) -> Result<()> {
        let total = self.total();
        if !(s >= -1e-12 && s <= total * (1.0 + 1e-12) + 1e-12) {
            return Err(Error::TimeOutOfRange { s, total });
        }
        Ok(())
    }

    /// `σ_s(p)`: the D0 indicator plus the number of source regions covering `p`.
    pub fn sigma(&self, s: f64, p: Point) -> Result<u32> {
        self.check_time(s)?;
        Ok(self.sigma_unchecked(s, p))
    }

    fn sigma_unchecked(&self, s: f64, p: Point) -> u32 {
        let base = u32::from(self.d0.contains(p));
        base + self
            .families
            .iter()
            .filter(|f| f.region_at(s).contains(p))
            .count() as u32
    }

    /// Lattice values of `σ_s` over the sites of D0 (the only place σ is nonzero).
    pub fn sigma_lattice(&self, s: f64, m: Resolution) -> Result<Vec<(Site, u32)>> {
        self.check_time(s)?;
        let sites = sites_in(&self.d0, m)?;
        Ok(sites
            .iter()
            .map(|z| (z, self.sigma_unchecked(s, z.to_point(m))))
            .filter(|&(_, v)| v > 0)
            .collect())
    }

    /// When D0 is a disk and every family is a disk centered at D0's center,
    /// the flow is the disk of area `area(D0) + s`.
    pub fn analytic_disk(&self, s: f64) -> Option<Region> {
        let Region::Disk { center, radius } = self.d0 else {
            return None;
        };
        let concentric = self.families.iter().all(|f| match f.growth {
            Growth::DiskCentered(c) => c == center,
            Growth::Disk {
                center: c,
                area_factor,
            } => c == center && area_factor == 1.0,
            _ => false,
        });
        concentric
            .then(|| Region::disk(center, (radius * radius + s / std::f64::consts::PI).sqrt()))
    }

    pub fn validate(&self) -> Result<()> {
        let report = validate_flow(self, 16)?;
        if report.passed() {
            Ok(())
        } else {
            Err(Error::InvalidFlow(report))
        }
    }
}

/// One condition's outcome in a flow validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Condition label: "1".."4" for the per-family conditions, "rates" for
    /// the partition of volume among families, "D0" for the initial domain.
    pub condition: String,
    pub passed: bool,
    /// Largest observed violation (0 when satisfied).
    pub worst: f64,
    pub location: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_conditions(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.condition.as_str())
            .collect();
        v.dedup();
        v
    }

    fn record(&mut self, condition: &str, worst: f64, tol: f64, location: String) {
        let passed = worst <= tol;
        if let Some(c) = self.checks.iter_mut().find(|c| c.condition == condition) {
            if worst > c.worst {
                c.worst = worst;
                c.location = location;
            }
            c.passed &= passed;
        } else {
            self.checks.push(Check {
                condition: condition.into(),
                passed,
                worst: worst.max(0.0),
                location,
            });
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "condition {}: {} (worst {:.3e} at {})",
                c.condition,
                if c.passed { "ok" } else { "FAILED" },
                c.worst,
                c.location
            )?;
        }
        Ok(())
    }
}

/// Checks the defining conditions of a concentrated mass distribution at
/// `samples` evenly spaced times.
pub fn validate_flow(spec: &FlowSpec, samples: usize) -> Result<ValidationReport> {
    if samples < 2 {
        return Err(Error::Fit("validation needs at least 2 samples".into()));
    }
    let mut rep = ValidationReport::default();
    match spec.d0.validate() {
        Ok(()) => rep.record("D0", 0.0, 0.0, "initial domain".into()),
        Err(e) => {
            rep.record("D0", 1.0, 0.0, e.to_string());
            return Ok(rep);
        }
    }
    let total = spec.total();
    let grid = |t: f64| (0..samples).map(move |k| t * k as f64 / (samples - 1) as f64);

    for (i, fam) in spec.families.iter().enumerate() {
        if !(fam.total.is_finite() && fam.total >= 0.0) {
            rep.record(
                "1",
                f64::INFINITY,
                0.0,
                format!("family {i}: T = {}", fam.total),
            );
            continue;
        }
        if let Growth::AffinePolygons { vertices, .. } = &fam.growth {
            if let Err(e) = Region::Polygon(vertices.clone()).validate() {
                rep.record("1", f64::INFINITY, 0.0, format!("family {i}: {e}"));
                continue;
            }
        }
        // 1: volume
        for u in grid(fam.total) {
            let a = fam.growth.region(u).area();
            let tol = 1e-9 * (1.0 + u);
            rep.record("1", (a - u).abs(), tol, format!("family {i}, u = {u:.4}"));
        }
        // 2: compact containment in D0, via boundary samples of the final region
        let last = fam.growth.region(fam.total);
        let spacing = (last.perimeter() / 512.0).max(1e-6);
        let margin = last
            .boundary_points(spacing)
            .iter()
            .map(|&p| -spec.d0.signed_distance(p))
            .fold(f64::INFINITY, f64::min);
        let worst = if margin.is_finite() {
            (1e-9 - margin).max(0.0)
        } else {
            0.0
        };
        rep.record("2", worst, 0.0, format!("family {i}, margin {margin:.3e}"));
        // 3: nested growth
        let times: Vec<f64> = grid(fam.total).collect();
        for w in times.windows(2) {
            let (a, b) = (fam.growth.region(w[0]), fam.growth.region(w[1]));
            let sp = (a.perimeter() / 256.0).max(1e-6);
            let worst = a
                .boundary_points(sp)
                .iter()
                .map(|&p| b.signed_distance(p))
                .fold(0.0, f64::max);
            rep.record(
                "3",
                worst,
                1e-9,
                format!("family {i}, u = {:.4} -> {:.4}", w[0], w[1]),
            );
        }
        // 4: bounded arclength
        let len = times
            .iter()
            .map(|&u| fam.growth.region(u).perimeter())
            .fold(0.0, f64::max);
        rep.record(
            "4",
            if len.is_finite() { 0.0 } else { f64::INFINITY },
            0.0,
            format!("family {i}, max perimeter {len:.4}"),
        );
    }

    // Rates: each share nondecreasing in [0, T_i], summing to s, reaching T_i at T.
    let mut prev = vec![0.0; spec.families.len()];
    for s in grid(total) {
        let shares: Vec<f64> = spec
            .families
            .iter()
            .map(|f| f.rate.share(s, f.total))
            .collect();
        let sum: f64 = shares.iter().sum();
        rep.record(
            "rates",
            (sum - s).abs(),
            1e-9 * (1.0 + total),
            format!("s = {s:.4}"),
        );
        for (i, (&now, &before)) in shares.iter().zip(&prev).enumerate() {
            rep.record(
                "rates",
                (before - now).max(0.0),
                1e-12,
                format!("family {i} decreasing at s = {s:.4}"),
            );
        }
        prev = shares;
    }
    Ok(rep)
}

/// Ordered source points `z_{m,1}, …` with their release times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSequence {
    pub m: Resolution,
    pub entries: Vec<(Site, f64)>,
}

impl SourceSequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn site(&self, i: usize) -> Site {
        self.entries[i].0
    }

    /// Number of entries released at or before `s`.
    pub fn count_through(&self, s: f64) -> usize {
        self.entries.partition_point(|e| e.1 <= s)
    }

    /// Site multiplicities over the whole sequence.
    pub fn multiplicities(&self) -> BTreeMap<Site, usize> {
        let mut out = BTreeMap::new();
        for (z, _) in &self.entries {
            *out.entry(*z).or_insert(0) += 1;
        }
        out
    }

    /// Reverses the order within each run of equal release times, leaving the
    /// multiset of releases unchanged.
    pub fn reverse_ties(&self) -> SourceSequence {
        let mut entries = Vec::with_capacity(self.entries.len());
        for run in self.entries.chunk_by(|a, b| a.1 == b.1) {
            entries.extend(run.iter().rev().copied());
        }
        SourceSequence { m: self.m, entries }
    }

    /// CSV with columns `index,x,y,s`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,x,y,s")?;
        for (i, (z, s)) in self.entries.iter().enumerate() {
            writeln!(w, "{},{},{},{:.17e}", i + 1, z.x, z.y, s)?;
        }
        Ok(())
    }
}

/// Entry time of `p` into the family's growing region, in family volume
/// units, found by bisection. `None` if `p` is never covered.
fn entry_volume(growth: &Growth, total: f64, p: Point) -> Result<Option<f64>> {
    if !growth.region(total).contains(p) {
        return Ok(None);
    }
    if let Growth::DiskCentered(c) = growth {
        let r = (dist(p, *c) - crate::lattice::MEMBERSHIP_EPS).max(0.0);
        let u = std::f64::consts::PI * r * r;
        if u > 0.0 && growth.region(u).contains(p) {
            return Ok(Some(u));
        }
    }
    let (mut lo, mut hi) = (0.0, total);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if growth.region(mid).contains(p) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * total.max(1.0) {
            break;
        }
    }
    if !growth.region(hi).contains(p) {
        return Err(Error::StalledPartition(hi));
    }
    Ok(Some(hi))
}

/// Assigns release times on the partition cell `[lo, hi]` by bisecting it
/// until entries with distinct entry times fall in different subcells.
fn release_in_cell(
    lo: f64,
    hi: f64,
    items: &mut [(f64, Site)],
    depth: u32,
    out: &mut Vec<(Site, f64)>,
) {
    if items.is_empty() {
        return;
    }
    let first = items[0].0;
    if depth == 40 || items.iter().all(|e| e.0 == first) {
        out.extend(items.iter().map(|e| (e.1, hi)));
        return;
    }
    let mid = 0.5 * (lo + hi);
    let split = items.partition_point(|e| e.0 <= mid);
    let (left, right) = items.split_at_mut(split);
    release_in_cell(lo, mid, left, depth + 1, out);
    release_in_cell(mid, hi, right, depth + 1, out);
}

/// Discretizes the flow at resolution `m`.
///
/// Every unit of lattice mass gained between time 0 and T becomes one entry.
/// Release times are partition times of the uniform mesh `T/(4m²)`, refined
/// by bisection where a mesh cell holds several distinct entry times. Entries
/// released together are ordered by site.
pub fn discretize(spec: &FlowSpec, m: Resolution) -> Result<SourceSequence> {
    spec.validate()?;
    let total = spec.total();
    let mut entries: Vec<(f64, Site)> = Vec::new();
    for fam in &spec.families {
        if fam.total <= 0.0 {
            continue;
        }
        let initial = fam.region_at(0.0);
        let sites = sites_in(&fam.growth.region(fam.total), m)?;
        for z in sites.iter() {
            let p = z.to_point(m);
            if initial.contains(p) {
                continue;
            }
            if let Some(u) = entry_volume(&fam.growth, fam.total, p)? {
                let s = fam.rate.first_time(u).clamp(0.0, total);
                entries.push((s, z));
            }
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mesh = total / (4.0 * m.as_f64() * m.as_f64());
    let mut out = Vec::with_capacity(entries.len());
    let mut i = 0;
    while i < entries.len() {
        let k = ((entries[i].0 / mesh).ceil() as i64).max(0);
        let hi = (k as f64 * mesh).min(total);
        let lo = ((k - 1).max(0) as f64 * mesh).min(hi);
        let j = i + entries[i..].partition_point(|e| e.0 <= hi);
        let j = j.max(i + 1);
        release_in_cell(lo, hi, &mut entries[i..j], 0, &mut out);
        i = j;
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(SourceSequence { m, entries: out })
}

/// Boundary-length and speed bounds of a flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConstants {
    pub u: f64,
    pub big_u: f64,
    pub v: f64,
    pub big_v: f64,
}

/// Provides the deterministic flow `D_s` as a shape.
pub trait FlowSampler {
    type Snapshot: Shape;
    fn snapshot(&self, s: f64) -> Result<Self::Snapshot>;
    /// Boundary points at arclength spacing at most `spacing`.
    fn boundary(&self, snap: &Self::Snapshot, spacing: f64) -> Vec<Point>;
    fn perimeter(&self, snap: &Self::Snapshot) -> f64;
}

/// Empirical `u, U` (boundary arclength range) and `v, V` (outward speed
/// range) of a flow over `samples` evenly spaced times.
pub fn estimate_flow_constants<F: FlowSampler>(
    spec: &FlowSpec,
    sampler: &F,
    samples: usize,
    spacing: f64,
) -> Result<FlowConstants> {
    let total = spec.total();
    if !(total > 0.0) {
        return Err(Error::DegenerateFlow("total volume is zero".into()));
    }
    let samples = samples.max(2);
    let times: Vec<f64> = (0..samples)
        .map(|k| total * k as f64 / (samples - 1) as f64)
        .collect();
    let snaps: Vec<F::Snapshot> = times
        .iter()
        .map(|&s| sampler.snapshot(s))
        .collect::<Result<_>>()?;
    let lengths: Vec<f64> = snaps.iter().map(|s| sampler.perimeter(s)).collect();
    let (u, big_u) = lengths
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &l| (a.min(l), b.max(l)));
    let mut v = f64::INFINITY;
    let mut big_v = 0.0f64;
    for i in 0..samples {
        let inner = sampler.boundary(&snaps[i], spacing);
        for j in i + 1..samples {
            // d(D_{s1}^c, D_{s0}) = min over ∂D_{s0} of the depth inside D_{s1}.
            let gap = inner
                .iter()
                .map(|&p| -snaps[j].signed_distance(p))
                .fold(f64::INFINITY, f64::min)
                .max(0.0);
            let scale = (1.0 + times[j]).sqrt() - (1.0 + times[i]).sqrt();
            let ratio = gap / scale;
            v = v.min(ratio);
            big_v = big_v.max(ratio);
        }
    }
    Ok(FlowConstants { u, big_u, v, big_v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(m: i64) -> Resolution {
        Resolution::new(m).unwrap()
    }

    #[test]
    fn concentric_disks_validate() {
        for n in [1, 3] {
            let rep = validate_flow(&FlowSpec::concentric_disks(n), 11).unwrap();
            assert!(rep.passed(), "{rep}");
        }
    }

    #[test]
    fn touching_source_fails_containment() {
        let mut spec = FlowSpec::concentric_disks(1);
        // radius 1 at u = π: touches the unit circle
        spec.families[0].total = std::f64::consts::PI;
        spec.families[0].rate = Rate::Proportional(1.0);
        let rep = validate_flow(&spec, 5).unwrap();
        assert_eq!(rep.failed_conditions(), vec!["2"]);
    }

    #[test]
    fn wrong_volume_fails_condition_one() {
        let mut spec = FlowSpec::concentric_disks(1);
        spec.families[0].growth = Growth::Disk {
            center: [0.0, 0.0],
            area_factor: 2.0,
        };
        let rep = validate_flow(&spec, 5).unwrap();
        assert_eq!(rep.failed_conditions(), vec!["1"]);
        assert!(matches!(spec.validate(), Err(Error::InvalidFlow(_))));
    }

    #[test]
    fn sigma_values() {
        let spec = FlowSpec::concentric_disks(3);
        assert_eq!(spec.sigma(0.1, [0.0, 0.0]).unwrap(), 4);
        assert_eq!(spec.sigma(0.1, [5.0, 0.0]).unwrap(), 0);
        assert_eq!(spec.sigma(0.0, [0.3, 0.3]).unwrap(), 1);
        assert_eq!(spec.sigma(0.0, [0.0, 0.0]).unwrap(), 1);
        assert!(matches!(
            spec.sigma(10.0, [0.0, 0.0]),
            Err(Error::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn discretize_single_family_counts_disk_sites() {
        let spec = FlowSpec::concentric_disks(1);
        let seq = discretize(&spec, res(10)).unwrap();
        // Closed disk of radius 1/2 at spacing 1/10: x² + y² ≤ 25.
        let brute = (-5..=5i32)
            .flat_map(|x| (-5..=5i32).map(move |y| (x, y)))
            .filter(|(x, y)| x * x + y * y <= 25)
            .count();
        assert_eq!(brute, 81);
        assert_eq!(seq.len(), brute);
        assert!(seq.entries.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(seq.multiplicities().values().all(|&k| k == 1));
        // The centre has radius 0 and enters first.
        assert_eq!(seq.entries[0].0, Site::new(0, 0));
    }

    #[test]
    fn multiplicities_match_sigma_gain() {
        let spec = FlowSpec::concentric_disks(3);
        let m = res(12);
        let seq = discretize(&spec, m).unwrap();
        let mult = seq.multiplicities();
        let t = spec.total();
        for (z, s_t) in spec.sigma_lattice(t, m).unwrap() {
            let gain = s_t - spec.sigma(0.0, z.to_point(m)).unwrap();
            assert_eq!(mult.get(&z).copied().unwrap_or(0), gain as usize, "{z}");
        }
    }

    #[test]
    fn prefix_mass_matches_sigma() {
        let spec = FlowSpec::concentric_disks(2);
        let m = res(16);
        let seq = discretize(&spec, m).unwrap();
        let mesh = spec.total() / (4.0 * 256.0);
        let base: u32 = spec
            .sigma_lattice(0.0, m)
            .unwrap()
            .iter()
            .map(|e| e.1)
            .sum();
        for k in 0..=20 {
            let s = spec.total() * k as f64 / 20.0;
            let mass: u32 = spec.sigma_lattice(s, m).unwrap().iter().map(|e| e.1).sum();
            let gained = (mass - base) as usize;
            assert!(seq.count_through(s) <= gained, "s = {s}");
            assert!(seq.count_through(s + mesh) >= gained, "s = {s}");
        }
    }

    #[test]
    fn n_m_scales_with_area() {
        let spec = FlowSpec::concentric_disks(1);
        for m in [10, 20, 40] {
            let n = discretize(&spec, res(m)).unwrap().len() as f64;
            let mf = m as f64;
            assert!((n / (mf * mf) - spec.total()).abs() <= 10.0 / mf, "m = {m}");
        }
    }

    #[test]
    fn reverse_ties_preserves_multiset() {
        let spec = FlowSpec::concentric_disks(2);
        let seq = discretize(&spec, res(16)).unwrap();
        let rev = seq.reverse_ties();
        assert_eq!(seq.multiplicities(), rev.multiplicities());
        assert_ne!(seq.entries, rev.entries);
    }

    #[test]
    fn flow_spec_json() {
        let txt = r#"{"D0": {"disk": {"center": [0,0], "radius": 1}},
            "families": [{"T": 0.5, "growth": {"disk_centered": [0.1, 0]}, "rate": {"sequential": [0, 0.5]}},
                         {"T": 0.25, "growth": {"affine_polygons": {"center": [-0.3, 0], "vertices": [[-0.4,-0.1],[-0.2,-0.1],[-0.3,0.1]]}}, "rate": {"sequential": [0.5, 0.75]}}]}"#;
        let spec: FlowSpec = serde_json::from_str(txt).unwrap();
        let rep = validate_flow(&spec, 9).unwrap();
        assert!(rep.passed(), "{rep}");
        assert_eq!(spec.analytic_disk(0.1), None);
        let seq = discretize(&spec, res(20)).unwrap();
        let n = seq.len() as f64;
        assert!((n / 400.0 - 0.75).abs() < 0.1);
    }
}
