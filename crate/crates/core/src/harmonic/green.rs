use serde::{Deserialize, Serialize};

use super::dirichlet::{DirichletProblem, Exit};
use super::{FieldKind, HarmonicField, PoleContext, Symmetry};
use crate::error::{Error, Result};
use crate::lattice::{Point, Region, Resolution, Shape, Site, SiteSet};
use crate::potential::PotentialTable;

fn field_from(
    p: &DirichletProblem,
    u: &[f64],
    m: Resolution,
    pole: Option<Site>,
    kind: FieldKind,
) -> HarmonicField {
    let (domain, values) = p.to_grid(u);
    HarmonicField {
        m,
        domain,
        values,
        pole,
        kind,
    }
}

/// How a walk may enter the pole `ζ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleEntry {
    /// Only along the edge from `ζ′`; steps into `ζ` from other neighbors
    /// are stopped just short of it, with value 0.
    #[default]
    Slit,
    /// From any neighbor.
    AllSides,
}

/// `H̃_ζ(z) = P[walk from z leaves the lattice flow domain at ζ]`.
///
/// The domain is `d_tau` without `ζ`, and `ζ` must be adjacent to it.
pub fn poisson_tilde(
    ctx: &PoleContext,
    d_tau: &SiteSet,
    entry: PoleEntry,
) -> Result<HarmonicField> {
    let mut interior = d_tau.clone();
    interior.remove(ctx.zeta);
    let (zeta, inward) = (ctx.zeta, ctx.inward());
    if !interior.contains(inward) {
        return Err(Error::Pole(format!(
            "inward neighbor {inward} of the pole is not in the domain"
        )));
    }
    let hit = |a: Site, b: Site| b == zeta && (entry == PoleEntry::AllSides || a == inward);
    let p = DirichletProblem::lattice_edges(
        &interior,
        |a, b| f64::from(u8::from(hit(a, b))),
        |b| f64::from(u8::from(b == zeta)),
    )?;
    let (u, _) = p.solve()?;
    Ok(field_from(
        &p,
        &u,
        ctx.m,
        Some(zeta),
        FieldKind::PoissonTilde,
    ))
}

fn table_lookup(table: &PotentialTable, z: Site) -> f64 {
    table.get(z).unwrap_or(f64::NAN)
}

fn check_table(table: &PotentialTable, interior: &SiteSet, y: Site) -> Result<()> {
    let b = interior.bounds().expand(1);
    for corner in [
        Site::new(b.x0, b.y0),
        Site::new(b.x1, b.y0),
        Site::new(b.x0, b.y1),
        Site::new(b.x1, b.y1),
    ] {
        table.get(corner - y)?;
    }
    Ok(())
}

/// `G(y, z) = E g(W_z(exit) − y) − g(z − y)` on the lattice model.
pub fn green_discrete(
    table: &PotentialTable,
    interior: &SiteSet,
    y: Site,
    m: Resolution,
) -> Result<HarmonicField> {
    if !interior.contains(y) {
        return Err(Error::OutsideField(y));
    }
    check_table(table, interior, y)?;
    let p = DirichletProblem::lattice(interior, |b| table_lookup(table, b - y))?;
    let (mut u, _) = p.solve()?;
    for (v, &z) in u.iter_mut().zip(p.interior()) {
        *v -= table.at(z - y);
    }
    let mut field = field_from(&p, &u, m, Some(y), FieldKind::Green);
    for &(b, _) in p.boundary_values() {
        field.values[b] = 0.0;
    }
    Ok(field)
}

/// Expected number of visits to `y` before leaving `interior`, as a function
/// of the start `z`. Solves `Δ_h v = −δ_y` with zero boundary data.
pub fn green_visits(interior: &SiteSet, y: Site, m: Resolution) -> Result<HarmonicField> {
    let mut p = DirichletProblem::lattice(interior, |_| 0.0)?;
    p.add_source(y, 1.0)?;
    let (u, _) = p.solve()?;
    Ok(field_from(&p, &u, m, Some(y), FieldKind::Green))
}

/// Exit distribution of a walk started at `z`: each boundary site receives a
/// quarter of the expected visits to each of its interior neighbors.
pub fn exit_distribution(interior: &SiteSet, z: Site) -> Result<Vec<(Site, f64)>> {
    let m = Resolution::new(1)?;
    let visits = green_visits(interior, z, m)?;
    let mut out: Vec<(Site, f64)> = interior
        .outer_boundary()
        .iter()
        .map(|b| {
            let p: f64 = crate::lattice::neighbors(b)
                .iter()
                .filter(|w| interior.contains(**w))
                .map(|&w| visits.values[w])
                .sum();
            (b, 0.25 * p)
        })
        .collect();
    out.retain(|&(_, p)| p > 0.0);
    Ok(out)
}

/// `G(y, ·)` on the grid model of `shape`: walks exit on the boundary curve,
/// where `g` is read by linear interpolation along the crossing edge.
pub fn green_grid(
    table: &PotentialTable,
    shape: &(impl Shape + ?Sized),
    m: Resolution,
    y: Site,
) -> Result<HarmonicField> {
    let lookup = |e: Exit| {
        let a = table_lookup(table, e.inside - y);
        let b = table_lookup(table, e.outside - y);
        (1.0 - e.t) * a + e.t * b
    };
    let p = DirichletProblem::grid(shape, m, lookup)?;
    if p.slot(y).is_none() {
        return Err(Error::OutsideField(y));
    }
    for &z in p.interior() {
        table.get(z - y)?;
    }
    let (mut u, _) = p.solve()?;
    for (v, &z) in u.iter_mut().zip(p.interior()) {
        *v -= table.at(z - y);
    }
    Ok(field_from(&p, &u, m, Some(y), FieldKind::Green))
}

/// Green's function of the disk of radius `R` about the origin, normalized
/// so that `G(x, y) ≈ −(2/π) ln|x − y|` near the diagonal.
pub fn green_disk_continuum(r: f64, x: Point, y: Point) -> Result<f64> {
    let n = |p: Point| p[0].hypot(p[1]);
    if n(x) > r * (1.0 + 1e-12) || n(y) >= r {
        return Err(Error::Pole(format!(
            "points {x:?}, {y:?} must lie in the disk of radius {r}"
        )));
    }
    let d = n([x[0] - y[0], x[1] - y[1]]);
    if d == 0.0 {
        return Err(Error::Pole(
            "Green's function is singular on the diagonal".into(),
        ));
    }
    let ny = n(y);
    let k = std::f64::consts::FRAC_2_PI;
    if ny == 0.0 {
        return Ok(k * (r / n(x)).ln());
    }
    let s = r * r / (ny * ny);
    let image = [s * y[0], s * y[1]];
    Ok(k * (ny * n([x[0] - image[0], x[1] - image[1]]) / (r * d)).ln())
}

/// Poisson kernel of the same disk at the boundary point `zeta`, in the same
/// normalization: the inward normal derivative of the Green's function.
pub fn poisson_kernel_disk(r: f64, zeta: Point, z: Point) -> f64 {
    let dz = [z[0] - zeta[0], z[1] - zeta[1]];
    std::f64::consts::FRAC_2_PI * (r * r - z[0] * z[0] - z[1] * z[1])
        / (r * (dz[0] * dz[0] + dz[1] * dz[1]))
}

/// Spread of a ratio of two fields over a set of sites.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    pub sites: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl RatioReport {
    fn from_values(mut v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::EmptySet);
        }
        v.sort_by(f64::total_cmp);
        Ok(RatioReport {
            sites: v.len(),
            min: v[0],
            max: v[v.len() - 1],
            median: v[v.len() / 2],
        })
    }

    /// Largest relative deviation from the median.
    pub fn spread(&self) -> f64 {
        ((self.max - self.median) / self.median)
            .abs()
            .max(((self.median - self.min) / self.median).abs())
    }
}

/// `H̃_ζ(z)/G(ζ′, z)` over interior sites at distance at least `away`
/// from `ζ`.
pub fn last_exit_ratio(
    ctx: &PoleContext,
    ptilde: &HarmonicField,
    green: &HarmonicField,
    interior: &SiteSet,
    away: f64,
) -> Result<RatioReport> {
    let m = ctx.m.as_f64();
    let mut v = Vec::new();
    for z in interior.iter() {
        if z == ctx.zeta || z.dist(ctx.zeta) / m < away {
            continue;
        }
        let g = green.get(z)?;
        if g > 0.0 {
            v.push(ptilde.get(z)? / g);
        }
    }
    RatioReport::from_values(v)
}

/// `m·G(ζ′, z)/J_ζ(z)` on a centered disk of radius `r`, over field sites
/// at distance at least `away` from both the boundary and `ζ`.
pub fn poisson_ratio_check(
    ctx: &PoleContext,
    green: &HarmonicField,
    r: f64,
    away: f64,
) -> Result<RatioReport> {
    let m = ctx.m.as_f64();
    let zp = ctx.zeta_point();
    let mut v = Vec::new();
    for z in green.domain.iter() {
        let p = z.to_point(ctx.m);
        let rho = p[0].hypot(p[1]);
        if r - rho < away || crate::lattice::dist(p, zp) < away {
            continue;
        }
        v.push(m * green.values[z] / poisson_kernel_disk(r, zp, p));
    }
    RatioReport::from_values(v)
}

/// Errors of the discrete Green's function at one resolution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenLevel {
    pub m: u32,
    pub sites: usize,
    /// Max error on the grid model at distance `≥ α` from boundary and pole.
    pub error: f64,
    /// Same at distance `≥ 2α`.
    pub error_2alpha: f64,
    /// Max error of the lattice model at distance `≥ α`.
    pub lattice_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenConvergence {
    pub radius: f64,
    pub alpha: f64,
    pub levels: Vec<GreenLevel>,
    /// Least-squares `p` in `error ∝ m^{−p}`.
    pub rate: f64,
    /// Error ratios between consecutive resolutions.
    pub ratios: Vec<f64>,
}

/// Compares `G(ζ′, ·)` with the continuum Green's function of the disk of
/// radius `r` about the origin, for a pole at angle `theta`.
pub fn green_convergence_check(
    table: &PotentialTable,
    r: f64,
    theta: f64,
    alpha: f64,
    ms: &[Resolution],
) -> Result<GreenConvergence> {
    let disk = Region::disk([0.0, 0.0], r);
    let mut levels = Vec::new();
    for &m in ms {
        let nhat = [theta.cos(), theta.sin()];
        let zeta = Site::nearest([r * nhat[0], r * nhat[1]], m);
        let y = zeta + Symmetry::normalizing(nhat).invert(Site::new(-1, 0));
        let yp = y.to_point(m);
        if disk.signed_distance(yp) >= 0.0 {
            return Err(Error::Pole(format!(
                "inward neighbor {y} of the pole is not inside the disk"
            )));
        }
        let grid = green_grid(table, &disk, m, y)?;
        let interior = SiteSet::from_sites(grid.domain.iter());
        let lattice = green_discrete(table, &interior, y, m)?;
        let mut level = GreenLevel {
            m: m.get(),
            sites: 0,
            error: 0.0,
            error_2alpha: 0.0,
            lattice_error: 0.0,
        };
        for z in interior.iter() {
            let p = z.to_point(m);
            let sep = (r - p[0].hypot(p[1])).min(crate::lattice::dist(p, yp));
            if sep < alpha {
                continue;
            }
            let exact = green_disk_continuum(r, p, yp)?;
            let e = (grid.values[z] - exact).abs();
            level.sites += 1;
            level.error = level.error.max(e);
            level.lattice_error = level.lattice_error.max((lattice.values[z] - exact).abs());
            if sep >= 2.0 * alpha {
                level.error_2alpha = level.error_2alpha.max(e);
            }
        }
        if level.sites == 0 {
            return Err(Error::EmptySet);
        }
        levels.push(level);
    }
    let ratios = levels.windows(2).map(|w| w[0].error / w[1].error).collect();
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .map(|l| (f64::from(l.m).ln(), l.error.ln()))
        .collect();
    let rate = -least_squares_slope(&pts);
    Ok(GreenConvergence {
        radius: r,
        alpha,
        levels,
        rate,
        ratios,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
