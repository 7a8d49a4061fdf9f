//! Discrete harmonic functions attached to a boundary point `ζ` of the
//! deterministic flow.
//!
//! `H_ζ` is a discrete dipole built from the potential kernel, `F_ζ` its
//! continuum counterpart, `Ω_ζ` the domain on which `H_ζ` is harmonic and
//! controlled, and `H̃_ζ` the Poisson kernel of the lattice flow domain at
//! `ζ`. Fields are stored on rectangles of sites.

mod dirichlet;
mod green;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use dirichlet::{
    edge_crossing, grid_interior, DirichletProblem, Exit, Method, SolveStats, SOLVER_TOLERANCE,
};
pub use green::{
    exit_distribution, green_convergence_check, green_discrete, green_disk_continuum, green_grid,
    green_visits, last_exit_ratio, poisson_kernel_disk, poisson_ratio_check, poisson_tilde,
    GreenConvergence, GreenLevel, PoleEntry, RatioReport,
};

use crate::aggregation::{Landing, WalkObserver};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lattice::{neighbors, Point, Resolution, Shape, Site, SiteBox, SiteSet};
use crate::potential::{Direction, PotentialTable};
use crate::sources::{FlowSpec, SourceSequence};

/// Element of the symmetry group of the square lattice: an optional
/// reflection `y ↦ −y` followed by `rot` quarter turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symmetry {
    pub flip: bool,
    pub rot: u8,
}

impl Symmetry {
    pub const IDENTITY: Symmetry = Symmetry {
        flip: false,
        rot: 0,
    };

    pub fn all() -> impl Iterator<Item = Symmetry> {
        (0..8u8).map(|k| Symmetry {
            flip: k >= 4,
            rot: k % 4,
        })
    }

    pub fn apply(self, z: Site) -> Site {
        let (mut x, mut y) = (z.x, z.y);
        if self.flip {
            y = -y;
        }
        for _ in 0..self.rot {
            (x, y) = (-y, x);
        }
        Site::new(x, y)
    }

    pub fn apply_point(self, p: Point) -> Point {
        let [mut x, mut y] = p;
        if self.flip {
            y = -y;
        }
        for _ in 0..self.rot {
            (x, y) = (-y, x);
        }
        [x, y]
    }

    pub fn invert(self, z: Site) -> Site {
        let (mut x, mut y) = (z.x, z.y);
        for _ in 0..self.rot {
            (x, y) = (y, -x);
        }
        if self.flip {
            y = -y;
        }
        Site::new(x, y)
    }

    /// A symmetry taking `v` into the sector `0 ≤ arg ≤ π/4`.
    pub fn normalizing(v: Point) -> Symmetry {
        Symmetry::all()
            .find(|s| {
                let [x, y] = s.apply_point(v);
                y >= -1e-12 && x - y >= -1e-12
            })
            .expect("the eight images of a vector cover every octant")
    }
}

/// A pole `ζ` on the boundary of the flow domain at time `τ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoleContext {
    pub zeta: Site,
    pub tau: f64,
    /// Outward unit normal at `ζ`, in the original frame.
    pub nhat: Point,
    /// Symmetry carrying `nhat` into the sector `[0, π/4]`.
    pub symmetry: Symmetry,
    /// `nhat` after the symmetry is applied.
    pub direction: Direction,
    pub m: Resolution,
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "R0prime")]
    pub r0_prime: f64,
    /// Smallest distance from a source point to `ζ`.
    #[serde(rename = "R1")]
    pub r1: f64,
}

impl PoleContext {
    pub fn new(
        zeta: Site,
        tau: f64,
        nhat: Point,
        m: Resolution,
        r0: f64,
        r0_prime: f64,
        r1: f64,
    ) -> Result<Self> {
        let len = nhat[0].hypot(nhat[1]);
        if !(len - 1.0).abs().lt(&1e-9) {
            return Err(Error::Pole(format!("normal {nhat:?} is not a unit vector")));
        }
        if !(r0 > 0.0 && r0_prime > 0.0) {
            return Err(Error::Pole(format!(
                "tangent radii must be positive, got R0={r0}, R0'={r0_prime}"
            )));
        }
        if !(r1 > 0.0) {
            return Err(Error::Pole(format!(
                "sources must stay away from the pole, got R1={r1}"
            )));
        }
        let symmetry = Symmetry::normalizing(nhat);
        let [x, y] = symmetry.apply_point(nhat);
        let direction = Direction::from_angle(y.atan2(x))?;
        Ok(PoleContext {
            zeta,
            tau,
            nhat,
            symmetry,
            direction,
            m,
            r0,
            r0_prime,
            r1,
        })
    }

    /// `ζ` in scaled coordinates.
    pub fn zeta_point(&self) -> Point {
        self.zeta.to_point(self.m)
    }

    /// Lattice offset from the pole in the normalized frame.
    pub fn local(&self, z: Site) -> Site {
        self.symmetry.apply(z - self.zeta)
    }

    /// The inward neighbor `ζ′`, one step against the normalized east axis.
    pub fn inward(&self) -> Site {
        self.zeta + self.symmetry.invert(Site::new(-1, 0))
    }

    /// Sites where `Δ_h H_ζ ≠ 0`.
    pub fn singular_sites(&self) -> [Site; 3] {
        [
            self.zeta,
            self.zeta + self.symmetry.invert(Site::new(1, 0)),
            self.zeta + self.symmetry.invert(Site::new(1, 1)),
        ]
    }

    /// `1/(2mR₀)`.
    pub fn threshold(&self) -> f64 {
        1.0 / (2.0 * self.m.as_f64() * self.r0)
    }

    /// Allowance for lattice boundaries, one edge away from the grid boundary.
    pub fn edge_slack(&self) -> f64 {
        let m = self.m.as_f64();
        2.0 / (m * m * self.r0)
    }
}

/// A pole on the boundary of a centered disk flow.
#[derive(Clone, Debug)]
pub struct DiskPole {
    pub zeta: Site,
    pub tau: f64,
    /// Radius of `D_τ`, equal to `|ζ|`.
    pub radius: f64,
    pub nhat: Point,
}

impl DiskPole {
    /// The lattice site nearest to angle `theta` on the boundary of `D_s`,
    /// with `τ` adjusted so that the site lies exactly on `∂D_τ`.
    pub fn new(spec: &FlowSpec, m: Resolution, s: f64, theta: f64) -> Result<Self> {
        let disk = spec
            .analytic_disk(s)
            .ok_or_else(|| Error::Pole("flow is not a family of concentric disks".into()))?;
        let (center, r) = match disk {
            crate::lattice::Region::Disk { center, radius } => (center, radius),
            _ => unreachable!("analytic_disk returns a disk"),
        };
        if center != [0.0, 0.0] {
            return Err(Error::Pole(
                "disk flow must be centered at the origin".into(),
            ));
        }
        let zeta = Site::nearest([r * theta.cos(), r * theta.sin()], m);
        let radius = (zeta.norm_sq() as f64).sqrt() / m.as_f64();
        let r_init = match spec.d0 {
            crate::lattice::Region::Disk { radius, .. } => radius,
            _ => unreachable!("analytic_disk requires a disk D0"),
        };
        let tau = std::f64::consts::PI * (radius * radius - r_init * r_init);
        let [x, y] = zeta.to_point(m);
        Ok(DiskPole {
            zeta,
            tau,
            radius,
            nhat: [x / radius, y / radius],
        })
    }

    /// Lattice sites strictly inside `D_τ`.
    pub fn interior(&self) -> SiteSet {
        let r2 = self.zeta.norm_sq();
        let r = (r2 as f64).sqrt().ceil() as i32 + 1;
        SiteSet::from_sites(
            SiteBox::around(Site::new(0, 0), r)
                .sites()
                .filter(|z| z.norm_sq() < r2),
        )
    }

    pub fn region(&self) -> crate::lattice::Region {
        crate::lattice::Region::disk([0.0, 0.0], self.radius)
    }

    /// Context with `R₀′ = R_τ` (both tangent disks of a disk have its
    /// radius) and `R₀ = c R₀′ /(4 C₂)`.
    pub fn context(
        &self,
        m: Resolution,
        c: f64,
        c2: f64,
        seq: &SourceSequence,
    ) -> Result<PoleContext> {
        let r0_prime = self.radius;
        let r0 = c * r0_prime / (4.0 * c2);
        PoleContext::new(
            self.zeta,
            self.tau,
            self.nhat,
            m,
            r0,
            r0_prime,
            min_source_distance(seq, self.zeta),
        )
    }
}

/// `min_i |z_{m,i} − ζ|` in scaled units.
pub fn min_source_distance(seq: &SourceSequence, zeta: Site) -> f64 {
    seq.multiplicities()
        .keys()
        .map(|&z| z.dist(zeta))
        .fold(f64::INFINITY, f64::min)
        / seq.m.as_f64()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    H,
    F,
    PoissonTilde,
    Green,
}

/// Real values on a set of sites.
#[derive(Clone, Debug)]
pub struct HarmonicField {
    pub m: Resolution,
    pub domain: SiteSet,
    pub values: Grid<f64>,
    pub pole: Option<Site>,
    pub kind: FieldKind,
}

impl HarmonicField {
    pub fn value(&self, z: Site) -> Option<f64> {
        if self.domain.contains(z) {
            Some(self.values[z])
        } else {
            None
        }
    }

    pub fn get(&self, z: Site) -> Result<f64> {
        self.value(z).ok_or(Error::OutsideField(z))
    }

    /// `Δ_h` at `z` when `z` and its four neighbors are in the domain.
    pub fn laplacian(&self, z: Site) -> Option<f64> {
        let c = self.value(z)?;
        let mut s = 0.0;
        for w in neighbors(z) {
            s += self.value(w)?;
        }
        Some(0.25 * s - c)
    }

    /// Largest `|Δ_h|` over sites of `over` with a full stencil in the domain.
    pub fn max_laplacian(&self, over: impl IntoIterator<Item = Site>) -> f64 {
        over.into_iter()
            .filter_map(|z| self.laplacian(z))
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for z in self.domain.iter() {
            let [x, y] = z.to_point(self.m);
            writeln!(w, "{x},{y},{}", self.values[z])?;
        }
        Ok(())
    }
}

/// `F_ζ(z) = Re((n̂/m)/(ζ − z))` with `n̂` read as a complex number.
pub fn continuum_f(ctx: &PoleContext, z: Point) -> Result<f64> {
    let [zx, zy] = ctx.zeta_point();
    let (dx, dy) = (zx - z[0], zy - z[1]);
    let d2 = dx * dx + dy * dy;
    if d2 == 0.0 {
        return Err(Error::Pole(format!(
            "F is singular at the pole {}",
            ctx.zeta
        )));
    }
    // Re(n / d) = (n · d)/|d|²
    Ok((ctx.nhat[0] * dx + ctx.nhat[1] * dy) / (d2 * ctx.m.as_f64()))
}

/// `H_ζ(z) = (π/2) ∂_n̂ g(m(z − ζ))` on every site of `region`, evaluated in
/// the normalized frame.
pub fn build_h(
    table: &PotentialTable,
    ctx: &PoleContext,
    region: SiteBox,
) -> Result<HarmonicField> {
    let mut values = Grid::new(region, 0.0);
    for z in region.sites() {
        values[z] =
            std::f64::consts::FRAC_PI_2 * table.dir_derivative(ctx.direction, ctx.local(z))?;
    }
    Ok(HarmonicField {
        m: ctx.m,
        domain: SiteSet::block(region.x0, region.y0, region.x1, region.y1),
        values,
        pole: Some(ctx.zeta),
        kind: FieldKind::H,
    })
}

/// `F_ζ` sampled on the sites of `region` other than `ζ`.
pub fn build_f(ctx: &PoleContext, region: SiteBox) -> Result<HarmonicField> {
    let mut values = Grid::new(region, 0.0);
    let mut domain = SiteSet::new(region);
    for z in region.sites().filter(|&z| z != ctx.zeta) {
        values[z] = continuum_f(ctx, z.to_point(ctx.m))?;
        domain.insert(z);
    }
    Ok(HarmonicField {
        m: ctx.m,
        domain,
        values,
        pole: Some(ctx.zeta),
        kind: FieldKind::F,
    })
}

/// Largest `|Δ_h H_ζ|` over sites whose stencil avoids the singular sites.
pub fn h_harmonicity_residual(h: &HarmonicField, ctx: &PoleContext) -> f64 {
    let bad = ctx.singular_sites();
    let clear = |z: Site| !bad.contains(&z) && neighbors(z).iter().all(|w| !bad.contains(w));
    h.max_laplacian(h.domain.iter().filter(|&z| clear(z)))
}

/// `max m²|z − ζ|²·|H_ζ(z) − F_ζ(z)|` over field sites with `|z − ζ| ≥ min_dist`.
pub fn fit_c1(h: &HarmonicField, ctx: &PoleContext, min_dist: f64) -> Result<f64> {
    let m = ctx.m.as_f64();
    let mut c1 = 0.0f64;
    for z in h.domain.iter() {
        let d = z.dist(ctx.zeta) / m;
        if d < min_dist {
            continue;
        }
        let diff = (h.values[z] - continuum_f(ctx, z.to_point(ctx.m))?).abs();
        c1 = c1.max(m * m * d * d * diff);
    }
    Ok(c1)
}

/// `Ω_ζ = Ω¹ ∪ Ω²` with `Ω¹` the lattice flow domain and `Ω²` the
/// super-level set `{H_ζ > 1/(2mR₀)}`, both without `ζ`.
#[derive(Clone, Debug)]
pub struct OmegaDomain {
    pub omega1: SiteSet,
    pub omega2: SiteSet,
    pub omega: SiteSet,
    pub boundary: SiteSet,
    pub pole: Site,
}

pub fn build_omega(ctx: &PoleContext, h: &HarmonicField, d_tau: &SiteSet) -> Result<OmegaDomain> {
    let thr = ctx.threshold();
    let rim = h.domain.bounds();
    let mut omega2 = SiteSet::new(rim);
    for z in h.domain.iter() {
        if z != ctx.zeta && h.values[z] > thr {
            if z.x == rim.x0 || z.x == rim.x1 || z.y == rim.y0 || z.y == rim.y1 {
                return Err(Error::Pole(format!(
                    "super-level set of H reaches the field rim at {z}"
                )));
            }
            omega2.insert(z);
        }
    }
    let omega1 = d_tau.clone();
    let mut omega = omega1.union(&omega2);
    omega.remove(ctx.zeta);
    let mut boundary = omega.outer_boundary();
    boundary.insert(ctx.zeta);
    if let Some(z) = boundary.iter().find(|&z| !h.domain.contains(z)) {
        return Err(Error::OutsideField(z));
    }
    Ok(OmegaDomain {
        omega1,
        omega2,
        omega,
        boundary,
        pole: ctx.zeta,
    })
}

/// Measured properties of `H_ζ` and `Ω_ζ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmegaChecks {
    pub h_at_pole: f64,
    pub zeta_on_boundary: bool,
    /// The lattice flow domain lies inside `Ω_ζ`.
    pub contains_flow: bool,
    /// `max m·d(z, D_τ)` over `Ω_ζ`: the `C₂` needed for the outer inclusion.
    pub c2_containment: f64,
    /// `max (m|z − ζ| − 1/H_ζ(z))` over `z ∈ Ω_ζ` with `H_ζ(z) > 0`: the `C₂`
    /// needed for the decay bound `H_ζ ≤ 1/(m d(ζ,U) − C₂)`.
    pub c2_decay: f64,
    /// `max |H_ζ|` over the lattice sites of `∂Ω_ζ ∖ {ζ}`.
    pub boundary_max: f64,
    /// `max |H_ζ|` over the grid boundary of `Ω_ζ` away from `ζ`: the points
    /// where lattice edges leave `Ω_ζ`, with `H_ζ` interpolated along edges.
    pub grid_boundary_max: f64,
    /// `min H_ζ` over `Ω_ζ`.
    pub omega_min: f64,
    pub threshold: f64,
    pub slack: f64,
    /// Harmonicity residual of `H_ζ` over `Ω_ζ`.
    pub residual: f64,
}

impl OmegaChecks {
    pub fn boundary_ok(&self) -> bool {
        self.boundary_max <= self.threshold + self.slack
    }

    pub fn grid_boundary_ok(&self) -> bool {
        self.grid_boundary_max <= self.threshold * (1.0 + 1e-9)
    }

    pub fn lower_ok(&self) -> bool {
        self.omega_min >= -self.threshold - self.slack
    }
}

pub fn check_omega(
    ctx: &PoleContext,
    h: &HarmonicField,
    omega: &OmegaDomain,
    d_tau: &(impl Shape + ?Sized),
) -> Result<OmegaChecks> {
    let m = ctx.m.as_f64();
    let mut c2_containment = 0.0f64;
    let mut c2_decay = f64::NEG_INFINITY;
    let mut omega_min = f64::INFINITY;
    for z in omega.omega.iter() {
        let v = h.get(z)?;
        c2_containment = c2_containment.max(m * d_tau.signed_distance(z.to_point(ctx.m)).max(0.0));
        omega_min = omega_min.min(v);
        if v > 0.0 {
            c2_decay = c2_decay.max(z.dist(ctx.zeta) - 1.0 / v);
        }
    }
    let mut boundary_max = 0.0f64;
    for z in omega.boundary.iter().filter(|&z| z != ctx.zeta) {
        boundary_max = boundary_max.max(h.get(z)?.abs());
    }
    let grid_boundary_max = grid_boundary_max(ctx, h, omega, d_tau)?;
    let bad = ctx.singular_sites();
    let residual = h.max_laplacian(omega.omega.iter().filter(|z| !bad.contains(z)));
    Ok(OmegaChecks {
        h_at_pole: h.get(ctx.zeta)?,
        zeta_on_boundary: omega.boundary.contains(ctx.zeta) && !omega.omega.contains(ctx.zeta),
        contains_flow: omega
            .omega1
            .iter()
            .filter(|&z| z != ctx.zeta)
            .all(|z| omega.omega.contains(z)),
        c2_containment,
        c2_decay: c2_decay.max(0.0),
        boundary_max,
        grid_boundary_max,
        omega_min,
        threshold: ctx.threshold(),
        slack: ctx.edge_slack(),
        residual,
    })
}

/// Along each edge from `a ∈ Ω_ζ` to `b ∉ Ω_ζ` (other than `b = ζ`), the
/// grid domain extends to the later of the crossing of `∂D_τ` (when `a` lies
/// in the flow domain) and the crossing of the level `1/(2mR₀)` (when `a`
/// lies above it). Returns the largest `|H_ζ|` at these points.
fn grid_boundary_max(
    ctx: &PoleContext,
    h: &HarmonicField,
    omega: &OmegaDomain,
    d_tau: &(impl Shape + ?Sized),
) -> Result<f64> {
    let thr = ctx.threshold();
    let mut worst = 0.0f64;
    for a in omega.omega.iter() {
        let ha = h.get(a)?;
        for b in neighbors(a) {
            if b == ctx.zeta || omega.omega.contains(b) {
                continue;
            }
            let hb = h.get(b)?;
            let t_flow = if omega.omega1.contains(a) {
                edge_crossing(d_tau, a.to_point(ctx.m), b.to_point(ctx.m))
            } else {
                0.0
            };
            let t_level = if ha > thr {
                if hb < thr {
                    (ha - thr) / (ha - hb)
                } else {
                    1.0
                }
            } else {
                0.0
            };
            let t = t_flow.max(t_level);
            worst = worst.max((ha + t * (hb - ha)).abs());
        }
    }
    Ok(worst)
}

/// `|Σ_{z ∈ set} f(z) − Σ_{z ∈ initial} f(z) − Σ_{i < n} f(z_{m,i})|` for the
/// first `n` sources. `initial` is the starting cluster `D_0 ∩ (1/m)ℤ²`, which
/// carries one unit of mass per site before any source is released.
pub fn mean_value_discrepancy(
    field: &HarmonicField,
    set: &SiteSet,
    initial: &SiteSet,
    prefix: &[Site],
) -> Result<f64> {
    let mut lhs = 0.0;
    for z in set.iter() {
        lhs += field.get(z)?;
    }
    let mut rhs = 0.0;
    for z in initial.iter() {
        rhs += field.get(z)?;
    }
    for &z in prefix {
        rhs += field.get(z)?;
    }
    Ok((lhs - rhs).abs())
}

/// Largest mean-value discrepancy over `s = τ·j/samples`, `0 < j < samples`,
/// on a concentric disk flow, with `D_s` its lattice disk.
pub fn sup_mean_value_discrepancy(
    field: &HarmonicField,
    spec: &FlowSpec,
    seq: &SourceSequence,
    tau: f64,
    samples: usize,
) -> Result<f64> {
    let m = seq.m;
    let initial = crate::lattice::sites_in(&spec.d0, m)?;
    let mut worst = 0.0f64;
    for j in 1..samples {
        let s = tau * j as f64 / samples as f64;
        let disk = spec
            .analytic_disk(s)
            .ok_or_else(|| Error::Pole("flow is not a family of concentric disks".into()))?;
        let set = crate::lattice::sites_in(&disk, m)?;
        let prefix: Vec<Site> = (0..seq.count_through(s)).map(|i| seq.site(i)).collect();
        worst = worst.max(mean_value_discrepancy(field, &set, &initial, &prefix)?);
    }
    Ok(worst)
}

/// Running record of `M_ζ` along an aggregation run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MartingaleTrace {
    /// `(particle index, ΔM)`.
    pub increments: Vec<(usize, f64)>,
    pub value: f64,
    /// Discrete quadratic variation `Σ (ΔM)²`.
    pub quadratic_variation: f64,
}

/// Observer adding `field(landing) − field(z_{m,ℓ})` after each particle.
pub struct MartingaleObserver<'a> {
    field: &'a HarmonicField,
    seq: &'a SourceSequence,
    pub trace: MartingaleTrace,
}

pub fn martingale_observer<'a>(
    field: &'a HarmonicField,
    seq: &'a SourceSequence,
) -> MartingaleObserver<'a> {
    MartingaleObserver {
        field,
        seq,
        trace: MartingaleTrace::default(),
    }
}

impl WalkObserver for MartingaleObserver<'_> {
    fn observe(&mut self, landing: &Landing, _occupied: &SiteSet) -> Result<()> {
        let source = if landing.index < self.seq.len() {
            self.seq.site(landing.index)
        } else {
            landing.source
        };
        let dm = self.field.get(landing.site)? - self.field.get(source)?;
        self.trace.increments.push((landing.index, dm));
        self.trace.value += dm;
        self.trace.quadratic_variation += dm * dm;
        Ok(())
    }
}
