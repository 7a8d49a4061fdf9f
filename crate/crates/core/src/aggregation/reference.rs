use serde::{Deserialize, Serialize};

use super::sandpile::{stabilize_sandpile, SandpileState, Schedule};
use crate::error::Result;
use crate::grid::Grid;
use crate::lattice::{
    dist, sites_in, Point, PointIndex, Rect, Region, Resolution, Shape, Site, SiteBox, SiteSet,
};
use crate::sources::{FlowSampler, FlowSpec};

/// Sweep budget for reference sandpiles.
const REFERENCE_SWEEPS: usize = 200_000;

/// Stabilized sandpile started from the lattice density `σ_s`.
pub fn sandpile_flow(spec: &FlowSpec, s: f64, m_ref: Resolution) -> Result<SandpileState> {
    let masses: Vec<(Site, f64)> = spec
        .sigma_lattice(s, m_ref)?
        .into_iter()
        .map(|(z, v)| (z, f64::from(v)))
        .collect();
    let initial = SandpileState::from_masses(m_ref, &masses);
    let (done, _) = stabilize_sandpile(&initial, Schedule::Odometer, REFERENCE_SWEEPS)?;
    Ok(done)
}

/// How the deterministic flow is approximated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Closed form when the flow is a family of concentric disks, sandpile otherwise.
    #[default]
    Auto,
    Sandpile,
}

/// Lattice approximation of `D_s` at resolution `m_ref`.
pub fn reference_flow(spec: &FlowSpec, s: f64, m_ref: Resolution) -> Result<SiteSet> {
    reference_flow_with(spec, s, m_ref, ReferenceMode::Auto)
}

pub fn reference_flow_with(
    spec: &FlowSpec,
    s: f64,
    m_ref: Resolution,
    mode: ReferenceMode,
) -> Result<SiteSet> {
    if mode == ReferenceMode::Auto {
        if let Some(disk) = spec.analytic_disk(s) {
            return sites_in(&disk, m_ref);
        }
    }
    Ok(sandpile_flow(spec, s, m_ref)?.occupied())
}

/// Harmonic polynomials used to test the quadrature identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestHarmonic {
    One,
    ReZ,
    ImZ,
    ReZ2,
    ImZ2,
    ReZ3,
}

impl TestHarmonic {
    pub const ALL: [TestHarmonic; 6] = [
        TestHarmonic::One,
        TestHarmonic::ReZ,
        TestHarmonic::ImZ,
        TestHarmonic::ReZ2,
        TestHarmonic::ImZ2,
        TestHarmonic::ReZ3,
    ];

    pub fn eval(self, p: Point) -> f64 {
        let [x, y] = p;
        match self {
            TestHarmonic::One => 1.0,
            TestHarmonic::ReZ => x,
            TestHarmonic::ImZ => y,
            TestHarmonic::ReZ2 => x * x - y * y,
            TestHarmonic::ImZ2 => 2.0 * x * y,
            TestHarmonic::ReZ3 => x * x * x - 3.0 * x * y * y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestHarmonic::One => "1",
            TestHarmonic::ReZ => "Re z",
            TestHarmonic::ImZ => "Im z",
            TestHarmonic::ReZ2 => "Re z^2",
            TestHarmonic::ImZ2 => "Im z^2",
            TestHarmonic::ReZ3 => "Re z^3",
        }
    }
}

/// `|Σ_{D_s} h − Σ h σ_s| / m_ref²` over the lattice.
pub fn quadrature_check(
    spec: &FlowSpec,
    s: f64,
    m_ref: Resolution,
    h: impl Fn(Point) -> f64,
    mode: ReferenceMode,
) -> Result<f64> {
    let set = reference_flow_with(spec, s, m_ref, mode)?;
    let lhs: f64 = set.iter().map(|z| h(z.to_point(m_ref))).sum();
    let rhs: f64 = spec
        .sigma_lattice(s, m_ref)?
        .iter()
        .map(|&(z, v)| f64::from(v) * h(z.to_point(m_ref)))
        .sum();
    let m2 = m_ref.as_f64() * m_ref.as_f64();
    Ok((lhs - rhs).abs() / m2)
}

/// A lattice shape described by a scalar field in `[0, 1]` (1 inside), with
/// its boundary taken as the 1/2 level curve of the bilinear interpolant.
#[derive(Clone, Debug)]
pub struct LatticeShape {
    pub m: Resolution,
    pub field: Grid<f64>,
    segments: Vec<[Point; 2]>,
    index: Option<PointIndex>,
}

impl LatticeShape {
    pub fn from_field(m: Resolution, field: Grid<f64>) -> Self {
        let field = field.resized(field.bounds().expand(1), 0.0);
        let segments = marching_squares(&field, m);
        let spacing = 0.25 / m.as_f64();
        let samples = sample_segments(&segments, spacing);
        let index = PointIndex::new(&samples).ok();
        LatticeShape {
            m,
            field,
            segments,
            index,
        }
    }

    pub fn from_set(m: Resolution, set: &SiteSet) -> Self {
        let mut field = Grid::new(set.bounds(), 0.0);
        for z in set.iter() {
            field[z] = 1.0;
        }
        LatticeShape::from_field(m, field)
    }

    pub fn perimeter(&self) -> f64 {
        self.segments.iter().map(|s| dist(s[0], s[1])).sum()
    }

    pub fn boundary_points(&self, spacing: f64) -> Vec<Point> {
        sample_segments(&self.segments, spacing)
    }

    fn inside(&self, p: Point) -> bool {
        let z = Site::nearest(p, self.m);
        self.field.get(z).is_some_and(|&v| v >= 0.5)
    }
}

impl Shape for LatticeShape {
    fn signed_distance(&self, p: Point) -> f64 {
        let Some(idx) = &self.index else {
            return f64::INFINITY;
        };
        let d = idx.nearest_distance(p);
        if self.inside(p) {
            -d
        } else {
            d
        }
    }

    fn bounds(&self) -> Option<Rect> {
        let b = self.field.bounds();
        let h = self.m.spacing();
        Some(Rect {
            min: [f64::from(b.x0) * h, f64::from(b.y0) * h],
            max: [f64::from(b.x1) * h, f64::from(b.y1) * h],
        })
    }
}

fn sample_segments(segments: &[[Point; 2]], spacing: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for [a, b] in segments {
        let n = ((dist(*a, *b) / spacing).ceil() as usize).max(1);
        for k in 0..=n {
            let t = k as f64 / n as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Level-1/2 contour segments of a site field, in scaled coordinates.
fn marching_squares(field: &Grid<f64>, m: Resolution) -> Vec<[Point; 2]> {
    let b = field.bounds();
    let level = 0.5;
    let mut out = Vec::new();
    for y in b.y0..b.y1 {
        for x in b.x0..b.x1 {
            // Corners counterclockwise from the lower left.
            let c = [
                Site::new(x, y),
                Site::new(x + 1, y),
                Site::new(x + 1, y + 1),
                Site::new(x, y + 1),
            ];
            let v = c.map(|z| field[z]);
            let inside = v.map(|a| a >= level);
            if inside.iter().all(|&i| i) || inside.iter().all(|&i| !i) {
                continue;
            }
            let mut crossings = Vec::with_capacity(4);
            for e in 0..4 {
                let (i, j) = (e, (e + 1) % 4);
                if inside[i] != inside[j] {
                    let t = (level - v[i]) / (v[j] - v[i]);
                    let (p, q) = (c[i].to_point(m), c[j].to_point(m));
                    crossings.push((e, [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]));
                }
            }
            if crossings.len() == 2 {
                out.push([crossings[0].1, crossings[1].1]);
            } else {
                // Saddle: decide by the cell average.
                let centre = v.iter().sum::<f64>() / 4.0 >= level;
                let pts: Vec<Point> = crossings.iter().map(|c| c.1).collect();
                if centre == inside[0] {
                    // Corners 1 and 3 are cut off.
                    out.push([pts[0], pts[1]]);
                    out.push([pts[2], pts[3]]);
                } else {
                    out.push([pts[0], pts[3]]);
                    out.push([pts[1], pts[2]]);
                }
            }
        }
    }
    out
}

/// Either an exact region or a lattice approximation of `D_s`.
#[derive(Clone, Debug)]
pub enum FlowSnapshot {
    Exact(Region),
    Lattice(Box<LatticeShape>),
}

impl Shape for FlowSnapshot {
    fn signed_distance(&self, p: Point) -> f64 {
        match self {
            FlowSnapshot::Exact(r) => r.signed_distance(p),
            FlowSnapshot::Lattice(l) => l.signed_distance(p),
        }
    }

    fn bounds(&self) -> Option<Rect> {
        match self {
            FlowSnapshot::Exact(r) => r.bounds(),
            FlowSnapshot::Lattice(l) => l.bounds(),
        }
    }
}

/// Samples the deterministic flow: closed form for concentric disks,
/// otherwise a sandpile at resolution `m_ref`.
#[derive(Clone, Debug)]
pub struct ReferenceSampler {
    pub spec: FlowSpec,
    pub m_ref: Resolution,
    pub mode: ReferenceMode,
}

impl ReferenceSampler {
    pub fn new(spec: FlowSpec, m_ref: Resolution) -> Self {
        ReferenceSampler {
            spec,
            m_ref,
            mode: ReferenceMode::Auto,
        }
    }
}

impl FlowSampler for ReferenceSampler {
    type Snapshot = FlowSnapshot;

    fn snapshot(&self, s: f64) -> Result<FlowSnapshot> {
        if self.mode == ReferenceMode::Auto {
            if let Some(disk) = self.spec.analytic_disk(s) {
                return Ok(FlowSnapshot::Exact(disk));
            }
        }
        let pile = sandpile_flow(&self.spec, s, self.m_ref)?;
        let field = pile.mass.clone();
        let mut clamped = Grid::new(field.bounds(), 0.0);
        for (z, &v) in field.iter() {
            clamped[z] = v.clamp(0.0, 1.0);
        }
        Ok(FlowSnapshot::Lattice(Box::new(LatticeShape::from_field(
            self.m_ref, clamped,
        ))))
    }

    fn boundary(&self, snap: &FlowSnapshot, spacing: f64) -> Vec<Point> {
        match snap {
            FlowSnapshot::Exact(r) => r.boundary_points(spacing),
            FlowSnapshot::Lattice(l) => l.boundary_points(spacing),
        }
    }

    fn perimeter(&self, snap: &FlowSnapshot) -> f64 {
        match snap {
            FlowSnapshot::Exact(r) => r.perimeter(),
            FlowSnapshot::Lattice(l) => l.perimeter(),
        }
    }
}

/// Bounding box (in sites at resolution `m`) of a shape.
pub fn site_box(shape: &impl Shape, m: Resolution) -> Result<SiteBox> {
    let r = shape.bounds().ok_or(crate::error::Error::EmptySet)?;
    SiteBox::covering(&r, m)
}
