//! Geometry of the scaled lattice `(1/m)Z²`: sites, dense site sets, continuum
//! regions and the distances between them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane in continuum units.
pub type Point = [f64; 2];

/// Slack applied to closed-membership tests so that lattice points lying on a
/// boundary are not lost to rounding.
pub const MEMBERSHIP_EPS: f64 = 1e-9;

/// Lattice resolution: sites live on `(1/m)Z²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u32")]
pub struct Resolution(u32);

impl Resolution {
    pub fn new(m: i64) -> Result<Self> {
        if m < 1 || m > i64::from(u32::MAX) {
            return Err(Error::InvalidResolution(m));
        }
        Ok(Resolution(m as u32))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }

    #[inline]
    pub fn spacing(self) -> f64 {
        1.0 / self.as_f64()
    }
}

impl TryFrom<i64> for Resolution {
    type Error = Error;
    fn try_from(m: i64) -> Result<Self> {
        Resolution::new(m)
    }
}

impl From<Resolution> for u32 {
    fn from(r: Resolution) -> u32 {
        r.0
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An integer lattice site. Its position in the plane is `(x/m, y/m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

impl Site {
    #[inline]
    pub const fn new(x: i32, y: i32) -> Self {
        Site { x, y }
    }

    #[inline]
    pub fn to_point(self, m: Resolution) -> Point {
        let h = m.spacing();
        [f64::from(self.x) * h, f64::from(self.y) * h]
    }

    /// The site nearest to `p` at resolution `m`.
    pub fn nearest(p: Point, m: Resolution) -> Site {
        let s = m.as_f64();
        Site::new((p[0] * s).round() as i32, (p[1] * s).round() as i32)
    }

    #[inline]
    pub fn offset(self, dx: i32, dy: i32) -> Site {
        Site::new(self.x + dx, self.y + dy)
    }

    #[inline]
    pub fn norm_sq(self) -> i64 {
        i64::from(self.x) * i64::from(self.x) + i64::from(self.y) * i64::from(self.y)
    }

    #[inline]
    pub fn dist(self, other: Site) -> f64 {
        let dx = f64::from(self.x - other.x);
        let dy = f64::from(self.y - other.y);
        dx.hypot(dy)
    }
}

impl std::ops::Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        Site::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        Site::new(self.x + o.x, self.y + o.y)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Unit steps in the fixed order `+x, -x, +y, -y`.
pub const STEPS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// The four lattice neighbors of `z`, in the order of [`STEPS`].
#[inline]
pub fn neighbors(z: Site) -> [Site; 4] {
    STEPS.map(|(dx, dy)| z.offset(dx, dy))
}

/// Inclusive integer rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteBox {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl SiteBox {
    pub fn new(x0: i32, y0: i32, x1: i32, y1: i32) -> Self {
        SiteBox { x0, y0, x1, y1 }
    }

    pub fn around(center: Site, half: i32) -> Self {
        SiteBox::new(
            center.x - half,
            center.y - half,
            center.x + half,
            center.y + half,
        )
    }

    #[inline]
    pub fn width(&self) -> usize {
        (self.x1 - self.x0 + 1).max(0) as usize
    }

    #[inline]
    pub fn height(&self) -> usize {
        (self.y1 - self.y0 + 1).max(0) as usize
    }

    #[inline]
    pub fn contains(&self, z: Site) -> bool {
        z.x >= self.x0 && z.x <= self.x1 && z.y >= self.y0 && z.y <= self.y1
    }

    pub fn expand(&self, by: i32) -> Self {
        SiteBox::new(self.x0 - by, self.y0 - by, self.x1 + by, self.y1 + by)
    }

    pub fn union(&self, o: &SiteBox) -> Self {
        SiteBox::new(
            self.x0.min(o.x0),
            self.y0.min(o.y0),
            self.x1.max(o.x1),
            self.y1.max(o.y1),
        )
    }

    /// Smallest box holding every site whose scaled position lies in `rect`.
    pub fn covering(rect: &Rect, m: Resolution) -> Result<Self> {
        let s = m.as_f64();
        let lo = [(rect.min[0] * s).floor(), (rect.min[1] * s).floor()];
        let hi = [(rect.max[0] * s).ceil(), (rect.max[1] * s).ceil()];
        let lim = f64::from(i32::MAX / 4);
        if lo
            .iter()
            .chain(hi.iter())
            .any(|v| !v.is_finite() || v.abs() > lim)
        {
            return Err(Error::UnboundedRegion);
        }
        Ok(SiteBox::new(
            lo[0] as i32,
            lo[1] as i32,
            hi[0] as i32,
            hi[1] as i32,
        ))
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        let (x0, x1) = (self.x0, self.x1);
        (self.y0..=self.y1).flat_map(move |y| (x0..=x1).map(move |x| Site::new(x, y)))
    }
}

/// Axis-aligned rectangle in continuum units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn union(&self, o: &Rect) -> Rect {
        Rect {
            min: [self.min[0].min(o.min[0]), self.min[1].min(o.min[1])],
            max: [self.max[0].max(o.max[0]), self.max[1].max(o.max[1])],
        }
    }

    pub fn expand(&self, by: f64) -> Rect {
        Rect {
            min: [self.min[0] - by, self.min[1] - by],
            max: [self.max[0] + by, self.max[1] + by],
        }
    }
}

/// Finite set of sites stored as a dense bit grid over a bounding box.
///
/// Single writer; any number of readers when not being mutated.
#[derive(Clone, Debug)]
pub struct SiteSet {
    bounds: SiteBox,
    stride: usize,
    words: Vec<u64>,
    count: usize,
}

impl PartialEq for SiteSet {
    fn eq(&self, other: &Self) -> bool {
        self.count == other.count && self.iter().all(|z| other.contains(z))
    }
}

impl Eq for SiteSet {}

impl SiteSet {
    pub fn new(bounds: SiteBox) -> Self {
        let stride = bounds.width();
        let n = stride * bounds.height();
        SiteSet {
            bounds,
            stride,
            words: vec![0; n.div_ceil(64)],
            count: 0,
        }
    }

    pub fn empty() -> Self {
        SiteSet::new(SiteBox::new(0, 0, -1, -1))
    }

    pub fn from_sites<I: IntoIterator<Item = Site>>(sites: I) -> Self {
        let sites: Vec<Site> = sites.into_iter().collect();
        if sites.is_empty() {
            return SiteSet::empty();
        }
        let mut b = SiteBox::new(sites[0].x, sites[0].y, sites[0].x, sites[0].y);
        for z in &sites {
            b = b.union(&SiteBox::new(z.x, z.y, z.x, z.y));
        }
        let mut set = SiteSet::new(b);
        for z in sites {
            set.insert(z);
        }
        set
    }

    /// Full rectangular block `[x0, x1] × [y0, y1]`.
    pub fn block(x0: i32, y0: i32, x1: i32, y1: i32) -> Self {
        let b = SiteBox::new(x0, y0, x1, y1);
        SiteSet::from_sites(b.sites())
    }

    #[inline]
    pub fn bounds(&self) -> SiteBox {
        self.bounds
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    fn index(&self, z: Site) -> usize {
        (z.y - self.bounds.y0) as usize * self.stride + (z.x - self.bounds.x0) as usize
    }

    #[inline]
    pub fn contains(&self, z: Site) -> bool {
        if !self.bounds.contains(z) {
            return false;
        }
        let i = self.index(z);
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    /// Inserts `z`, growing the bounding box if needed. Returns whether the
    /// site was newly added.
    pub fn insert(&mut self, z: Site) -> bool {
        if !self.bounds.contains(z) {
            let grown = if self.bounds.width() == 0 {
                SiteBox::new(z.x, z.y, z.x, z.y)
            } else {
                let pad = (self.bounds.width().max(self.bounds.height()) / 4 + 2) as i32;
                self.bounds
                    .union(&SiteBox::new(z.x, z.y, z.x, z.y))
                    .expand(pad)
            };
            self.regrow(grown);
        }
        let i = self.index(z);
        let (w, bit) = (i >> 6, 1u64 << (i & 63));
        if self.words[w] & bit == 0 {
            self.words[w] |= bit;
            self.count += 1;
            true
        } else {
            false
        }
    }

    pub fn remove(&mut self, z: Site) -> bool {
        if !self.contains(z) {
            return false;
        }
        let i = self.index(z);
        self.words[i >> 6] &= !(1u64 << (i & 63));
        self.count -= 1;
        true
    }

    /// Re-allocates over `bounds`, which must contain every current site.
    pub fn regrow(&mut self, bounds: SiteBox) {
        let mut next = SiteSet::new(bounds);
        for z in self.iter() {
            debug_assert!(bounds.contains(z));
            next.insert(z);
        }
        *self = next;
    }

    /// Sites in row-major order (by `y`, then `x`).
    pub fn iter(&self) -> impl Iterator<Item = Site> + '_ {
        let b = self.bounds;
        let stride = self.stride;
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let t = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * 64 + t;
                Some(Site::new(
                    b.x0 + (i % stride) as i32,
                    b.y0 + (i / stride) as i32,
                ))
            })
        })
    }

    pub fn to_vec(&self) -> Vec<Site> {
        self.iter().collect()
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.iter().all(|z| other.contains(z))
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        let mut out = SiteSet::new(self.bounds.union(&other.bounds));
        for z in self.iter().chain(other.iter()) {
            out.insert(z);
        }
        out
    }

    pub fn intersection(&self, other: &SiteSet) -> SiteSet {
        SiteSet::from_sites(self.iter().filter(|&z| other.contains(z)))
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        let mut out = SiteSet::new(self.bounds);
        for z in self.iter().filter(|&z| !other.contains(z)) {
            out.insert(z);
        }
        out
    }

    /// Sites outside the set that have at least one neighbor inside it.
    pub fn outer_boundary(&self) -> SiteSet {
        let mut out = SiteSet::new(self.bounds.expand(1));
        for z in self.iter() {
            for w in neighbors(z) {
                if !self.contains(w) {
                    out.insert(w);
                }
            }
        }
        out
    }

    /// Scaled positions of the sites.
    pub fn points(&self, m: Resolution) -> Vec<Point> {
        self.iter().map(|z| z.to_point(m)).collect()
    }

    /// Number of members at Euclidean lattice distance at most `radius` from `center`.
    pub fn count_in_ball(&self, center: Site, radius: f64) -> usize {
        let r = radius.floor() as i32;
        let r2 = radius * radius;
        let mut n = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                if f64::from(dx * dx + dy * dy) <= r2 && self.contains(center.offset(dx, dy)) {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Sites of `a` having at least one of their four neighbors outside `a`.
pub fn boundary(a: &SiteSet) -> SiteSet {
    let mut out = SiteSet::new(a.bounds());
    for z in a.iter() {
        if neighbors(z).iter().any(|&w| !a.contains(w)) {
            out.insert(z);
        }
    }
    out
}

/// Anything with a signed distance function: negative inside, positive outside.
pub trait Shape {
    fn signed_distance(&self, p: Point) -> f64;

    /// Bounding rectangle; `None` for the empty shape.
    fn bounds(&self) -> Option<Rect>;

    /// Closed membership.
    fn contains(&self, p: Point) -> bool {
        self.signed_distance(p) <= MEMBERSHIP_EPS
    }
}

/// A bounded subset of the plane with a JSON encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Disk { center: Point, radius: f64 },
    Polygon(Vec<Point>),
    Union(Vec<Region>),
    Difference(Box<Region>, Box<Region>),
}

impl Region {
    pub fn disk(center: Point, radius: f64) -> Self {
        Region::Disk { center, radius }
    }

    pub fn empty() -> Self {
        Region::Union(Vec::new())
    }

    /// Axis-aligned square `[x0, x0 + side] × [y0, y0 + side]`.
    pub fn square(x0: f64, y0: f64, side: f64) -> Self {
        Region::Polygon(vec![
            [x0, y0],
            [x0 + side, y0],
            [x0 + side, y0 + side],
            [x0, y0 + side],
        ])
    }

    /// Checks radius positivity and polygon simplicity.
    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Disk { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidRegion(format!(
                        "disk radius {radius} must be positive and finite"
                    )));
                }
                Ok(())
            }
            Region::Polygon(v) => {
                if v.len() < 3 {
                    return Err(Error::InvalidRegion(
                        "polygon needs at least 3 vertices".into(),
                    ));
                }
                if v.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidRegion("polygon vertex is not finite".into()));
                }
                if polygon_area(v).abs() < 1e-14 {
                    return Err(Error::InvalidRegion("polygon has zero area".into()));
                }
                let n = v.len();
                for i in 0..n {
                    for j in i + 1..n {
                        let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                        if !adjacent
                            && segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])
                        {
                            return Err(Error::InvalidRegion(format!(
                                "polygon edges {i} and {j} cross"
                            )));
                        }
                    }
                }
                Ok(())
            }
            Region::Union(parts) => parts.iter().try_for_each(Region::validate),
            Region::Difference(a, b) => {
                a.validate()?;
                b.validate()
            }
        }
    }

    /// Area; exact for disks and polygons, numerical for composites.
    pub fn area(&self) -> f64 {
        match self {
            Region::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Region::Polygon(v) => polygon_area(v).abs(),
            Region::Union(parts) if parts.is_empty() => 0.0,
            Region::Union(parts) if parts.len() == 1 => parts[0].area(),
            _ => self.numerical_area(2048),
        }
    }

    fn numerical_area(&self, n: usize) -> f64 {
        let Some(r) = self.bounds() else { return 0.0 };
        let (w, h) = (r.max[0] - r.min[0], r.max[1] - r.min[1]);
        let (dx, dy) = (w / n as f64, h / n as f64);
        let mut hits = 0usize;
        for j in 0..n {
            for i in 0..n {
                let p = [
                    r.min[0] + (i as f64 + 0.5) * dx,
                    r.min[1] + (j as f64 + 0.5) * dy,
                ];
                if self.contains(p) {
                    hits += 1;
                }
            }
        }
        hits as f64 * dx * dy
    }

    /// Boundary length; an upper bound for composites.
    pub fn perimeter(&self) -> f64 {
        match self {
            Region::Disk { radius, .. } => 2.0 * std::f64::consts::PI * radius,
            Region::Polygon(v) => (0..v.len()).map(|i| dist(v[i], v[(i + 1) % v.len()])).sum(),
            Region::Union(parts) => parts.iter().map(Region::perimeter).sum(),
            Region::Difference(a, b) => a.perimeter() + b.perimeter(),
        }
    }

    /// Points on the boundary at arclength spacing at most `spacing`.
    pub fn boundary_points(&self, spacing: f64) -> Vec<Point> {
        let raw = self.raw_boundary_points(spacing);
        match self {
            Region::Disk { .. } | Region::Polygon(_) => raw,
            _ => raw
                .into_iter()
                .filter(|&p| self.signed_distance(p).abs() <= spacing * 1e-3 + MEMBERSHIP_EPS)
                .collect(),
        }
    }

    fn raw_boundary_points(&self, spacing: f64) -> Vec<Point> {
        match self {
            Region::Disk { center, radius } => {
                let n = ((2.0 * std::f64::consts::PI * radius / spacing).ceil() as usize).max(8);
                (0..n)
                    .map(|k| {
                        let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                        [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                    })
                    .collect()
            }
            Region::Polygon(v) => {
                let mut out = Vec::new();
                for i in 0..v.len() {
                    let (a, b) = (v[i], v[(i + 1) % v.len()]);
                    let n = ((dist(a, b) / spacing).ceil() as usize).max(1);
                    for k in 0..n {
                        let t = k as f64 / n as f64;
                        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    }
                }
                out
            }
            Region::Union(parts) => parts
                .iter()
                .flat_map(|r| r.raw_boundary_points(spacing))
                .collect(),
            Region::Difference(a, b) => {
                let mut out = a.raw_boundary_points(spacing);
                out.extend(b.raw_boundary_points(spacing));
                out
            }
        }
    }
}

impl Shape for Region {
    fn signed_distance(&self, p: Point) -> f64 {
        match self {
            Region::Disk { center, radius } => dist(p, *center) - radius,
            Region::Polygon(v) => {
                let d = (0..v.len())
                    .map(|i| segment_distance(p, v[i], v[(i + 1) % v.len()]))
                    .fold(f64::INFINITY, f64::min);
                if point_in_polygon(p, v) {
                    -d
                } else {
                    d
                }
            }
            Region::Union(parts) => parts
                .iter()
                .map(|r| r.signed_distance(p))
                .fold(f64::INFINITY, f64::min),
            Region::Difference(a, b) => a.signed_distance(p).max(-b.signed_distance(p)),
        }
    }

    fn bounds(&self) -> Option<Rect> {
        match self {
            Region::Disk { center, radius } => Some(Rect {
                min: [center[0] - radius, center[1] - radius],
                max: [center[0] + radius, center[1] + radius],
            }),
            Region::Polygon(v) => {
                let mut r = Rect {
                    min: v[0],
                    max: v[0],
                };
                for p in v {
                    r = r.union(&Rect { min: *p, max: *p });
                }
                Some(r)
            }
            Region::Union(parts) => parts
                .iter()
                .filter_map(Region::bounds)
                .reduce(|a, b| a.union(&b)),
            Region::Difference(a, _) => a.bounds(),
        }
    }
}

/// Which side of a region an ε-neighborhood is taken on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `{z : d(z, R) < ε}` together with the closure of `R`.
    Outer,
    /// `{z ∈ R : d(z, Rᶜ) > ε}`.
    Inner,
}

/// Distance-threshold membership predicate around a base shape.
#[derive(Clone, Debug)]
pub struct Neighborhood<S> {
    pub base: S,
    pub eps: f64,
    pub side: Side,
}

impl<S: Shape> Shape for Neighborhood<S> {
    fn signed_distance(&self, p: Point) -> f64 {
        match self.side {
            Side::Outer => self.base.signed_distance(p) - self.eps,
            Side::Inner => self.base.signed_distance(p) + self.eps,
        }
    }

    fn bounds(&self) -> Option<Rect> {
        match self.side {
            Side::Outer => self.base.bounds().map(|r| r.expand(self.eps)),
            Side::Inner => self.base.bounds(),
        }
    }

    fn contains(&self, p: Point) -> bool {
        let sd = self.base.signed_distance(p);
        match self.side {
            Side::Outer => sd < self.eps || sd <= MEMBERSHIP_EPS,
            Side::Inner => sd < -self.eps,
        }
    }
}

impl<S: Shape + ?Sized> Shape for &S {
    fn signed_distance(&self, p: Point) -> f64 {
        (**self).signed_distance(p)
    }
    fn bounds(&self) -> Option<Rect> {
        (**self).bounds()
    }
    fn contains(&self, p: Point) -> bool {
        (**self).contains(p)
    }
}

/// Outer and inner ε-neighborhoods of `region`.
pub fn eps_neighborhoods<S: Shape + Clone>(
    region: &S,
    eps: f64,
) -> Result<(Neighborhood<S>, Neighborhood<S>)> {
    if !(eps >= 0.0) {
        return Err(Error::NegativeEpsilon(eps));
    }
    Ok((
        Neighborhood {
            base: region.clone(),
            eps,
            side: Side::Outer,
        },
        Neighborhood {
            base: region.clone(),
            eps,
            side: Side::Inner,
        },
    ))
}

/// All sites whose scaled position lies in `shape` (closed membership).
pub fn sites_in<S: Shape + ?Sized>(shape: &S, m: Resolution) -> Result<SiteSet> {
    let Some(rect) = shape.bounds() else {
        return Ok(SiteSet::empty());
    };
    let b = SiteBox::covering(&rect, m)?;
    let mut out = SiteSet::new(b);
    for z in b.sites() {
        if shape.contains(z.to_point(m)) {
            out.insert(z);
        }
    }
    Ok(out)
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn polygon_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn point_in_polygon(p: Point, v: &[Point]) -> bool {
    let mut inside = false;
    let n = v.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1])
            && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0]
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    fn orient(a: Point, b: Point, c: Point) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }
    let (d1, d2) = (orient(q1, q2, p1), orient(q1, q2, p2));
    let (d3, d4) = (orient(p1, p2, q1), orient(p1, p2, q2));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Uniform bucket grid for nearest-neighbor queries on a fixed point cloud.
#[derive(Clone, Debug)]
pub struct PointIndex {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<Point>>,
}

impl PointIndex {
    pub fn new(points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut r = Rect {
            min: points[0],
            max: points[0],
        };
        for p in points {
            r = r.union(&Rect { min: *p, max: *p });
        }
        let (w, h) = (
            (r.max[0] - r.min[0]).max(1e-12),
            (r.max[1] - r.min[1]).max(1e-12),
        );
        let cell = ((w * h) / points.len() as f64)
            .sqrt()
            .max(w.max(h) / 4096.0);
        let nx = (w / cell).floor() as usize + 1;
        let ny = (h / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for p in points {
            let i = (((p[0] - r.min[0]) / cell) as usize).min(nx - 1);
            let j = (((p[1] - r.min[1]) / cell) as usize).min(ny - 1);
            buckets[j * nx + i].push(*p);
        }
        Ok(PointIndex {
            origin: r.min,
            cell,
            nx,
            ny,
            buckets,
        })
    }

    /// Distance from `p` to the nearest indexed point.
    pub fn nearest_distance(&self, p: Point) -> f64 {
        let ci = ((p[0] - self.origin[0]) / self.cell).floor();
        let cj = ((p[1] - self.origin[1]) / self.cell).floor();
        let ci = ci.clamp(-1.0, self.nx as f64) as i64;
        let cj = cj.clamp(-1.0, self.ny as f64) as i64;
        // Lower bound on distance from p to any bucket outside the clamped ring.
        let outside = {
            let dx = (self.origin[0] - p[0])
                .max(p[0] - (self.origin[0] + self.nx as f64 * self.cell))
                .max(0.0);
            let dy = (self.origin[1] - p[1])
                .max(p[1] - (self.origin[1] + self.ny as f64 * self.cell))
                .max(0.0);
            dx.hypot(dy)
        };
        let mut best = f64::INFINITY;
        let max_ring = (self.nx.max(self.ny) + 2) as i64;
        for ring in 0..=max_ring {
            let reach = (ring - 1).max(0) as f64 * self.cell;
            if best <= reach.max(outside - self.cell) {
                break;
            }
            for j in cj - ring..=cj + ring {
                for i in ci - ring..=ci + ring {
                    if (j - cj).abs() != ring && (i - ci).abs() != ring {
                        continue;
                    }
                    if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
                        continue;
                    }
                    for q in &self.buckets[j as usize * self.nx + i as usize] {
                        best = best.min(dist(p, *q));
                    }
                }
            }
        }
        best
    }
}

/// Symmetric Hausdorff distance between two nonempty point sets.
pub fn hausdorff_points(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let ia = PointIndex::new(a)?;
    let ib = PointIndex::new(b)?;
    let ab = a
        .iter()
        .map(|&p| ib.nearest_distance(p))
        .fold(0.0, f64::max);
    let ba = b
        .iter()
        .map(|&p| ia.nearest_distance(p))
        .fold(0.0, f64::max);
    Ok(ab.max(ba))
}

/// Hausdorff distance between two site sets in scaled coordinates.
pub fn hausdorff(a: &SiteSet, b: &SiteSet, m: Resolution) -> Result<f64> {
    hausdorff_points(&a.points(m), &b.points(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(m: i64) -> Resolution {
        Resolution::new(m).unwrap()
    }

    #[test]
    fn neighbors_fixed_order() {
        let n = neighbors(Site::new(0, 0));
        assert_eq!(
            n,
            [
                Site::new(1, 0),
                Site::new(-1, 0),
                Site::new(0, 1),
                Site::new(0, -1)
            ]
        );
        let n = neighbors(Site::new(3, -2));
        assert_eq!(
            n,
            [
                Site::new(4, -2),
                Site::new(2, -2),
                Site::new(3, -1),
                Site::new(3, -3)
            ]
        );
    }

    #[test]
    fn two_step_neighborhood() {
        let mut all = Vec::new();
        for a in neighbors(Site::new(0, 0)) {
            all.extend(neighbors(a));
        }
        let origin_hits = all.iter().filter(|z| **z == Site::new(0, 0)).count();
        assert_eq!(origin_hits, 4);
        let mut others: Vec<Site> = all.into_iter().filter(|z| *z != Site::new(0, 0)).collect();
        others.sort();
        others.dedup();
        assert_eq!(others.len(), 8);
        assert!(others.iter().all(|z| z.x.abs() + z.y.abs() == 2));
    }

    #[test]
    fn boundary_small_cases() {
        let single = SiteSet::from_sites([Site::new(0, 0)]);
        assert_eq!(boundary(&single).to_vec(), vec![Site::new(0, 0)]);
        let b3 = boundary(&SiteSet::block(-1, -1, 1, 1));
        assert_eq!(b3.len(), 8);
        assert!(!b3.contains(Site::new(0, 0)));
    }

    #[test]
    fn boundary_five_block_matches_scan() {
        let a = SiteSet::block(0, 0, 4, 4);
        let mut expected = 0;
        for z in a.iter() {
            let mut outside = false;
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (x, y) = (z.x + dx, z.y + dy);
                if !(0..=4).contains(&x) || !(0..=4).contains(&y) {
                    outside = true;
                }
            }
            if outside {
                expected += 1;
            }
        }
        assert_eq!(expected, 16);
        assert_eq!(boundary(&a).len(), expected);
    }

    #[test]
    fn unit_disk_sites() {
        let d = Region::disk([0.0, 0.0], 1.0);
        let s1 = sites_in(&d, res(1)).unwrap();
        let mut v = s1.to_vec();
        v.sort();
        assert_eq!(
            v,
            vec![
                Site::new(-1, 0),
                Site::new(0, -1),
                Site::new(0, 0),
                Site::new(0, 1),
                Site::new(1, 0)
            ]
        );

        let brute = (-10..=10i32)
            .flat_map(|x| (-10..=10i32).map(move |y| (x, y)))
            .filter(|(x, y)| x * x + y * y <= 100)
            .count();
        assert_eq!(brute, 317);
        assert_eq!(sites_in(&d, res(10)).unwrap().len(), 317);
        assert!(sites_in(&Region::empty(), res(10)).unwrap().is_empty());
    }

    #[test]
    fn neighborhoods_of_disk_are_disks() {
        let d = Region::disk([0.2, -0.1], 0.7);
        let (outer, inner) = eps_neighborhoods(&d, 0.1).unwrap();
        for p in [
            [0.2, 0.65],
            [0.2, 0.75],
            [0.2, 0.55],
            [1.0, -0.1],
            [0.85, -0.1],
        ] {
            let r = dist(p, [0.2, -0.1]);
            assert_eq!(outer.contains(p), r < 0.8, "{p:?}");
            assert_eq!(inner.contains(p), r < 0.6, "{p:?}");
        }
        assert!(matches!(
            eps_neighborhoods(&d, -0.1),
            Err(Error::NegativeEpsilon(_))
        ));
    }

    #[test]
    fn zero_width_neighborhoods() {
        let sq = Region::square(0.0, 0.0, 1.0);
        let (outer, inner) = eps_neighborhoods(&sq, 0.0).unwrap();
        assert!(outer.contains([1.0, 0.5]));
        assert!(!inner.contains([1.0, 0.5]));
        assert!(inner.contains([0.5, 0.5]));
    }

    #[test]
    fn square_inner_excludes_near_edge() {
        let sq = Region::square(0.0, 0.0, 1.0);
        let (_, inner) = eps_neighborhoods(&sq, 0.1).unwrap();
        assert!(!inner.contains([0.95, 0.5]));
        assert!(inner.contains([0.5, 0.5]));
    }

    #[test]
    fn hausdorff_examples() {
        let m = res(1);
        let a = SiteSet::from_sites([Site::new(0, 0)]);
        let b = SiteSet::from_sites([Site::new(3, 4)]);
        assert_eq!(hausdorff(&a, &b, m).unwrap(), 5.0);
        assert_eq!(hausdorff(&a, &a, m).unwrap(), 0.0);

        let x = SiteSet::block(0, 0, 9, 9);
        let y = SiteSet::block(2, 0, 11, 9);
        let brute = {
            let (pa, pb) = (x.points(m), y.points(m));
            let one = |p: &[Point], q: &[Point]| {
                p.iter()
                    .map(|a| q.iter().map(|b| dist(*a, *b)).fold(f64::INFINITY, f64::min))
                    .fold(0.0, f64::max)
            };
            one(&pa, &pb).max(one(&pb, &pa))
        };
        assert_eq!(brute, 2.0);
        assert_eq!(hausdorff(&x, &y, m).unwrap(), brute);
        assert!(matches!(
            hausdorff(&SiteSet::empty(), &a, m),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn region_json_encoding() {
        let r: Region = serde_json::from_str(
            r#"{"difference": [{"disk": {"center": [0, 0], "radius": 2}}, {"union": [{"polygon": [[0,0],[1,0],[0,1]]}]}]}"#,
        )
        .unwrap();
        match &r {
            Region::Difference(a, b) => {
                assert_eq!(**a, Region::disk([0.0, 0.0], 2.0));
                assert!(matches!(**b, Region::Union(ref v) if v.len() == 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        let back: Region = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn polygon_validation() {
        let bow = Region::Polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(bow.validate().is_err());
        assert!(Region::square(0.0, 0.0, 1.0).validate().is_ok());
        assert!(Region::disk([0.0, 0.0], 0.0).validate().is_err());
    }

    #[test]
    fn site_set_grows_and_iterates() {
        let mut s = SiteSet::new(SiteBox::new(0, 0, 1, 1));
        assert!(s.insert(Site::new(5, -3)));
        assert!(!s.insert(Site::new(5, -3)));
        s.insert(Site::new(0, 0));
        assert_eq!(s.len(), 2);
        assert!(s.contains(Site::new(5, -3)));
        assert!(s.remove(Site::new(5, -3)));
        assert_eq!(s.to_vec(), vec![Site::new(0, 0)]);
    }
}
