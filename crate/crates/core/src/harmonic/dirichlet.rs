//! Discrete Dirichlet problems for the five-point Laplacian.
//!
//! Two boundary models are supported. On the lattice model the boundary is
//! the set of sites adjacent to the domain. On the grid model the walk moves
//! along lattice edges and exits where an edge crosses the boundary curve, so
//! a site next to the curve sees a shortened edge of length `t/m` and the
//! harmonicity condition becomes `Σ_k (u_k − u)/t_k = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lattice::{neighbors, Point, Resolution, Shape, Site, SiteBox, SiteSet};

/// Default bound on `|Δ_h u|` at interior sites.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Above this estimated cost (`n · bandwidth²`) the iterative solver is used.
const DIRECT_COST_LIMIT: f64 = 2e9;

/// Shortest edge fraction kept on the grid model.
const MIN_EDGE_FRACTION: f64 = 1e-9;

const NONE: u32 = u32::MAX;

/// Signed distance below which a site counts as lying on a boundary curve.
const ON_CURVE: f64 = 1e-12;

/// Where a grid-model walk leaves the domain: along the edge from `inside`
/// to `outside`, at fraction `t` of its length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exit {
    pub inside: Site,
    pub outside: Site,
    pub t: f64,
    pub point: Point,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Banded Cholesky factorization in row-major site order.
    Direct,
    /// Conjugate gradients with diagonal preconditioning.
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: Method,
    pub unknowns: usize,
    pub iterations: usize,
    /// Largest `|Δ_h u|`-scaled residual at an interior site.
    pub residual: f64,
}

/// Symmetric positive definite system on the interior sites.
#[derive(Clone, Debug)]
pub struct DirichletProblem {
    interior: Vec<Site>,
    index: Grid<u32>,
    nbr: Vec<[u32; 4]>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
    /// Values at lattice boundary sites, reported with the solution.
    boundary: Vec<(Site, f64)>,
    pub tolerance: f64,
}

impl DirichletProblem {
    fn skeleton(interior: &SiteSet) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::EmptySet);
        }
        let sites = interior.to_vec();
        let mut index = Grid::new(interior.bounds().expand(1), NONE);
        for (i, &z) in sites.iter().enumerate() {
            index[z] = i as u32;
        }
        let nbr = sites
            .iter()
            .map(|&z| neighbors(z).map(|w| index[w]))
            .collect();
        let n = sites.len();
        Ok(DirichletProblem {
            interior: sites,
            index,
            nbr,
            diag: vec![0.0; n],
            rhs: vec![0.0; n],
            boundary: Vec::new(),
            tolerance: SOLVER_TOLERANCE,
        })
    }

    /// Lattice model: the walk stops on the first site outside `interior`,
    /// where the data `f` is read.
    pub fn lattice(interior: &SiteSet, f: impl Fn(Site) -> f64) -> Result<Self> {
        DirichletProblem::lattice_edges(interior, |_, b| f(b), &f)
    }

    /// Lattice model with data depending on the last edge: a walk stepping
    /// from interior `a` to boundary `b` collects `f(a, b)`. The reported
    /// value at each boundary site is `at(b)`.
    pub fn lattice_edges(
        interior: &SiteSet,
        f: impl Fn(Site, Site) -> f64,
        at: impl Fn(Site) -> f64,
    ) -> Result<Self> {
        let mut p = DirichletProblem::skeleton(interior)?;
        for b in interior.outer_boundary().iter() {
            p.boundary.push((b, at(b)));
        }
        for i in 0..p.interior.len() {
            p.diag[i] = 4.0;
            let a = p.interior[i];
            for (k, w) in neighbors(a).into_iter().enumerate() {
                if p.nbr[i][k] == NONE {
                    let v = f(a, w);
                    if !v.is_finite() {
                        return Err(Error::Dirichlet(format!(
                            "boundary value at {w} is not finite"
                        )));
                    }
                    p.rhs[i] += v;
                }
            }
        }
        Ok(p)
    }

    /// Grid model: the domain is the set of sites strictly inside `shape`,
    /// and a walk leaving along an edge stops where the edge meets the
    /// boundary curve, where the data `f` is read.
    pub fn grid(
        shape: &(impl Shape + ?Sized),
        m: Resolution,
        f: impl Fn(Exit) -> f64,
    ) -> Result<Self> {
        let interior = grid_interior(shape, m)?;
        let mut p = DirichletProblem::skeleton(&interior)?;
        for i in 0..p.interior.len() {
            let z = p.interior[i];
            let a = z.to_point(m);
            for (k, w) in neighbors(z).into_iter().enumerate() {
                if p.nbr[i][k] != NONE {
                    p.diag[i] += 1.0;
                    continue;
                }
                let b = w.to_point(m);
                let t = edge_crossing(shape, a, b).max(MIN_EDGE_FRACTION);
                let exit = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let v = f(Exit {
                    inside: z,
                    outside: w,
                    t,
                    point: exit,
                });
                if !v.is_finite() {
                    return Err(Error::Dirichlet(format!(
                        "boundary value near {w} is not finite"
                    )));
                }
                p.diag[i] += 1.0 / t;
                p.rhs[i] += v / t;
            }
        }
        Ok(p)
    }

    pub fn interior(&self) -> &[Site] {
        &self.interior
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    /// Boundary sites of the lattice model with their data.
    pub fn boundary_values(&self) -> &[(Site, f64)] {
        &self.boundary
    }

    /// Adds a source of strength `amount` at an interior site, so that the
    /// solution satisfies `Δ_h u(z) = −amount` there.
    pub fn add_source(&mut self, z: Site, amount: f64) -> Result<()> {
        let i = self.slot(z).ok_or(Error::OutsideField(z))?;
        self.rhs[i] += 4.0 * amount;
        Ok(())
    }

    pub fn slot(&self, z: Site) -> Option<usize> {
        self.index
            .get(z)
            .filter(|&&i| i != NONE)
            .map(|&i| i as usize)
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..u.len() {
            let mut s = self.diag[i] * u[i];
            for &j in &self.nbr[i] {
                if j != NONE {
                    s -= u[j as usize];
                }
            }
            out[i] = s;
        }
    }

    /// Largest residual, scaled like `Δ_h` (divided by 4).
    pub fn residual(&self, u: &[f64]) -> f64 {
        let mut au = vec![0.0; u.len()];
        self.apply(u, &mut au);
        au.iter()
            .zip(&self.rhs)
            .map(|(a, b)| (b - a).abs())
            .fold(0.0, f64::max)
            / 4.0
    }

    fn bandwidth(&self) -> usize {
        let mut b = 0usize;
        for (i, nb) in self.nbr.iter().enumerate() {
            for &j in nb {
                if j != NONE {
                    b = b.max(i.abs_diff(j as usize));
                }
            }
        }
        b
    }

    pub fn default_method(&self) -> Method {
        let b = self.bandwidth() as f64;
        if self.len() as f64 * b * b <= DIRECT_COST_LIMIT {
            Method::Direct
        } else {
            Method::ConjugateGradient
        }
    }

    pub fn solve(&self) -> Result<(Vec<f64>, SolveStats)> {
        self.solve_with(self.default_method())
    }

    pub fn solve_with(&self, method: Method) -> Result<(Vec<f64>, SolveStats)> {
        let (u, iterations) = match method {
            Method::Direct => self.solve_direct()?,
            Method::ConjugateGradient => self.solve_cg()?,
        };
        let residual = self.residual(&u);
        if residual > self.tolerance {
            return Err(Error::Dirichlet(format!(
                "{method:?} solve stopped at residual {residual:e}"
            )));
        }
        Ok((
            u,
            SolveStats {
                method,
                unknowns: self.len(),
                iterations,
                residual,
            },
        ))
    }

    fn solve_direct(&self) -> Result<(Vec<f64>, usize)> {
        let n = self.len();
        let b = self.bandwidth();
        let w = b + 1;
        // Row i holds L(i, i−b ..= i).
        let mut l = vec![0.0f64; n * w];
        for i in 0..n {
            l[i * w + b] = self.diag[i];
            for &j in &self.nbr[i] {
                if j != NONE && (j as usize) < i {
                    l[i * w + (j as usize + b - i)] = -1.0;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let k0 = lo.max(j.saturating_sub(b));
                let ri = &l[i * w + (k0 + b - i)..i * w + (j + b - i)];
                let rj = &l[j * w + (k0 + b - j)..j * w + b];
                let dot: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
                let s = l[i * w + (j + b - i)] - dot;
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::Dirichlet(format!(
                            "system is singular at {}",
                            self.interior[i]
                        )));
                    }
                    l[i * w + b] = s.sqrt();
                } else {
                    l[i * w + (j + b - i)] = s / l[j * w + b];
                }
            }
        }
        let substitute = |rhs: &[f64]| {
            let mut y = rhs.to_vec();
            for i in 0..n {
                let lo = i.saturating_sub(b);
                let mut s = y[i];
                for k in lo..i {
                    s -= l[i * w + (k + b - i)] * y[k];
                }
                y[i] = s / l[i * w + b];
            }
            for i in (0..n).rev() {
                y[i] /= l[i * w + b];
                let yi = y[i];
                let lo = i.saturating_sub(b);
                for k in lo..i {
                    y[k] -= l[i * w + (k + b - i)] * yi;
                }
            }
            y
        };
        let mut u = substitute(&self.rhs);
        // Iterative refinement against the rounding of the factorization.
        let mut steps = 1;
        let mut au = vec![0.0; n];
        for _ in 0..3 {
            if self.residual(&u) <= self.tolerance * 0.1 {
                break;
            }
            self.apply(&u, &mut au);
            let r: Vec<f64> = self.rhs.iter().zip(&au).map(|(a, b)| a - b).collect();
            let d = substitute(&r);
            for (x, dx) in u.iter_mut().zip(d) {
                *x += dx;
            }
            steps += 1;
        }
        Ok((u, steps))
    }

    fn solve_cg(&self) -> Result<(Vec<f64>, usize)> {
        let n = self.len();
        let mut u = vec![0.0f64; n];
        let mut r = self.rhs.clone();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0f64; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let stop = self.tolerance * 0.25 * 4.0;
        let max_iter = 20 * n + 100;
        for it in 0..max_iter {
            if r.iter().fold(0.0f64, |a, &v| a.max(v.abs())) <= stop {
                // Recompute the true residual; drift in `r` is possible.
                self.apply(&u, &mut ap);
                r = self.rhs.iter().zip(&ap).map(|(a, b)| a - b).collect();
                if r.iter().fold(0.0f64, |a, &v| a.max(v.abs())) <= stop {
                    return Ok((u, it));
                }
                z = r.iter().zip(&self.diag).map(|(a, d)| a / d).collect();
                p.clone_from(&z);
                rz = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            }
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(Error::Dirichlet("conjugate gradient breakdown".into()));
            }
            let alpha = rz / pap;
            for i in 0..n {
                u[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                z[i] = r[i] / self.diag[i];
            }
            let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::Dirichlet(format!(
            "conjugate gradient did not converge in {max_iter} iterations"
        )))
    }

    /// Packs a solution into a grid covering the interior and, on the
    /// lattice model, its boundary.
    pub fn to_grid(&self, u: &[f64]) -> (SiteSet, Grid<f64>) {
        let bounds: SiteBox = self.index.bounds();
        let mut grid = Grid::new(bounds, 0.0);
        let mut domain = SiteSet::new(bounds);
        for (&z, &v) in self.interior.iter().zip(u) {
            grid[z] = v;
            domain.insert(z);
        }
        for &(z, v) in &self.boundary {
            grid[z] = v;
            domain.insert(z);
        }
        (domain, grid)
    }
}

/// Sites strictly inside `shape`; sites on the curve up to rounding are
/// treated as boundary.
pub fn grid_interior(shape: &(impl Shape + ?Sized), m: Resolution) -> Result<SiteSet> {
    let all = crate::lattice::sites_in(shape, m)?;
    Ok(SiteSet::from_sites(all.iter().filter(|z| {
        shape.signed_distance(z.to_point(m)) < -ON_CURVE
    })))
}

/// Fraction `t ∈ (0, 1]` along the segment from an inside point `a` to an
/// outside point `b` where the boundary of `shape` is crossed.
pub fn edge_crossing(shape: &(impl Shape + ?Sized), a: Point, b: Point) -> f64 {
    let at = |t: f64| shape.signed_distance([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    if at(1.0) <= ON_CURVE {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
