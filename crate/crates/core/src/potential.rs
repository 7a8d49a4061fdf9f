//! The recurrent potential kernel `g` of simple random walk on Z².
//!
//! Every value has the exact form `a + b/π` with `a` an integer and `b`
//! rational, so the table is built in exact arithmetic and only rounded at
//! the end. The diagonal is known in closed form,
//! `g(n,n) = (4/π)·Σ_{k≤n} 1/(2k−1)`, and discrete harmonicity determines each
//! column of the octant `0 ≤ y ≤ x` from the previous two.

use std::io::{Read, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::Site;

/// Largest supported table half-width.
pub const MAX_HALF_WIDTH: i64 = 1024;

/// `λ = (2γ + ln 8)/π`, the constant term of the expansion
/// `g(z) = (2/π) ln|z| + λ + O(|z|⁻²)`.
pub const LAMBDA: f64 = 1.029_373_733_443_348_6;

/// Values of `g` on the box `[−L, L]²`.
#[derive(Clone, Debug)]
pub struct PotentialTable {
    half_width: i32,
    values: Vec<f64>,
}

/// Unit vector `n̂ = α₁ê_x + α₂(ê_x + ê_y)` with `α₁, α₂ ≥ 0`, i.e. a
/// direction of angle `θ ∈ [0, π/4]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Direction {
    pub fn from_angle(theta: f64) -> Result<Self> {
        if !(-1e-12..=std::f64::consts::FRAC_PI_4 + 1e-12).contains(&theta) {
            return Err(Error::Pole(format!(
                "direction angle {theta} outside [0, π/4]"
            )));
        }
        let theta = theta.clamp(0.0, std::f64::consts::FRAC_PI_4);
        let (s, c) = theta.sin_cos();
        Ok(Direction {
            alpha1: (c - s).max(0.0),
            alpha2: s,
        })
    }

    pub const EAST: Direction = Direction {
        alpha1: 1.0,
        alpha2: 0.0,
    };

    pub fn vector(&self) -> [f64; 2] {
        [self.alpha1 + self.alpha2, self.alpha2]
    }

    pub fn angle(&self) -> f64 {
        self.alpha2.atan2(self.alpha1 + self.alpha2)
    }
}

/// Fitted expansion parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub lambda: f64,
    /// `max |z|²·|g(z) − λ − (2/π) ln|z||` over `2 ≤ |z| ≤ L`.
    pub c1: f64,
}

/// Fixed-point `⌊2^bits / π⌋`.
fn inv_pi_fixed(bits: u64) -> BigInt {
    // π = 16 atan(1/5) − 4 atan(1/239), summed in fixed point with guard bits.
    let work = bits + 64;
    let one = BigInt::one() << work;
    let atan_inv = |k: u32| {
        let k = BigInt::from(k);
        let k2 = &k * &k;
        let mut power = &one / &k;
        let mut sum = power.clone();
        let mut n = 1u64;
        loop {
            power = &power / &k2;
            if power.is_zero() {
                break;
            }
            let term = &power / BigInt::from(2 * n + 1);
            if n % 2 == 1 {
                sum -= term;
            } else {
                sum += term;
            }
            n += 1;
        }
        sum
    };
    let pi = atan_inv(5) * 16 - atan_inv(239) * 4;
    (BigInt::one() << (work + bits)) / pi
}

fn big_ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    // Scale so the quotient carries at least 64 significant bits.
    let shift = (den.bits() as i64 - num.bits() as i64 + 64).max(0) as u64;
    let q = (num << shift) / den;
    let (neg, mag) = (q.is_negative(), q.abs());
    let excess = mag.bits().saturating_sub(64);
    let top = (&mag >> excess).to_u64().unwrap_or(u64::MAX) as f64;
    let v = top * 2f64.powi(excess as i32 - shift as i32);
    if neg {
        -v
    } else {
        v
    }
}

impl PotentialTable {
    /// Exact construction on `[−L, L]²`.
    pub fn exact(half_width: i64) -> Result<Self> {
        if !(2..=MAX_HALF_WIDTH).contains(&half_width) {
            return Err(Error::TableSize(half_width));
        }
        let l = half_width as usize;
        // Octant storage: entry (x, y) for 0 ≤ y ≤ x ≤ L at index x(x+1)/2 + y.
        // Each value is a + b/(D·π) with a, b integers and common denominator D.
        let mut den = BigInt::one();
        for k in 1..=l as u64 {
            den = den.lcm(&BigInt::from(2 * k - 1));
        }
        let at = |x: usize, y: usize| x * (x + 1) / 2 + y;
        let n = at(l, l) + 1;
        let mut a = vec![BigInt::zero(); n];
        let mut b = vec![BigInt::zero(); n];
        // Diagonal in closed form.
        let mut harmonic = BigInt::zero();
        for k in 1..=l {
            harmonic += &den / BigInt::from(2 * k as u64 - 1);
            b[at(k, k)] = &harmonic * 4;
        }
        a[at(1, 0)] = BigInt::one();
        let get = |v: &Vec<BigInt>, x: i64, y: i64| -> BigInt {
            let (x, y) = (x.unsigned_abs() as usize, y.unsigned_abs() as usize);
            let (x, y) = if y > x { (y, x) } else { (x, y) };
            v[at(x, y)].clone()
        };
        for x in 1..l as i64 {
            for v in [&mut a, &mut b] {
                let next = get(v, x, x) * 2 - get(v, x, x - 1);
                v[at(x as usize + 1, x as usize)] = next;
                for y in (0..x).rev() {
                    let next =
                        get(v, x, y) * 4 - get(v, x - 1, y) - get(v, x, y + 1) - get(v, x, y - 1);
                    v[at(x as usize + 1, y as usize)] = next;
                }
            }
        }

        let max_bits = a
            .iter()
            .chain(b.iter())
            .map(|v| v.bits())
            .max()
            .unwrap_or(0)
            + den.bits();
        let precision = max_bits + 96;
        let inv_pi = inv_pi_fixed(precision);
        let scale = &den << precision;
        let octant: Vec<f64> = (0..n)
            .map(|i| {
                let num = (&a[i] * &scale) + &b[i] * &inv_pi;
                big_ratio_to_f64(&num, &scale)
            })
            .collect();

        let side = 2 * l + 1;
        let mut values = vec![0.0; side * side];
        for yy in 0..side {
            for xx in 0..side {
                let (x, y) = (
                    (xx as i64 - l as i64).unsigned_abs() as usize,
                    (yy as i64 - l as i64).unsigned_abs() as usize,
                );
                let (x, y) = if y > x { (y, x) } else { (x, y) };
                values[yy * side + xx] = octant[at(x, y)];
            }
        }
        Ok(PotentialTable {
            half_width: half_width as i32,
            values,
        })
    }

    #[inline]
    pub fn half_width(&self) -> i32 {
        self.half_width
    }

    #[inline]
    pub fn contains(&self, z: Site) -> bool {
        z.x.abs() <= self.half_width && z.y.abs() <= self.half_width
    }

    #[inline]
    pub fn get(&self, z: Site) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::OutOfTable {
                site: z,
                half_width: self.half_width,
            });
        }
        Ok(self.at(z))
    }

    /// Unchecked lookup; panics outside the table.
    #[inline]
    pub fn at(&self, z: Site) -> f64 {
        let l = self.half_width;
        let side = (2 * l + 1) as usize;
        self.values[(z.y + l) as usize * side + (z.x + l) as usize]
    }

    /// `(1/4)Σ g(neighbors) − g(z)` for `z` strictly inside the table.
    pub fn laplacian(&self, z: Site) -> Result<f64> {
        let l = self.half_width;
        if z.x.abs() >= l || z.y.abs() >= l {
            return Err(Error::OutOfTable {
                site: z,
                half_width: l,
            });
        }
        let s: f64 = crate::lattice::neighbors(z)
            .iter()
            .map(|&w| self.at(w))
            .sum();
        Ok(0.25 * s - self.at(z))
    }

    /// Largest `|Δ_h g(z)|` over interior `z ≠ 0`, and `Δ_h g(0)`.
    pub fn harmonicity_residual(&self) -> (f64, f64) {
        let l = self.half_width;
        let mut worst = 0.0f64;
        for y in 1 - l..l {
            for x in 1 - l..l {
                let z = Site::new(x, y);
                if z != Site::new(0, 0) {
                    worst = worst.max(self.laplacian(z).expect("interior").abs());
                }
            }
        }
        (worst, self.laplacian(Site::new(0, 0)).expect("interior"))
    }

    /// `∂_n̂ g(z) = α₁ g(z−1) + α₂ g(z−(1+i)) − (α₁+α₂) g(z)`.
    pub fn dir_derivative(&self, n: Direction, z: Site) -> Result<f64> {
        Ok(
            n.alpha1 * self.get(z.offset(-1, 0))? + n.alpha2 * self.get(z.offset(-1, -1))?
                - (n.alpha1 + n.alpha2) * self.get(z)?,
        )
    }

    /// Least-squares λ over `L/2 ≤ |z| ≤ L`, then the remainder constant `C₁`.
    pub fn fit_lambda(&self) -> AsymptoticParams {
        let l = f64::from(self.half_width);
        let (mut sum, mut count) = (0.0, 0usize);
        let mut c1_sites = Vec::new();
        for z in self.sites() {
            let r = (z.norm_sq() as f64).sqrt();
            if r < 2.0 || r > l {
                continue;
            }
            let rem = self.at(z) - std::f64::consts::FRAC_2_PI * r.ln();
            if r >= l / 2.0 {
                sum += rem;
                count += 1;
            }
            c1_sites.push((r, rem));
        }
        let lambda = sum / count as f64;
        let c1 = c1_sites
            .iter()
            .map(|(r, rem)| r * r * (rem - lambda).abs())
            .fold(0.0, f64::max);
        AsymptoticParams { lambda, c1 }
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> {
        let l = self.half_width;
        (-l..=l).flat_map(move |y| (-l..=l).map(move |x| Site::new(x, y)))
    }

    fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes `<stem>.json` (header) and `<stem>.bin` (little-endian doubles).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let header = TableHeader {
            half_width: self.half_width,
            checksum: self.checksum(),
        };
        let mut bin = std::fs::File::create(dir.join(format!("{stem}.bin")))?;
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bin.write_all(&bytes)?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_vec_pretty(&header)?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let header: TableHeader =
            serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
        let mut bytes = Vec::new();
        std::fs::File::open(dir.join(format!("{stem}.bin")))?.read_to_end(&mut bytes)?;
        let side = (2 * header.half_width + 1) as usize;
        if header.half_width < 2 || bytes.len() != side * side * 8 {
            return Err(Error::CorruptTable(format!(
                "expected {} bytes, found {}",
                side * side * 8,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let table = PotentialTable {
            half_width: header.half_width,
            values,
        };
        if table.checksum() != header.checksum {
            return Err(Error::CorruptTable("checksum mismatch".into()));
        }
        Ok(table)
    }

    /// Loads a cached table of half-width at least `half_width`, building and
    /// caching it if absent or corrupt. Returns the table and whether it was
    /// read from the cache.
    pub fn cached(dir: &Path, half_width: i64) -> Result<(Self, bool)> {
        let stem = format!("potential-{half_width}");
        match Self::load(dir, &stem) {
            Ok(t) if i64::from(t.half_width) == half_width => return Ok((t, true)),
            Ok(_) => {}
            Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => log::warn!("rebuilding potential table: {e}"),
        }
        let t = Self::exact(half_width)?;
        t.save(dir, &stem)?;
        Ok((t, false))
    }
}

#[derive(Serialize, Deserialize)]
struct TableHeader {
    #[serde(rename = "L")]
    half_width: i32,
    checksum: String,
}

/// Largest `c` such that `∂_n̂ g > 0` on every lattice site with `z·n̂ ≤ c`,
/// `|z| ≤ L/2`.
pub fn c_for_direction_lattice(table: &PotentialTable, n: Direction) -> f64 {
    let nv = n.vector();
    let r = table.half_width / 2;
    let mut c = f64::INFINITY;
    for y in -r..=r {
        for x in -r..=r {
            if x * x + y * y > r * r {
                continue;
            }
            let z = Site::new(x, y);
            if table.dir_derivative(n, z).expect("inside table") <= 0.0 {
                c = c.min(f64::from(x) * nv[0] + f64::from(y) * nv[1]);
            }
        }
    }
    c
}

/// As [`c_for_direction_lattice`], with `∂_n̂ g` extended along lattice
/// edges by linear interpolation so that sign changes between neighboring
/// sites are located at their interpolated zero crossing.
pub fn c_for_direction_grid(table: &PotentialTable, n: Direction) -> f64 {
    let nv = n.vector();
    let r = table.half_width / 2;
    let dot = |p: [f64; 2]| p[0] * nv[0] + p[1] * nv[1];
    let inside = |x: i32, y: i32| x * x + y * y <= r * r;
    let mut c = c_for_direction_lattice(table, n);
    for y in -r..=r {
        for x in -r..=r {
            if !inside(x, y) {
                continue;
            }
            let v = table
                .dir_derivative(n, Site::new(x, y))
                .expect("inside table");
            for (dx, dy) in [(1, 0), (0, 1)] {
                if !inside(x + dx, y + dy) {
                    continue;
                }
                let w = table
                    .dir_derivative(n, Site::new(x + dx, y + dy))
                    .expect("inside table");
                if (v > 0.0) != (w > 0.0) {
                    let t = v / (v - w);
                    c = c.min(dot([
                        f64::from(x) + t * f64::from(dx),
                        f64::from(y) + t * f64::from(dy),
                    ]));
                }
            }
        }
    }
    c
}

/// Evenly spaced directions over `[0, π/4]`.
pub fn directions(count: usize) -> Vec<Direction> {
    let count = count.max(1);
    (0..count)
        .map(|k| {
            let theta = if count == 1 {
                0.0
            } else {
                std::f64::consts::FRAC_PI_4 * k as f64 / (count - 1) as f64
            };
            Direction::from_angle(theta).expect("angle in range")
        })
        .collect()
}

/// Minimum over `count` sampled directions of the grid-interpolated `c`.
pub fn estimate_c(table: &PotentialTable, count: usize) -> f64 {
    directions(count)
        .into_iter()
        .map(|n| c_for_direction_grid(table, n))
        .fold(f64::INFINITY, f64::min)
}

/// Lattice-only variant of [`estimate_c`].
pub fn estimate_c_lattice(table: &PotentialTable, count: usize) -> f64 {
    directions(count)
        .into_iter()
        .map(|n| c_for_direction_lattice(table, n))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionReport {
    pub checked: usize,
    pub in_level_set: usize,
    pub violations: Vec<Site>,
}

/// Checks `{∂_n̂ g < −1/(2mR₀)} ⊆ B⁻` on every table site, where `B⁻` is the
/// open disk of radius `m·R₀′` tangent to the origin with center `m R₀′ n̂`.
pub fn check_level_set_inclusion(
    table: &PotentialTable,
    n: Direction,
    m: u32,
    r0: f64,
    r0_prime: f64,
) -> InclusionReport {
    let nv = n.vector();
    let mf = f64::from(m);
    let threshold = -1.0 / (2.0 * mf * r0);
    let radius = mf * r0_prime;
    let center = [radius * nv[0], radius * nv[1]];
    let l = table.half_width;
    let mut rep = InclusionReport {
        checked: 0,
        in_level_set: 0,
        violations: Vec::new(),
    };
    for y in 1 - l..=l {
        for x in 1 - l..=l {
            let z = Site::new(x, y);
            rep.checked += 1;
            let d = table.dir_derivative(n, z).expect("inside table");
            if d < threshold {
                rep.in_level_set += 1;
                let p = [f64::from(x) - center[0], f64::from(y) - center[1]];
                if p[0].hypot(p[1]) >= radius {
                    rep.violations.push(z);
                }
            }
        }
    }
    rep
}
