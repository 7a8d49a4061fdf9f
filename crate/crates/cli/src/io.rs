//! Snapshot encodings: binary PGM images and run-length JSON.

use idla_core::lattice::{Site, SiteBox, SiteSet};
use serde::{Deserialize, Serialize};

/// Smallest box holding every site of `set`, or `None` when it is empty.
pub fn tight_box(set: &SiteSet) -> Option<SiteBox> {
    let mut it = set.iter();
    let first = it.next()?;
    let mut b = SiteBox::new(first.x, first.y, first.x, first.y);
    for z in it {
        b = b.union(&SiteBox::new(z.x, z.y, z.x, z.y));
    }
    Some(b)
}

/// Binary (P5) PGM of `set`: occupied sites white, one pixel per site, the
/// top row at the largest `y`.
pub fn set_pgm(set: &SiteSet) -> Vec<u8> {
    let b = tight_box(set).unwrap_or(SiteBox::new(0, 0, 0, 0));
    let (w, h) = (b.width(), b.height());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for y in (b.y0..=b.y1).rev() {
        for x in b.x0..=b.x1 {
            out.push(if set.contains(Site::new(x, y)) {
                255
            } else {
                0
            });
        }
    }
    out
}

/// Occupied sites as horizontal runs `[y, x_start, length]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub m: u32,
    pub s: f64,
    pub particles: usize,
    pub occupied: usize,
    pub runs: Vec<[i32; 3]>,
}

impl Snapshot {
    pub fn new(set: &SiteSet, m: u32, s: f64, particles: usize) -> Self {
        let mut runs = Vec::new();
        if let Some(b) = tight_box(set) {
            for y in b.y0..=b.y1 {
                let mut start: Option<i32> = None;
                for x in b.x0..=b.x1 + 1 {
                    let on = x <= b.x1 && set.contains(Site::new(x, y));
                    match (on, start) {
                        (true, None) => start = Some(x),
                        (false, Some(x0)) => {
                            runs.push([y, x0, x - x0]);
                            start = None;
                        }
                        _ => {}
                    }
                }
            }
        }
        Snapshot {
            m,
            s,
            particles,
            occupied: set.len(),
            runs,
        }
    }

    pub fn to_set(&self) -> SiteSet {
        SiteSet::from_sites(
            self.runs
                .iter()
                .flat_map(|&[y, x0, n]| (x0..x0 + n).map(move |x| Site::new(x, y))),
        )
    }
}
