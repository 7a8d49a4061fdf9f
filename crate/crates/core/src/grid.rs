//! Dense per-site arrays over a rectangle of sites.

use crate::lattice::{Site, SiteBox};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    bounds: SiteBox,
    width: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new(bounds: SiteBox, fill: T) -> Self {
        let width = bounds.width();
        Grid {
            bounds,
            width,
            data: vec![fill; width * bounds.height()],
        }
    }

    /// Copy onto a larger rectangle, filling new cells with `fill`.
    pub fn resized(&self, bounds: SiteBox, fill: T) -> Self {
        let mut out = Grid::new(bounds, fill);
        for z in self.bounds.sites() {
            if bounds.contains(z) {
                out[z] = self[z].clone();
            }
        }
        out
    }
}

impl<T> Grid<T> {
    #[inline]
    pub fn bounds(&self) -> SiteBox {
        self.bounds
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.bounds.height()
    }

    #[inline]
    pub fn contains(&self, z: Site) -> bool {
        self.bounds.contains(z)
    }

    #[inline]
    pub fn index(&self, z: Site) -> usize {
        (z.y - self.bounds.y0) as usize * self.width + (z.x - self.bounds.x0) as usize
    }

    #[inline]
    pub fn site(&self, i: usize) -> Site {
        Site::new(
            self.bounds.x0 + (i % self.width) as i32,
            self.bounds.y0 + (i / self.width) as i32,
        )
    }

    pub fn get(&self, z: Site) -> Option<&T> {
        self.contains(z).then(|| &self.data[self.index(z)])
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = (Site, &T)> {
        self.data.iter().enumerate().map(|(i, v)| (self.site(i), v))
    }
}

impl<T> std::ops::Index<Site> for Grid<T> {
    type Output = T;
    #[inline]
    fn index(&self, z: Site) -> &T {
        &self.data[Grid::index(self, z)]
    }
}

impl<T> std::ops::IndexMut<Site> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, z: Site) -> &mut T {
        let i = Grid::index(self, z);
        &mut self.data[i]
    }
}
