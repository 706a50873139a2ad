//! Uniform cell-centred grids and axis-aligned boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[lo, hi]` into `n` cells. Nodes are the cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidGrid(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 cells, got {n}")));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn edge(&self, i: usize) -> f64 {
        if i == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.h()
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.edge(i)).collect()
    }

    /// Index of the cell containing `x`; the right endpoint belongs to the last cell.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let i = ((x - self.lo) / self.h()).floor() as usize;
        Some(i.min(self.n - 1))
    }

    /// Linear interpolation of cell-centred `values` at `x`, constant beyond the outer centres.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let t = (x - self.lo) / self.h() - 0.5;
        if t <= 0.0 {
            return values[0];
        }
        let last = (self.n - 1) as f64;
        if t >= last {
            return values[self.n - 1];
        }
        let i = t.floor() as usize;
        let w = t - i as f64;
        values[i] * (1.0 - w) + values[i + 1] * w
    }
}

/// Tensor product of two 1-D grids. Values are stored row-major with `x` as the row index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub gx: Grid1D,
    pub gy: Grid1D,
}

impl Grid2D {
    pub fn new(gx: Grid1D, gy: Grid1D) -> Self {
        Self { gx, gy }
    }

    /// Square grid with `n` cells per side on `[0,1]^2`.
    pub fn unit_square(n: usize) -> Result<Self> {
        let g = Grid1D::new(0.0, 1.0, n)?;
        Ok(Self { gx: g, gy: g })
    }

    pub fn cell_area(&self) -> f64 {
        self.gx.h() * self.gy.h()
    }

    pub fn len(&self) -> usize {
        self.gx.len() * self.gy.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.gy.len() + j
    }

    pub fn support(&self) -> Rect {
        Rect::new(self.gx.lo(), self.gx.hi(), self.gy.lo(), self.gy.hi())
    }

    /// Cell `(i, j)` as a box.
    pub fn cell(&self, i: usize, j: usize) -> Rect {
        Rect::new(self.gx.edge(i), self.gx.edge(i + 1), self.gy.edge(j), self.gy.edge(j + 1))
    }

    /// Bilinear interpolation of cell-centred row-major `values`.
    pub fn interpolate(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let (nx, ny) = (self.gx.len(), self.gy.len());
        let (i0, i1, wx) = bracket(self.gx, x);
        let (j0, j1, wy) = bracket(self.gy, y);
        let v = |i: usize, j: usize| values[i * ny + j];
        debug_assert!(i1 < nx && j1 < ny);
        (1.0 - wx) * ((1.0 - wy) * v(i0, j0) + wy * v(i0, j1))
            + wx * ((1.0 - wy) * v(i1, j0) + wy * v(i1, j1))
    }
}

fn bracket(g: Grid1D, x: f64) -> (usize, usize, f64) {
    let t = (x - g.lo()) / g.h() - 0.5;
    let last = g.len() - 1;
    if t <= 0.0 {
        (0, 0, 0.0)
    } else if t >= last as f64 {
        (last, last, 0.0)
    } else {
        let i = t.floor() as usize;
        (i, i + 1, t - i as f64)
    }
}

/// Closed axis-aligned box `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let r = Rect::new(
            self.x0.max(other.x0),
            self.x1.min(other.x1),
            self.y0.max(other.y0),
            self.y1.min(other.y1),
        );
        (r.x1 > r.x0 && r.y1 > r.y0).then_some(r)
    }

    /// The four quadrants of the unit square in the order NW, NE, SW, SE.
    pub fn unit_quadrants() -> [Rect; 4] {
        [
            Rect::new(0.0, 0.5, 0.5, 1.0),
            Rect::new(0.5, 1.0, 0.5, 1.0),
            Rect::new(0.0, 0.5, 0.0, 0.5),
            Rect::new(0.5, 1.0, 0.0, 0.5),
        ]
    }
}

/// Closed interval used for 1-D regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::new(1.0, 0.0, 10).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(0.0, f64::NAN, 4).is_err());
    }

    #[test]
    fn nodes_are_cell_centres() {
        let g = Grid1D::new(0.0, 1.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.cell_of(1.0), Some(3));
        assert_eq!(g.cell_of(0.0), Some(0));
        assert_eq!(g.cell_of(1.5), None);
    }

    #[test]
    fn interpolation_is_exact_for_linear_data() {
        let g = Grid1D::new(0.0, 2.0, 8).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((g.interpolate(&v, 0.77) - (3.0 * 0.77 + 1.0)).abs() < 1e-12);
        let g2 = Grid2D::new(g, g);
        let vals: Vec<f64> = (0..8)
            .flat_map(|i| (0..8).map(move |j| (i, j)))
            .map(|(i, j)| g.node(i) + 2.0 * g.node(j))
            .collect();
        assert!((g2.interpolate(&vals, 0.6, 1.1) - (0.6 + 2.2)).abs() < 1e-12);
    }

    #[test]
    fn rect_intersection() {
        let a = Rect::new(0.0, 0.5, 0.0, 0.5);
        assert!(a.intersect(&Rect::new(0.5, 1.0, 0.0, 1.0)).is_none());
        let r = a.intersect(&Rect::new(0.25, 1.0, 0.1, 1.0)).unwrap();
        assert_eq!(r, Rect::new(0.25, 0.5, 0.1, 0.5));
    }
}
