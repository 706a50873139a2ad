//! Gridded probability densities.
//!
//! Values are cell-average densities at cell centres; every integral is the
//! midpoint rule. A density may carry per-node measure weights so that
//! densities with respect to non-Lebesgue reference measures share the same
//! container; Lebesgue is the implicit weight of one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D, Interval, Rect};
use crate::sampling::SampleSet;

/// Reference measure a density is taken with respect to.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum MeasureTag {
    #[default]
    Lebesgue,
    /// Per-node weights of the reference measure relative to Lebesgue.
    Weighted(Vec<f64>),
}

impl MeasureTag {
    fn weight(&self, i: usize) -> f64 {
        match self {
            MeasureTag::Lebesgue => 1.0,
            MeasureTag::Weighted(w) => w[i],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if let MeasureTag::Weighted(w) = self {
            if w.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: w.len() });
            }
            check_values(w)?;
        }
        Ok(())
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    for (index, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if v < 0.0 {
            return Err(Error::NegativeDensity { index, value: v });
        }
    }
    Ok(())
}

/// A density tabulated at the cell centres of a [`Grid1D`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedPdf1D {
    grid: Grid1D,
    values: Vec<f64>,
    measure: MeasureTag,
}

impl GriddedPdf1D {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        Self::with_measure(grid, values, MeasureTag::Lebesgue)
    }

    pub fn with_measure(grid: Grid1D, values: Vec<f64>, measure: MeasureTag) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        check_values(&values)?;
        measure.check(values.len())?;
        Ok(Self { grid, values, measure })
    }

    /// Tabulate `f` at the cell centres.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid1D, f: F) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    /// Exact cell averages `(F(b) - F(a)) / h` of a distribution with cdf `cdf`.
    pub fn from_cdf<F: Fn(f64) -> f64>(grid: Grid1D, cdf: F) -> Result<Self> {
        let edges: Vec<f64> = grid.edges().into_iter().map(cdf).collect();
        let h = grid.h();
        let values = edges.windows(2).map(|w| ((w[1] - w[0]) / h).max(0.0)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measure(&self) -> &MeasureTag {
        &self.measure
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Total midpoint-rule mass.
    pub fn mass(&self) -> f64 {
        let h = self.grid.h();
        self.values.iter().enumerate().map(|(i, v)| v * self.measure.weight(i)).sum::<f64>() * h
    }

    /// Rescale so the density integrates to one.
    pub fn normalize(&self) -> Result<Self> {
        let mass = self.mass();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::ZeroMass { mass });
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v / mass).collect(),
            measure: self.measure.clone(),
        })
    }

    /// Midpoint estimate of the integral over `region`, with fractional end cells.
    pub fn integrate(&self, region: Interval) -> Result<f64> {
        let a = region.a.max(self.grid.lo());
        let b = region.b.min(self.grid.hi());
        if !(b > a) {
            return Err(Error::EmptyRegion);
        }
        let h = self.grid.h();
        let mut s = 0.0;
        for i in 0..self.grid.len() {
            let overlap = (b.min(self.grid.edge(i + 1)) - a.max(self.grid.edge(i))).max(0.0);
            s += self.values[i] * self.measure.weight(i) * overlap;
        }
        debug_assert!(h > 0.0);
        Ok(s)
    }

    /// Linear interpolation between cell centres.
    pub fn eval(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, x)
    }

    /// Cumulative probability at the cell edges.
    pub fn cdf_at_edges(&self) -> Vec<f64> {
        let h = self.grid.h();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len() + 1);
        out.push(0.0);
        for (i, v) in self.values.iter().enumerate() {
            acc += v * self.measure.weight(i) * h;
            out.push(acc);
        }
        out
    }
}

/// A density tabulated at the cell centres of a [`Grid2D`], row-major with `x` as the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedPdf2D {
    grid: Grid2D,
    values: Vec<f64>,
    measure: MeasureTag,
}

impl GriddedPdf2D {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        Self::with_measure(grid, values, MeasureTag::Lebesgue)
    }

    pub fn with_measure(grid: Grid2D, values: Vec<f64>, measure: MeasureTag) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        check_values(&values)?;
        measure.check(values.len())?;
        Ok(Self { grid, values, measure })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: Grid2D, f: F) -> Result<Self> {
        let xs = grid.gx.nodes();
        let ys = grid.gy.nodes();
        let values = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(grid, values)
    }

    pub fn uniform_unit_square(n: usize) -> Result<Self> {
        Self::from_fn(Grid2D::unit_square(n)?, |_, _| 1.0)
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measure(&self) -> &MeasureTag {
        &self.measure
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn mass(&self) -> f64 {
        let a = self.grid.cell_area();
        self.values.iter().enumerate().map(|(i, v)| v * self.measure.weight(i)).sum::<f64>() * a
    }

    pub fn normalize(&self) -> Result<Self> {
        let mass = self.mass();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::ZeroMass { mass });
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v / mass).collect(),
            measure: self.measure.clone(),
        })
    }

    /// Midpoint estimate of the mass in `region`, weighting partially covered cells by overlap area.
    pub fn integrate(&self, region: Rect) -> Result<f64> {
        let r = region.intersect(&self.grid.support()).ok_or(Error::EmptyRegion)?;
        let (gx, gy) = (self.grid.gx, self.grid.gy);
        let mut s = 0.0;
        for i in 0..gx.len() {
            let ox = (r.x1.min(gx.edge(i + 1)) - r.x0.max(gx.edge(i))).max(0.0);
            if ox == 0.0 {
                continue;
            }
            for j in 0..gy.len() {
                let oy = (r.y1.min(gy.edge(j + 1)) - r.y0.max(gy.edge(j))).max(0.0);
                if oy > 0.0 {
                    let k = self.grid.index(i, j);
                    s += self.values[k] * self.measure.weight(k) * ox * oy;
                }
            }
        }
        Ok(s)
    }

    /// Bilinear interpolation between cell centres.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.grid.interpolate(&self.values, x, y)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Marginal density along `x`.
    pub fn marginal_x(&self) -> Result<GriddedPdf1D> {
        let ny = self.grid.gy.len();
        let hy = self.grid.gy.h();
        let v = self.values.chunks(ny).map(|row| row.iter().sum::<f64>() * hy).collect();
        GriddedPdf1D::new(self.grid.gx, v)
    }

    /// Mean of `g(x, y)` under the density (midpoint rule).
    pub fn expectation<F: Fn(f64, f64) -> f64>(&self, g: F) -> f64 {
        let xs = self.grid.gx.nodes();
        let ys = self.grid.gy.nodes();
        let mut s = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let k = self.grid.index(i, j);
                s += self.values[k] * self.measure.weight(k) * g(x, y);
            }
        }
        s * self.grid.cell_area()
    }
}

/// Cell values paired with the reference-measure volume of each cell.
pub trait Tabulated {
    fn cells(&self) -> Vec<(f64, f64)>;
}

impl Tabulated for GriddedPdf1D {
    fn cells(&self) -> Vec<(f64, f64)> {
        let h = self.grid.h();
        self.values.iter().enumerate().map(|(i, &v)| (v, h * self.measure.weight(i))).collect()
    }
}

impl Tabulated for GriddedPdf2D {
    fn cells(&self) -> Vec<(f64, f64)> {
        let a = self.grid.cell_area();
        self.values.iter().enumerate().map(|(i, &v)| (v, a * self.measure.weight(i))).collect()
    }
}

/// Midpoint-rule `L^1` distance between two densities on the same grid.
pub fn l1_distance(p: &GriddedPdf1D, q: &GriddedPdf1D) -> Result<f64> {
    same_grid(p, q)?;
    let h = p.grid.h();
    Ok(p.values.iter().zip(&q.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * h)
}

/// Maximum absolute difference over the grid nodes.
pub fn sup_distance(p: &GriddedPdf1D, q: &GriddedPdf1D) -> Result<f64> {
    same_grid(p, q)?;
    Ok(p.values.iter().zip(&q.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn same_grid(p: &GriddedPdf1D, q: &GriddedPdf1D) -> Result<()> {
    if p.grid != q.grid {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Normalised bin-count density of one-dimensional samples.
pub fn histogram_to_pdf(samples: &SampleSet, grid: Grid1D) -> Result<GriddedPdf1D> {
    if samples.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: samples.dim() });
    }
    let mut counts = vec![0usize; grid.len()];
    let mut outside = 0usize;
    for p in samples.points() {
        match grid.cell_of(p[0]) {
            Some(i) => counts[i] += 1,
            None => outside += 1,
        }
    }
    if outside > 0 {
        return Err(Error::OutOfSupport { count: outside });
    }
    let n = samples.len();
    if n == 0 {
        return Err(Error::ZeroMass { mass: 0.0 });
    }
    let scale = 1.0 / (n as f64 * grid.h());
    GriddedPdf1D::new(grid, counts.into_iter().map(|c| c as f64 * scale).collect())
}
