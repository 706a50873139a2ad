//! Sample sets and seeded samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::GriddedPdf2D;
use crate::error::{Error, Result};

/// The generator used everywhere a seed appears.
pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Points of a fixed dimension, stored contiguously, with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
    seed: u64,
}

impl SampleSet {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(dim, data, seed)
    }

    /// Build from row-major coordinates (`dim` values per point).
    pub fn from_flat(dim: usize, data: Vec<f64>, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: data.len() % dim });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { dim, data, seed })
    }

    pub fn from_scalars(values: Vec<f64>, seed: u64) -> Result<Self> {
        Self::from_flat(1, values, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Flat row-major coordinates; for `dim == 1` these are the samples themselves.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// First `n` points, keeping the seed.
    pub fn head(&self, n: usize) -> SampleSet {
        let n = n.min(self.len());
        SampleSet { dim: self.dim, data: self.data[..n * self.dim].to_vec(), seed: self.seed }
    }

    /// Fraction of points falling in `[x0, x1] x [y0, y1]` (2-D only).
    pub fn frequency_in(&self, r: &crate::grid::Rect) -> f64 {
        if self.dim != 2 || self.is_empty() {
            return 0.0;
        }
        let hits = self.points().filter(|p| r.contains(p[0], p[1])).count();
        hits as f64 / self.len() as f64
    }
}

/// Draw `n` points from the bilinear interpolant of `p` by rejection from a
/// uniform envelope over the grid support scaled by the largest node value.
pub fn rejection_sample_2d(p: &GriddedPdf2D, n: usize, seed: u64) -> Result<SampleSet> {
    let max = p.max_value();
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::DegenerateEnvelope { max });
    }
    let s = p.grid().support();
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(2 * n);
    while data.len() < 2 * n {
        let x = s.x0 + (s.x1 - s.x0) * r.random::<f64>();
        let y = s.y0 + (s.y1 - s.y0) * r.random::<f64>();
        let u: f64 = r.random();
        if u * max < p.eval(x, y) {
            data.push(x);
            data.push(y);
        }
    }
    SampleSet::from_flat(2, data, seed)
}

/// Independent uniform points on the unit square.
pub fn uniform_unit_square(n: usize, seed: u64) -> SampleSet {
    let mut r = rng(seed);
    let data = (0..2 * n).map(|_| r.random::<f64>()).collect();
    SampleSet { dim: 2, data, seed }
}
