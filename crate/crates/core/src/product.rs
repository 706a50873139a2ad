//! Forward maps on the unit square and their pushforward densities.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::density::GriddedPdf1D;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::par;
use crate::quad::{quad_1d_endpoint_singular, quad_1d_endpoint_singular_c};
use crate::sampling::{self, SampleSet};

/// Lower truncation of the `-log q` singularity.
pub const Q_MIN: f64 = 1e-6;

/// Per-node tolerance of the pushforward quadratures.
pub const PUSHFORWARD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForwardMap {
    Product,
    Sum,
    SumOfSquares,
    ExpNegSumOfSquares,
}

impl ForwardMap {
    pub fn apply(self, z1: f64, z2: f64) -> f64 {
        match self {
            ForwardMap::Product => z1 * z2,
            ForwardMap::Sum => z1 + z2,
            ForwardMap::SumOfSquares => z1 * z1 + z2 * z2,
            ForwardMap::ExpNegSumOfSquares => (-(z1 * z1 + z2 * z2)).exp(),
        }
    }

    /// Image of the unit square.
    pub fn range(self) -> (f64, f64) {
        match self {
            ForwardMap::Product => (0.0, 1.0),
            ForwardMap::Sum | ForwardMap::SumOfSquares => (0.0, 2.0),
            ForwardMap::ExpNegSumOfSquares => ((-2.0f64).exp(), 1.0),
        }
    }
}

/// A law on `[0, b]` described by its density and distribution function.
pub trait Marginal: Sync {
    fn pdf(&self, z: f64) -> f64;
    fn cdf(&self, z: f64) -> f64;
    /// Upper end `b` of the support `[0, b]`.
    fn upper(&self) -> f64 {
        1.0
    }
    /// Density at `z` given `gap = b - z` exactly, for accuracy near `b`.
    fn pdf_c(&self, z: f64, _gap: f64) -> f64 {
        self.pdf(z)
    }
}

impl<M: Marginal + ?Sized> Marginal for &M {
    fn pdf(&self, z: f64) -> f64 {
        (**self).pdf(z)
    }
    fn cdf(&self, z: f64) -> f64 {
        (**self).cdf(z)
    }
    fn upper(&self) -> f64 {
        (**self).upper()
    }
    fn pdf_c(&self, z: f64, gap: f64) -> f64 {
        (**self).pdf_c(z, gap)
    }
}

/// `scale * X` for `X` distributed as `law`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledLaw {
    pub law: Law,
    pub scale: f64,
}

impl ScaledLaw {
    pub fn unit(law: Law) -> Self {
        Self { law, scale: 1.0 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * self.law.sample(rng)
    }
}

impl Marginal for ScaledLaw {
    fn pdf(&self, z: f64) -> f64 {
        self.law.pdf(z / self.scale) / self.scale
    }
    fn cdf(&self, z: f64) -> f64 {
        self.law.cdf(z / self.scale)
    }
    fn upper(&self) -> f64 {
        self.scale
    }
    fn pdf_c(&self, z: f64, gap: f64) -> f64 {
        self.law.pdf_c(z / self.scale, gap / self.scale) / self.scale
    }
}

/// The one-dimensional laws used by the parametric families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Law {
    Uniform,
    /// Density proportional to `exp(lambda z)` on `[0, 1]`.
    MaxEnt { lambda: f64 },
    Beta { a: f64, b: f64 },
}

impl Law {
    pub fn mean(&self) -> f64 {
        match *self {
            Law::Uniform => 0.5,
            Law::MaxEnt { lambda } => crate::maxent::mu_from_lambda(lambda),
            Law::Beta { a, b } => a / (a + b),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match *self {
            Law::Uniform => u,
            Law::MaxEnt { lambda } => {
                if lambda.abs() < 1e-12 {
                    u
                } else {
                    ((u * lambda.exp_m1()).ln_1p() / lambda).clamp(0.0, 1.0)
                }
            }
            Law::Beta { a, b } => BetaDist::new(a, b).expect("positive beta parameters").sample(rng),
        }
    }
}

impl Marginal for Law {
    fn pdf(&self, z: f64) -> f64 {
        if !(0.0..=1.0).contains(&z) {
            return 0.0;
        }
        match *self {
            Law::Uniform => 1.0,
            Law::MaxEnt { lambda } => maxent_marginal_pdf(lambda, z),
            Law::Beta { .. } => self.pdf_c(z, 1.0 - z),
        }
    }

    fn pdf_c(&self, z: f64, gap: f64) -> f64 {
        match *self {
            Law::Beta { a, b } => beta_pdf(a, b, ln_beta(a, b), z, gap),
            _ => self.pdf(z),
        }
    }

    fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        if z >= 1.0 {
            return 1.0;
        }
        match *self {
            Law::Uniform => z,
            Law::MaxEnt { lambda } => {
                if lambda.abs() < 1e-12 {
                    z
                } else if lambda > 0.0 {
                    // (e^{lz} - 1)/(e^l - 1), scaled to avoid overflow
                    ((lambda * (z - 1.0)).exp() - (-lambda).exp()) / -(-lambda).exp_m1()
                } else {
                    (lambda * z).exp_m1() / lambda.exp_m1()
                }
            }
            Law::Beta { a, b } => beta_reg(a, b, z),
        }
    }
}

/// `lambda e^{lambda z} / (e^lambda - 1)`, stable for large `|lambda|`.
/// `Beta(a, b)` density at `z` with `gap = 1 - z` supplied and `ln_norm = ln B(a, b)`.
pub fn beta_pdf(a: f64, b: f64, ln_norm: f64, z: f64, gap: f64) -> f64 {
    if !(0.0..=1.0).contains(&z) || gap < 0.0 {
        return 0.0;
    }
    // unit exponents contribute nothing, including at the endpoints
    let left = if a == 1.0 { 0.0 } else { (a - 1.0) * z.ln() };
    let right = if b == 1.0 { 0.0 } else { (b - 1.0) * gap.ln() };
    (left + right - ln_norm).exp()
}

pub fn maxent_marginal_pdf(lambda: f64, z: f64) -> f64 {
    if lambda.abs() < 1e-12 {
        1.0
    } else if lambda > 0.0 {
        lambda * (lambda * (z - 1.0)).exp() / -(-lambda).exp_m1()
    } else {
        lambda * (lambda * z).exp() / lambda.exp_m1()
    }
}

/// `-log q`, the density of the product of two independent uniforms.
pub fn product_uniform_density(q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Support(format!("q = {q} outside (0, 1]")));
    }
    Ok(-q.ln())
}

/// `q - q log q`, the matching distribution function.
pub fn product_uniform_cdf(q: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else if q >= 1.0 {
        1.0
    } else {
        q - q * q.ln()
    }
}

/// Tabulate `-log q` on a grid inside `[Q_MIN, 1]` as exact cell averages, renormalised.
pub fn pdf_product_uniform(grid: Grid1D) -> Result<GriddedPdf1D> {
    if grid.lo() < Q_MIN || grid.hi() > 1.0 {
        return Err(Error::Support(format!(
            "grid [{}, {}] must lie inside [{Q_MIN}, 1]",
            grid.lo(),
            grid.hi()
        )));
    }
    GriddedPdf1D::from_cdf(grid, product_uniform_cdf)?.normalize()
}

/// Grid of `n` cells spanning the truncated product support `[Q_MIN, 1]`.
pub fn product_grid(n: usize) -> Result<Grid1D> {
    Grid1D::new(Q_MIN, 1.0, n)
}

/// Density of `Z1 Z2` at `q` for independent nonnegative marginals:
/// `int f2(q / z1) f1(z1) / z1 dz1` over `z1 in [q / b2, b1]`.
///
/// The range is split where `z1 / b1 = z2 / b2`; the lower piece is
/// integrated in `z2 = q / z1`, so each piece only meets the singularity of
/// its own integration variable's density, at the upper limit, where the
/// quadrature supplies the gap to the limit exactly.
pub fn product_density<M1: Marginal, M2: Marginal>(m1: &M1, m2: &M2, q: f64) -> Result<f64> {
    let (b1, b2) = (m1.upper(), m2.upper());
    if !(q > 0.0 && q < b1 * b2) {
        return Ok(0.0);
    }
    let r = (q / (b1 * b2)).sqrt();
    let upper = quad_1d_endpoint_singular_c(|z1, gap| m2.pdf(q / z1) * m1.pdf_c(z1, gap) / z1, r * b1, b1, PUSHFORWARD_TOL)?;
    let lower = quad_1d_endpoint_singular_c(|z2, gap| m1.pdf(q / z2) * m2.pdf_c(z2, gap) / z2, r * b2, b2, PUSHFORWARD_TOL)?;
    Ok(upper + lower)
}

/// Distribution function of `Z1 Z2`: `F1(q / b2) + int_{q/b2}^{b1} F2(q / z1) f1(z1) dz1`.
pub fn product_cdf<M1: Marginal, M2: Marginal>(m1: &M1, m2: &M2, q: f64) -> Result<f64> {
    let (b1, b2) = (m1.upper(), m2.upper());
    if q <= 0.0 {
        return Ok(0.0);
    }
    if q >= b1 * b2 {
        return Ok(1.0);
    }
    let lo = q / b2;
    let tail = quad_1d_endpoint_singular_c(|z1, gap| m2.cdf(q / z1) * m1.pdf_c(z1, gap), lo, b1, PUSHFORWARD_TOL)?;
    Ok(m1.cdf(lo) + tail)
}

/// Pushforward density of `Z1 Z2` tabulated at the grid nodes, then normalised.
///
/// Nodes below `2 Q_MIN` are filled by linear extrapolation from the first two
/// nodes above it.
pub fn propagate_product_pdf<M1: Marginal, M2: Marginal>(m1: &M1, m2: &M2, grid: Grid1D) -> Result<GriddedPdf1D> {
    let nodes = grid.nodes();
    let raw = par::map_range(nodes.len(), |i| product_density(m1, m2, nodes[i]));
    let mut values = raw.into_iter().collect::<Result<Vec<f64>>>()?;
    let first = nodes.iter().position(|&q| q >= 2.0 * Q_MIN);
    if let Some(k) = first {
        if k > 0 && k + 1 < nodes.len() {
            let slope = (values[k + 1] - values[k]) / (nodes[k + 1] - nodes[k]);
            for i in 0..k {
                values[i] = (values[k] + slope * (nodes[i] - nodes[k])).max(0.0);
            }
        }
    }
    GriddedPdf1D::new(grid, values)?.normalize()
}

/// Density of `Z1 + Z2` at `s`: `int f2(s - z) f1(z) dz` over `[max(0, s-1), min(1, s)]`.
pub fn sum_density<M1: Marginal, M2: Marginal>(m1: &M1, m2: &M2, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 2.0) {
        return Ok(0.0);
    }
    let (lo, hi) = if s <= 1.0 { (0.0, s) } else { (s - 1.0, 1.0) };
    quad_1d_endpoint_singular(|z| m2.pdf(s - z) * m1.pdf(z), lo, hi, PUSHFORWARD_TOL)
}

/// Pushforward density of `Z1 + Z2` at the grid nodes, normalised.
pub fn propagate_sum_pdf<M1: Marginal, M2: Marginal>(m1: &M1, m2: &M2, grid: Grid1D) -> Result<GriddedPdf1D> {
    if grid.lo() < 0.0 || grid.hi() > 2.0 {
        return Err(Error::Support(format!("grid [{}, {}] must lie inside [0, 2]", grid.lo(), grid.hi())));
    }
    let nodes = grid.nodes();
    let raw = par::map_range(nodes.len(), |i| sum_density(m1, m2, nodes[i]));
    let values = raw.into_iter().collect::<Result<Vec<f64>>>()?;
    GriddedPdf1D::new(grid, values)?.normalize()
}

/// Triangular density of the sum of two independent uniforms.
pub fn triangular_density(s: f64) -> f64 {
    if (0.0..=1.0).contains(&s) {
        s
    } else if (1.0..=2.0).contains(&s) {
        2.0 - s
    } else {
        0.0
    }
}

/// Density of `Z1^2 + Z2^2` for independent uniforms.
pub fn sumsquares_uniform_density(q: f64) -> f64 {
    if (0.0..=1.0).contains(&q) {
        FRAC_PI_4
    } else if q > 1.0 && q <= 2.0 {
        (1.0 / q.sqrt()).asin() - FRAC_PI_4
    } else {
        0.0
    }
}

/// Distribution function of `Z1^2 + Z2^2` for independent uniforms.
pub fn sumsquares_uniform_cdf(q: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else if q <= 1.0 {
        FRAC_PI_4 * q
    } else if q < 2.0 {
        (q - 1.0).sqrt() + q * (1.0 / q.sqrt()).asin() - FRAC_PI_4 * q
    } else {
        1.0
    }
}

/// Exact cell averages of the square-sum density on a grid inside `[0, 2]`.
///
/// Cells inside `[0, 1]` carry exactly `pi/4`; the mass is `F(hi) - F(lo)`.
pub fn pdf_sumsquares_uniform(grid: Grid1D) -> Result<GriddedPdf1D> {
    if grid.lo() < 0.0 || grid.hi() > 2.0 {
        return Err(Error::Support(format!("grid [{}, {}] must lie inside [0, 2]", grid.lo(), grid.hi())));
    }
    GriddedPdf1D::from_cdf(grid, sumsquares_uniform_cdf)
}

/// Push two-dimensional samples through `map`, keeping order and seed.
pub fn forward_sample(map: ForwardMap, z: &SampleSet) -> Result<SampleSet> {
    if z.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: z.dim() });
    }
    let q = z.points().map(|p| map.apply(p[0], p[1])).collect();
    SampleSet::from_scalars(q, z.seed())
}

/// Independent draws of `(Z1, Z2)` with the given marginals.
pub fn sample_independent(m1: &Law, m2: &Law, n: usize, seed: u64) -> SampleSet {
    let mut r = sampling::rng(seed);
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        data.push(m1.sample(&mut r));
        data.push(m2.sample(&mut r));
    }
    SampleSet::from_flat(2, data, seed).expect("finite samples")
}

/// Samples of `Q = Z1 Z2` under independent uniforms, the benchmark truth.
pub fn true_product_samples(n: usize, seed: u64) -> SampleSet {
    let z = sampling::uniform_unit_square(n, seed);
    forward_sample(ForwardMap::Product, &z).expect("two-dimensional samples")
}

/// Monte Carlo reference density of `map` under independent uniforms.
pub fn monte_carlo_reference(map: ForwardMap, grid: Grid1D, n: usize, seed: u64) -> Result<GriddedPdf1D> {
    let z = sampling::uniform_unit_square(n, seed);
    let q = forward_sample(map, &z)?;
    crate::density::histogram_to_pdf(&q, grid)
}

/// `P(Z1^2 + Z2^2 <= 1/2)` under independent uniforms.
pub const SUMSQUARES_HALF_PROB: f64 = PI / 8.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{histogram_to_pdf, l1_distance, sup_distance};
    use std::f64::consts::E;

    fn unit(n: usize) -> Grid1D {
        Grid1D::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn maps_evaluate() {
        assert_eq!(ForwardMap::Product.apply(0.5, 0.5), 0.25);
        assert!((ForwardMap::Sum.apply(0.3, 0.4) - 0.7).abs() < 1e-15);
        assert_eq!(ForwardMap::ExpNegSumOfSquares.apply(0.0, 0.0), 1.0);
    }

    #[test]
    fn product_uniform_closed_form() {
        assert_eq!(product_uniform_density(1.0).unwrap(), 0.0);
        assert!((product_uniform_density(1.0 / E).unwrap() - 1.0).abs() < 1e-15);
        assert!(pdf_product_uniform(unit(10)).is_err());
        let p = pdf_product_uniform(product_grid(100).unwrap()).unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_uniform_matches_monte_carlo() {
        let g = unit(100);
        let mc = monte_carlo_reference(ForwardMap::Product, g, 1_000_000, 11).unwrap();
        let exact = GriddedPdf1D::from_cdf(g, product_uniform_cdf).unwrap();
        assert!(l1_distance(&mc, &exact).unwrap() < 0.02);
    }

    #[test]
    fn laws_are_normalised() {
        for law in [Law::Uniform, Law::MaxEnt { lambda: 3.0 }, Law::MaxEnt { lambda: -40.0 }, Law::Beta { a: 2.0, b: 5.0 }] {
            let m = crate::quad::quad_1d(|z| law.pdf(z), 0.0, 1.0, 1e-10).unwrap();
            assert!((m - 1.0).abs() < 1e-8, "{law:?} {m}");
            for z in [0.1, 0.4, 0.9] {
                let c = crate::quad::quad_1d(|t| law.pdf(t), 0.0, z, 1e-11).unwrap();
                assert!((c - law.cdf(z)).abs() < 1e-8, "{law:?}");
            }
        }
        assert!((Law::Beta { a: 1.0, b: 3.0 }.pdf(0.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn product_pushforward_of_uniforms() {
        let g = unit(500);
        let p = propagate_product_pdf(&Law::Uniform, &Law::Uniform, g).unwrap();
        let exact = GriddedPdf1D::from_fn(g, |q| -q.ln()).unwrap();
        assert!(l1_distance(&p, &exact).unwrap() < 1e-3);
        let z = propagate_product_pdf(&Law::MaxEnt { lambda: 0.0 }, &Law::MaxEnt { lambda: 0.0 }, g).unwrap();
        assert_eq!(p, z);
    }

    #[test]
    fn product_cdf_consistent_with_density() {
        let m1 = Law::Beta { a: 2.0, b: 3.0 };
        let m2 = Law::MaxEnt { lambda: 1.5 };
        for q in [0.05, 0.3, 0.7] {
            let c = crate::quad::quad_1d_endpoint_singular(|t| product_density(&m1, &m2, t).unwrap(), 0.0, q, 1e-8).unwrap();
            assert!((c - product_cdf(&m1, &m2, q).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn concentrated_first_factor_halves_second() {
        let g = unit(200);
        let p = propagate_product_pdf(&Law::Beta { a: 200.0, b: 200.0 }, &Law::Uniform, g).unwrap();
        let sup_tail = g.nodes().iter().zip(p.values()).filter(|(q, _)| **q > 0.55).map(|(_, v)| *v).fold(0.0, f64::max);
        assert!(sup_tail < 0.05, "{sup_tail}");
        let mc = histogram_to_pdf(
            &forward_sample(ForwardMap::Product, &sample_independent(&Law::Beta { a: 200.0, b: 200.0 }, &Law::Uniform, 1_000_000, 5)).unwrap(),
            g,
        )
        .unwrap();
        assert!(l1_distance(&p, &mc).unwrap() < 0.03);
    }

    #[test]
    fn sum_pushforward_is_triangular() {
        let g = Grid1D::new(0.0, 2.0, 400).unwrap();
        let p = propagate_sum_pdf(&Law::Uniform, &Law::Uniform, g).unwrap();
        let tri = GriddedPdf1D::from_fn(g, triangular_density).unwrap();
        assert!(sup_distance(&p, &tri).unwrap() < 1e-6);
        assert!((sum_density(&Law::Uniform, &Law::Uniform, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sum_pushforward_beta_matches_monte_carlo() {
        let g = Grid1D::new(0.0, 2.0, 100).unwrap();
        let law = Law::Beta { a: 1.0, b: 2.0 };
        let p = propagate_sum_pdf(&law, &law, g).unwrap();
        let mc = histogram_to_pdf(&forward_sample(ForwardMap::Sum, &sample_independent(&law, &law, 1_000_000, 3)).unwrap(), g).unwrap();
        assert!(l1_distance(&p, &mc).unwrap() < 0.02);
    }

    #[test]
    fn sumsquares_closed_form() {
        assert!((sumsquares_uniform_density(0.5) - FRAC_PI_4).abs() < 1e-15);
        assert!(sumsquares_uniform_density(2.0).abs() < 1e-15);
        let m = crate::quad::quad_1d(sumsquares_uniform_density, 0.0, 1.0, 1e-12).unwrap()
            + crate::quad::quad_1d_endpoint_singular(sumsquares_uniform_density, 1.0, 2.0, 1e-10).unwrap();
        assert!((m - 1.0).abs() < 1e-6);
        let p = pdf_sumsquares_uniform(Grid1D::new(0.0, 2.0, 200).unwrap()).unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-12);
        assert!(p.values()[..100].iter().all(|v| (v - FRAC_PI_4).abs() < 1e-12));
        assert!((sumsquares_uniform_cdf(0.5) - SUMSQUARES_HALF_PROB).abs() < 1e-15);
    }

    #[test]
    fn scaling_factors_leave_product_unchanged() {
        let (a, b) = (Law::Beta { a: 2.0, b: 2.0 }, Law::Beta { a: 0.7, b: 0.7 });
        for q in [0.05, 0.3, 0.8] {
            let base = product_density(&a, &b, q).unwrap();
            let scaled = product_density(&ScaledLaw { law: a, scale: 2.5 }, &ScaledLaw { law: b, scale: 0.4 }, q).unwrap();
            assert!((base - scaled).abs() < 1e-7 * base.max(1.0), "{q}: {base} {scaled}");
        }
    }

    #[test]
    fn forward_sample_checks_dimension() {
        let s = SampleSet::from_scalars(vec![0.1, 0.2], 0).unwrap();
        assert!(matches!(forward_sample(ForwardMap::Sum, &s), Err(Error::DimensionMismatch { .. })));
    }
}
