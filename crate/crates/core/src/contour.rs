//! Disintegration of laws on the unit square along the contours of `Q = z1 z2`.
//!
//! Contours are indexed by the arc length `x_L` along the diagonal `z2 = z1`,
//! so the contour through `(x_L/sqrt2, x_L/sqrt2)` is the hyperbola
//! `z2 = q / z1` with `q = x_L^2 / 2`, `z1 in [q, 1]`. Positions along a
//! contour are measured by arc length `x_C` from its upper end `(q, 1)`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::density::GriddedPdf2D;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Rect};
use crate::par;
use crate::quad::{quad_1d, quad_1d_breaks};

/// Contours closer than this to either end of the transverse range are ignored.
pub const X_L_GUARD: f64 = 1e-6;

const ARC_TOL: f64 = 1e-11;
const OUTER_TOL: f64 = 1e-6;

/// Transverse density `-x_L log(x_L^2 / 2)` induced by `f_Q(q) = -log q`.
pub fn transverse_pdf(x_l: f64) -> Result<f64> {
    if !(x_l > 0.0 && x_l <= SQRT_2) {
        return Err(Error::Domain(format!("x_L = {x_l} outside (0, sqrt 2]")));
    }
    Ok((-x_l * (0.5 * x_l * x_l).ln()).max(0.0))
}

/// Contour level of a transverse coordinate.
pub fn level(x_l: f64) -> f64 {
    0.5 * x_l * x_l
}

/// Transverse coordinate of a point.
pub fn transverse_coordinate(z1: f64, z2: f64) -> f64 {
    (2.0 * z1 * z2).sqrt()
}

/// The contour `z1 z2 = x_L^2 / 2` inside the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourCurve {
    x_l: f64,
    q: f64,
}

impl ContourCurve {
    pub fn new(x_l: f64) -> Result<Self> {
        if !(x_l > 0.0 && x_l <= SQRT_2) {
            return Err(Error::Domain(format!("x_L = {x_l} outside (0, sqrt 2]")));
        }
        Ok(Self { x_l, q: level(x_l).min(1.0) })
    }

    pub fn x_l(&self) -> f64 {
        self.x_l
    }

    pub fn level(&self) -> f64 {
        self.q
    }

    /// `[x_L^2 / 2, 1]`.
    pub fn z1_range(&self) -> (f64, f64) {
        (self.q, 1.0)
    }

    pub fn z2(&self, z1: f64) -> f64 {
        self.q / z1
    }

    /// Arc length between two abscissae. Integrated in `t = ln z1`, where
    /// `ds = sqrt(z1^2 + q^2 / z1^2) dt` is smooth for every contour.
    pub fn arc_length(&self, z1_a: f64, z1_b: f64) -> Result<f64> {
        let (lo, hi) = self.z1_range();
        let slack = 1e-12;
        if !(z1_a >= lo * (1.0 - slack) && z1_a <= z1_b && z1_b <= hi * (1.0 + slack)) {
            return Err(Error::Domain(format!("abscissae [{z1_a}, {z1_b}] outside [{lo}, {hi}]")));
        }
        if z1_a >= z1_b {
            return Ok(0.0);
        }
        let q = self.q;
        let g = |t: f64| {
            let z = t.exp();
            (z * z + q * q / (z * z)).sqrt()
        };
        let (ta, tb) = (z1_a.ln(), z1_b.ln());
        let mid = 0.5 * q.ln();
        if ta < mid && mid < tb {
            quad_1d_breaks(g, ta, tb, &[mid], ARC_TOL)
        } else {
            quad_1d(g, ta, tb, ARC_TOL)
        }
    }

    pub fn full_length(&self) -> Result<f64> {
        self.arc_length(self.q, 1.0)
    }

    /// Arc coordinate `x_C` of the contour point with abscissa `z1`.
    pub fn arc_coordinate(&self, z1: f64) -> Result<f64> {
        self.arc_length(self.q, z1)
    }

    /// Abscissae splitting the contour into `n` pieces of equal arc length.
    pub fn equal_arc_nodes(&self, n: usize) -> Result<Vec<f64>> {
        let total = self.full_length()?;
        let step = total / n as f64;
        let q = self.q;
        let speed = |z: f64| (1.0 + q * q / (z * z * z * z)).sqrt();
        let mut nodes = vec![q];
        let mut z = q;
        for k in 1..n {
            // Newton on arc_length(prev, z) = step, bracketed in (prev, 1)
            let prev = z;
            let (mut lo, mut hi) = (prev, 1.0);
            let mut x = (prev + step / speed(prev).max(1.0)).min(0.5 * (prev + 1.0));
            for _ in 0..100 {
                let r = self.arc_length(prev, x)? - step;
                if r.abs() <= 1e-13 * total {
                    break;
                }
                if r > 0.0 {
                    hi = x;
                } else {
                    lo = x;
                }
                let nx = x - r / speed(x);
                x = if nx > lo && nx < hi { nx } else { 0.5 * (lo + hi) };
                if hi - lo < 1e-15 {
                    break;
                }
            }
            z = x;
            nodes.push(z);
            debug_assert!(k < n);
        }
        nodes.push(1.0);
        Ok(nodes)
    }
}

/// Uniform ansatz density along a contour: one over its length.
pub fn ansatz_conditional(c: &ContourCurve) -> Result<f64> {
    let len = c.full_length()?;
    if len <= 0.0 {
        return Err(Error::DegenerateContour);
    }
    Ok(1.0 / len)
}

/// Ansatz density on the unit square: `f_XL(x_L) |grad x_L| / length(x_L)`.
pub fn ansatz_density(z1: f64, z2: f64) -> Result<f64> {
    let x_l = transverse_coordinate(z1, z2);
    if !(X_L_GUARD..SQRT_2 - X_L_GUARD).contains(&x_l) {
        return Ok(0.0);
    }
    let c = ContourCurve::new(x_l)?;
    let grad = (z1 * z1 + z2 * z2).sqrt() / x_l;
    Ok(transverse_pdf(x_l)? * grad * ansatz_conditional(&c)?)
}

/// How the conditional law along each contour is chosen.
pub enum ConditionalRule<'a> {
    /// Uniform in arc length.
    Ansatz,
    /// Exact conditional of a density on the square, proportional to
    /// `f_Z / |grad x_L|` along the contour.
    Disintegrated(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
    /// Band estimate of the conditional of a density (see [`empirical_contour_pdf`]).
    Empirical { f_z: &'a (dyn Fn(f64, f64) -> f64 + Sync), eps: f64, n_segments: usize },
}

/// Abscissa interval of the contour lying in `a`, if any.
fn clip(c: &ContourCurve, a: &Rect) -> Option<(f64, f64)> {
    let q = c.level();
    let lo = q.max(a.x0).max(q / a.y1);
    let hi = if a.y0 > 0.0 { 1.0f64.min(a.x1).min(q / a.y0) } else { 1.0f64.min(a.x1) };
    (hi > lo).then_some((lo, hi))
}

/// Conditional probability that the contour point lies in `a`.
fn fraction_in(c: &ContourCurve, a: &Rect, rule: &ConditionalRule) -> Result<f64> {
    let Some((lo, hi)) = clip(c, a) else {
        return Ok(0.0);
    };
    match rule {
        ConditionalRule::Ansatz => Ok(c.arc_length(lo, hi)? / c.full_length()?),
        ConditionalRule::Disintegrated(f) => {
            // ds / |grad x_L| = x_L dz1 / z1 = x_L d(ln z1); the constant cancels
            let q = c.level();
            let w = |t: f64| {
                let z = t.exp();
                f(z, q / z)
            };
            let num = quad_1d(w, lo.ln(), hi.ln(), 1e-11)?;
            let den = quad_1d(w, q.ln(), 0.0, 1e-11)?;
            if den <= 0.0 {
                return Ok(0.0);
            }
            Ok(num / den)
        }
        ConditionalRule::Empirical { f_z, eps, n_segments } => {
            let eps = eps.min(0.5 * (SQRT_2 - c.x_l()));
            let pdf = empirical_contour_pdf(c.x_l(), eps, *n_segments, f_z)?;
            Ok(pdf.mass_between(c.arc_coordinate(lo)?, c.arc_coordinate(hi)?))
        }
    }
}

/// Probability of the box `a` under the law with transverse density `f_xl`
/// and the given conditional rule.
///
/// The outer integral runs over the `x_L` range spanned by the box corners,
/// split where contours pass through the remaining corners. Its tolerance is
/// `1e-6` relative to the box area.
pub fn cell_probability<F>(a: &Rect, f_xl: F, rule: &ConditionalRule) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let a = a.intersect(&Rect::unit()).ok_or(Error::EmptyRegion)?;
    if a.area() <= 0.0 {
        return Err(Error::EmptyRegion);
    }
    let lo = transverse_coordinate(a.x0, a.y0).max(X_L_GUARD);
    let hi = transverse_coordinate(a.x1, a.y1).min(SQRT_2 - X_L_GUARD);
    if hi <= lo {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = [
        transverse_coordinate(a.x0, a.y1),
        transverse_coordinate(a.x1, a.y0),
        transverse_coordinate(a.x0, 1.0),
        transverse_coordinate(1.0, a.y0),
    ]
    .into_iter()
    .filter(|b| *b > lo && *b < hi)
    .collect();
    let failure = std::cell::Cell::new(None);
    let integrand = |x_l: f64| -> f64 {
        let r = ContourCurve::new(x_l).and_then(|c| Ok(fraction_in(&c, &a, rule)? * f_xl(x_l)?));
        r.unwrap_or_else(|e| {
            failure.set(Some(e));
            0.0
        })
    };
    let tol = OUTER_TOL * a.area();
    let v = match rule {
        ConditionalRule::Empirical { .. } => gauss_panels(&integrand, lo, hi, &breaks, 8),
        _ => quad_1d_breaks(&integrand, lo, hi, &breaks, tol)?,
    };
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(v)
}

/// Ansatz probability of a box for the benchmark `f_Q = -log q`.
pub fn ansatz_cell_probability(a: &Rect) -> Result<f64> {
    cell_probability(a, transverse_pdf, &ConditionalRule::Ansatz)
}

/// Fixed composite 4-point Gauss-Legendre rule, `panels` per piece between breaks.
fn gauss_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], panels: usize) -> f64 {
    const X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.to_vec();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(b);
    let mut s = 0.0;
    for w in cuts.windows(2) {
        let h = (w[1] - w[0]) / panels as f64;
        for p in 0..panels {
            let c = w[0] + (p as f64 + 0.5) * h;
            for k in 0..4 {
                s += 0.5 * h * W[k] * f(c + 0.5 * h * X[k]);
            }
        }
    }
    s
}

/// Ansatz cell probabilities on an `n x n` partition of the unit square, row-major in `z1`.
pub fn ansatz_cell_probabilities(n: usize) -> Result<Vec<f64>> {
    let grid = Grid2D::unit_square(n)?;
    let probs = par::map_range(n * n, |k| ansatz_cell_probability(&grid.cell(k / n, k % n)));
    probs.into_iter().collect()
}

/// The gridded ansatz density on `n_sq` equal squares (cell probability over cell area), normalised.
pub fn build_ansatz_pdf_grid(n_sq: usize) -> Result<GriddedPdf2D> {
    let n = (n_sq as f64).sqrt().round() as usize;
    if n * n != n_sq || n < 2 {
        return Err(Error::InvalidGrid(format!("{n_sq} is not a square of an integer >= 2")));
    }
    let grid = Grid2D::unit_square(n)?;
    let area = grid.cell_area();
    let probs = ansatz_cell_probabilities(n)?;
    GriddedPdf2D::new(grid, probs.into_iter().map(|p| p / area).collect())?.normalize()
}

/// Conditional density along one contour, piecewise constant on equal-arc segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourPdf {
    pub x_l: f64,
    pub eps: f64,
    pub arc_length: f64,
    /// Segment boundaries in arc length, `n_segments + 1` values from 0 to `arc_length`.
    pub edges: Vec<f64>,
    /// Matching abscissae `z1` of the segment boundaries.
    pub z1_edges: Vec<f64>,
    /// Conditional probability of each segment.
    pub masses: Vec<f64>,
}

impl ContourPdf {
    pub fn n_segments(&self) -> usize {
        self.masses.len()
    }

    fn step(&self) -> f64 {
        self.arc_length / self.n_segments() as f64
    }

    /// Density per unit arc length on each segment.
    pub fn segment_values(&self) -> Vec<f64> {
        let d = self.step();
        self.masses.iter().map(|m| m / d).collect()
    }

    /// Arc nodes: both contour ends plus the segment midpoints.
    pub fn arc_nodes(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend(self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        out.push(self.arc_length);
        out
    }

    /// Values at [`arc_nodes`](Self::arc_nodes): segment values, held flat to the ends.
    /// Their trapezoid integral equals the total segment mass.
    pub fn values(&self) -> Vec<f64> {
        let v = self.segment_values();
        let mut out = vec![v[0]];
        out.extend_from_slice(&v);
        out.push(v[v.len() - 1]);
        out
    }

    pub fn density_at(&self, s: f64) -> f64 {
        if !(0.0..=self.arc_length).contains(&s) {
            return 0.0;
        }
        let i = ((s / self.step()) as usize).min(self.n_segments() - 1);
        self.masses[i] / self.step()
    }

    /// Probability of the arc interval `[sa, sb]`.
    pub fn mass_between(&self, sa: f64, sb: f64) -> f64 {
        let d = self.step();
        let (sa, sb) = (sa.max(0.0), sb.min(self.arc_length));
        if sb <= sa {
            return 0.0;
        }
        let mut s = 0.0;
        for (i, m) in self.masses.iter().enumerate() {
            let (a, b) = (self.edges[i], self.edges[i + 1]);
            let overlap = (sb.min(b) - sa.max(a)).max(0.0);
            s += m * overlap / d;
        }
        s
    }
}

/// Mass of `f_z` between the contours `q` and `q_up` over `z1 in [za, zb]`.
fn band_mass(f_z: &(dyn Fn(f64, f64) -> f64 + Sync), q: f64, q_up: f64, za: f64, zb: f64, tol: f64) -> Result<f64> {
    const X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let slice = |z1: f64| {
        let lo = q / z1;
        let hi = (q_up / z1).min(1.0);
        if hi <= lo {
            return 0.0;
        }
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        r * X.iter().zip(W).map(|(x, w)| w * f_z(z1, c + r * x)).sum::<f64>()
    };
    if za < q_up && q_up < zb {
        quad_1d_breaks(slice, za, zb, &[q_up], tol)
    } else {
        quad_1d(slice, za, zb, tol)
    }
}

fn band_masses(f_z: &(dyn Fn(f64, f64) -> f64 + Sync), x_l: f64, eps: f64, nodes: &[f64]) -> Result<Vec<f64>> {
    let q = level(x_l);
    let q_up = level(x_l + eps);
    let tol = 1e-9 * (q_up - q) / nodes.len() as f64;
    let raw = par::map_range(nodes.len() - 1, |i| band_mass(f_z, q, q_up, nodes[i], nodes[i + 1], tol));
    raw.into_iter().collect()
}

/// Band estimate of the conditional density along the contour `x_L`.
///
/// The contour is split into `n_segments` pieces of equal arc length; each
/// piece receives the mass of `f_z` in the band between the contours `x_L`
/// and `x_L + eps` above its `z1`-span. `eps` is halved until no normalised
/// segment mass moves by more than 1 % of the larger of its value and the
/// mean segment mass.
pub fn empirical_contour_pdf(x_l: f64, eps: f64, n_segments: usize, f_z: &(dyn Fn(f64, f64) -> f64 + Sync)) -> Result<ContourPdf> {
    if n_segments < 10 {
        return Err(Error::Domain(format!("need at least 10 segments, got {n_segments}")));
    }
    if !(x_l > 0.0 && eps > 0.0 && x_l + eps <= SQRT_2) {
        return Err(Error::Domain(format!("band [{x_l}, {}] outside (0, sqrt 2]", x_l + eps)));
    }
    let c = ContourCurve::new(x_l)?;
    let length = c.full_length()?;
    let nodes = c.equal_arc_nodes(n_segments)?;
    let normalised = |eps: f64| -> Result<Vec<f64>> {
        let m = band_masses(f_z, x_l, eps, &nodes)?;
        let total: f64 = m.iter().sum();
        let band_area = level(x_l + eps) - level(x_l);
        if !(total > 1e-12 * band_area) {
            return Err(Error::BandTooThin { mass: total });
        }
        Ok(m.into_iter().map(|v| v / total).collect())
    };
    let mut eps = eps;
    let mut masses = normalised(eps)?;
    let mean = 1.0 / n_segments as f64;
    for _ in 0..20 {
        let next = normalised(0.5 * eps)?;
        let moved = masses.iter().zip(&next).all(|(a, b)| (a - b).abs() <= 0.01 * a.max(mean));
        eps *= 0.5;
        masses = next;
        if moved {
            break;
        }
    }
    let step = length / n_segments as f64;
    Ok(ContourPdf {
        x_l,
        eps,
        arc_length: length,
        edges: (0..=n_segments).map(|i| i as f64 * step).collect(),
        z1_edges: nodes,
        masses,
    })
}

/// Monte Carlo counterpart of a band estimate: `n` points with `z1` uniform
/// over the band's `z1`-span and `z2` uniform across the band above it, each
/// weighted by `f_z` times the band's vertical extent, binned on the
/// segments of `pdf` with the same band width.
pub fn band_monte_carlo(pdf: &ContourPdf, f_z: &(dyn Fn(f64, f64) -> f64 + Sync), n: usize, seed: u64) -> Result<ContourPdf> {
    use rand::Rng;
    let q = level(pdf.x_l);
    let q_up = level(pdf.x_l + pdf.eps);
    let mut r = crate::sampling::rng(seed);
    let mut masses = vec![0.0; pdf.n_segments()];
    for _ in 0..n {
        let z1 = q + (1.0 - q) * r.random::<f64>();
        let lo = q / z1;
        let hi = (q_up / z1).min(1.0);
        let z2 = lo + (hi - lo) * r.random::<f64>();
        let k = pdf.z1_edges.partition_point(|&e| e <= z1).clamp(1, masses.len()) - 1;
        masses[k] += f_z(z1, z2) * (hi - lo);
    }
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Err(Error::BandTooThin { mass: total });
    }
    Ok(ContourPdf { masses: masses.into_iter().map(|m| m / total).collect(), ..pdf.clone() })
}

/// `int |f - g| ds` between two conditionals on the same segments.
pub fn contour_l1(a: &ContourPdf, b: &ContourPdf) -> Result<f64> {
    if a.masses.len() != b.masses.len() {
        return Err(Error::GridMismatch);
    }
    Ok(a.masses.iter().zip(&b.masses).map(|(x, y)| (x - y).abs()).sum())
}

/// Coefficient of variation over segments of the ratio between the band
/// conditionals of two densities on a shared arc partition.
pub fn conditional_ratio_cv(
    x_l: f64,
    eps: f64,
    n_segments: usize,
    f_num: &(dyn Fn(f64, f64) -> f64 + Sync),
    f_den: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<f64> {
    let num = empirical_contour_pdf(x_l, eps, n_segments, f_num)?;
    let den = empirical_contour_pdf(x_l, eps, n_segments, f_den)?;
    let ratio: Vec<f64> = num.masses.iter().zip(&den.masses).filter(|(_, d)| **d > 0.0).map(|(n, d)| n / d).collect();
    let k = ratio.len() as f64;
    let mean = ratio.iter().sum::<f64>() / k;
    let var = ratio.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / k;
    Ok(var.sqrt() / mean)
}

/// Recovery test for independent Beta laws `Z1 ~ Beta(nu1, nu2)`, `Z2 ~ Beta(tau1, tau2)`:
/// the coefficient of variation of `f^Beta_{X_C|X_L} / f^Unif_{X_C|X_L}` along
/// the contour `x_L`. Zero means the uniform ansatz could reproduce the law.
pub fn nonlebesgue_recovery_test(beta_params: (f64, f64, f64, f64), x_l: f64) -> Result<f64> {
    use crate::product::{Law, Marginal};
    let (n1, n2, t1, t2) = beta_params;
    if [n1, n2, t1, t2].iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::Domain(format!("beta parameters {beta_params:?} must be positive")));
    }
    let (m1, m2) = (Law::Beta { a: n1, b: n2 }, Law::Beta { a: t1, b: t2 });
    let f_beta = move |z1: f64, z2: f64| m1.pdf(z1) * m2.pdf(z2);
    let uniform = |_: f64, _: f64| 1.0;
    let eps = DEFAULT_EPS.min(0.5 * (SQRT_2 - x_l));
    conditional_ratio_cv(x_l, eps, DEFAULT_SEGMENTS, &f_beta, &uniform)
}

pub const DEFAULT_EPS: f64 = 1e-3;
pub const DEFAULT_SEGMENTS: usize = 100;

/// Transverse coordinates of the three contours shown for the benchmark,
/// from most to least concave. The second is the reference contour of the
/// Beta recovery test.
pub const REFERENCE_CONTOURS: [f64; 3] = [0.4, 0.8, 1.35];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_monte_carlo_agrees_with_quadrature() {
        let f = |_: f64, _: f64| 1.0;
        let p = empirical_contour_pdf(0.4, DEFAULT_EPS, 20, &f).unwrap();
        let mc = band_monte_carlo(&p, &f, 400_000, 3).unwrap();
        assert!(contour_l1(&p, &mc).unwrap() < 0.02);
    }
    use crate::quad::midpoint;

    #[test]
    fn transverse_pdf_values() {
        assert_eq!(transverse_pdf(SQRT_2).unwrap(), 0.0);
        let x = (2.0 / std::f64::consts::E).sqrt();
        assert!((transverse_pdf(x).unwrap() - x).abs() < 1e-15);
        assert!(transverse_pdf(0.0).is_err());
        assert!(transverse_pdf(1.5).is_err());
        let m = quad_1d(|x| transverse_pdf(x).unwrap_or(0.0), 1e-12, SQRT_2, 1e-10).unwrap();
        assert!((m - 1.0).abs() < 1e-6);
    }

    #[test]
    fn contour_points_are_exact() {
        for x_l in [0.05, 0.4, 1.0, 1.4] {
            let c = ContourCurve::new(x_l).unwrap();
            for k in 0..=50 {
                let z1 = c.level() + (1.0 - c.level()) * k as f64 / 50.0;
                let z2 = c.z2(z1);
                assert!((z1 * z2 - x_l * x_l / 2.0).abs() <= 1e-14);
                assert!(z2 <= 1.0 + 1e-15 && z2 >= c.level() - 1e-15);
            }
        }
    }

    #[test]
    fn arc_lengths_match_midpoint_oracle() {
        let c = ContourCurve::new(0.4).unwrap();
        let q: f64 = 0.08;
        let oracle = midpoint(|z| (1.0 + q * q / z.powi(4)).sqrt(), q, 1.0, 1_000_000);
        assert!((c.full_length().unwrap() - oracle).abs() < 1e-6);
        assert_eq!(c.arc_length(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(ContourCurve::new(SQRT_2).unwrap().full_length().unwrap(), 0.0);
        assert!(c.arc_length(0.01, 0.5).is_err());
    }

    #[test]
    fn ansatz_conditional_inverts_length() {
        for x_l in [0.2, 0.6, 1.0, 1.2] {
            let c = ContourCurve::new(x_l).unwrap();
            let q = level(x_l);
            let oracle = midpoint(|z| (1.0 + q * q / z.powi(4)).sqrt(), q, 1.0, 1_000_000);
            let v = ansatz_conditional(&c).unwrap();
            assert!((v * c.full_length().unwrap() - 1.0).abs() < 1e-14);
            assert!((v - 1.0 / oracle).abs() < 1e-6);
        }
        // lengths shrink as contours straighten towards the corner
        let lens: Vec<f64> = [0.2, 0.6, 1.2].iter().map(|&x| ContourCurve::new(x).unwrap().full_length().unwrap()).collect();
        assert!(lens[0] > lens[1] && lens[1] > lens[2]);
        assert!(matches!(ansatz_conditional(&ContourCurve::new(SQRT_2).unwrap()), Err(Error::DegenerateContour)));
    }

    #[test]
    fn equal_arc_nodes_split_evenly() {
        let c = ContourCurve::new(0.4).unwrap();
        let nodes = c.equal_arc_nodes(20).unwrap();
        let total = c.full_length().unwrap();
        for w in nodes.windows(2) {
            assert!((c.arc_length(w[0], w[1]).unwrap() - total / 20.0).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrant_probabilities() {
        let p: Vec<f64> = Rect::unit_quadrants().iter().map(|a| ansatz_cell_probability(a).unwrap()).collect();
        for (v, t) in p.iter().zip([0.2886, 0.2459, 0.1770, 0.2886]) {
            assert!((v - t).abs() < 2e-3, "{p:?}");
        }
        assert!((ansatz_cell_probability(&Rect::unit()).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn disintegrated_uniform_recovers_uniform() {
        let uniform = |_: f64, _: f64| 1.0;
        for a in Rect::unit_quadrants() {
            let p = cell_probability(&a, transverse_pdf, &ConditionalRule::Disintegrated(&uniform)).unwrap();
            assert!((p - 0.25).abs() < 1e-5, "{p}");
        }
    }

    #[test]
    fn ansatz_density_integrates_to_cell_probability() {
        let a = Rect::new(0.3, 0.5, 0.6, 0.7);
        let direct = ansatz_cell_probability(&a).unwrap();
        let n = 200;
        let (hx, hy) = (0.2 / n as f64, 0.1 / n as f64);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += ansatz_density(0.3 + (i as f64 + 0.5) * hx, 0.6 + (j as f64 + 0.5) * hy).unwrap() * hx * hy;
            }
        }
        assert!((s - direct).abs() < 1e-6, "{s} {direct}");
    }

    #[test]
    fn band_pdf_against_coarea_conditional() {
        // the exact conditional of the uniform law is proportional to 1 / |grad x_L|
        let uniform = |_: f64, _: f64| 1.0;
        for x_l in [0.4, 1.35] {
            let pdf = empirical_contour_pdf(x_l, DEFAULT_EPS, 50, &uniform).unwrap();
            let q = level(x_l);
            // segment mass is proportional to the log of its z1-span
            let total = -q.ln();
            let mut l1 = 0.0;
            for (i, m) in pdf.masses.iter().enumerate() {
                let exact = (pdf.z1_edges[i + 1] / pdf.z1_edges[i]).ln() / total;
                // vertical slicing of the steep contour ends costs about 1 % there
                assert!((m - exact).abs() < 0.02 * exact, "x_L {x_l} segment {i}: {m} vs {exact}");
                l1 += (m - exact).abs();
            }
            assert!(l1 < 0.005, "{l1}");
            let nodes = pdf.arc_nodes();
            let vals = pdf.values();
            let trap: f64 = nodes.windows(2).zip(vals.windows(2)).map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1])).sum();
            assert!((trap - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn band_pdf_shapes() {
        let uniform = |_: f64, _: f64| 1.0;
        let concave = empirical_contour_pdf(0.4, DEFAULT_EPS, 50, &uniform).unwrap().segment_values();
        let max = concave.iter().copied().fold(0.0, f64::max);
        let min = concave.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max / min > 1.5);
        let flat = empirical_contour_pdf(1.35, DEFAULT_EPS, 50, &uniform).unwrap();
        let ansatz = ansatz_conditional(&ContourCurve::new(1.35).unwrap()).unwrap();
        assert!(flat.segment_values().iter().all(|v| (v - ansatz).abs() < 0.05 * ansatz));
    }

    #[test]
    fn recovery_test_values() {
        assert!(nonlebesgue_recovery_test((1.0, 1.0, 1.0, 1.0), REFERENCE_CONTOURS[1]).unwrap() < 0.02);
        assert!(nonlebesgue_recovery_test((2.0, 2.0, 2.0, 2.0), REFERENCE_CONTOURS[1]).unwrap() > 0.1);
    }

    #[test]
    fn ratio_cv_is_scale_invariant() {
        let f = |z1: f64, z2: f64| z1 * (1.0 - z2) + 0.1;
        let g = |z1: f64, _: f64| 1.0 + z1;
        let f3 = |z1: f64, z2: f64| 3.0 * f(z1, z2);
        let g7 = |z1: f64, z2: f64| 0.7 * g(z1, z2);
        let a = conditional_ratio_cv(0.8, DEFAULT_EPS, 20, &f, &g).unwrap();
        let b = conditional_ratio_cv(0.8, DEFAULT_EPS, 20, &f3, &g7).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn build_grid_rejects_non_squares() {
        assert!(matches!(build_ansatz_pdf_grid(10), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn coarse_grid_reproduces_quadrants() {
        let p = build_ansatz_pdf_grid(4).unwrap();
        // row-major in z1: (SW, NW, SE, NE)
        let probs: Vec<f64> = p.values().iter().map(|v| v * 0.25).collect();
        for (v, t) in probs.iter().zip([0.1770, 0.2886, 0.2886, 0.2459]) {
            assert!((v - t).abs() < 2e-3);
        }
    }
}
