//! Parameter-layer inference: L1 pushforward matching, grid posteriors with
//! pushforward likelihoods, reparameterization, the data-consistent update
//! and posterior predictive densities.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::density::{histogram_to_pdf, l1_distance, GriddedPdf1D, GriddedPdf2D};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D, Interval, Rect};
use crate::maxent::lambda_from_mu;
use crate::par;
use crate::product::{
    beta_pdf, forward_sample, propagate_product_pdf, propagate_sum_pdf, product_density, ForwardMap, Law, Marginal, Q_MIN,
};
use crate::sampling::{self, rejection_sample_2d, SampleSet};

/// Nodes of the tabulated pushforward used for likelihood evaluation.
pub const LIKELIHOOD_NODES: usize = 500;
/// Densities below this are floored before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// Default cells per axis for posterior grids.
pub const DEFAULT_PARAM_CELLS: usize = 51;
/// Pushforward of the prior in the data-consistent update.
pub const DC_SAMPLES: usize = 1_000_000;
pub const DC_BINS: usize = 500;
pub const DC_SEED: u64 = 20_240_531;
/// Observed mass allowed where the prior pushforward is empty.
pub const DC_SUPPORT_TOL: f64 = 1e-3;
/// Monte Carlo size for predictives without a quadrature route.
pub const PREDICTIVE_MC_SAMPLES: usize = 200_000;
/// Posterior weights below this fraction of the total are dropped from
/// quadrature mixtures (the rest are renormalized).
const MIXTURE_CUTOFF: f64 = 1e-10;
const LAMBDA_TOL: f64 = 1e-12;

/// Two named parameter axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub names: [String; 2],
    pub grid: Grid2D,
}

impl ParamGrid {
    pub fn new(names: [&str; 2], a: Grid1D, b: Grid1D) -> Self {
        Self { names: names.map(String::from), grid: Grid2D::new(a, b) }
    }

    pub fn axes(&self) -> [Grid1D; 2] {
        [self.grid.gx, self.grid.gy]
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn cell_area(&self) -> f64 {
        self.grid.cell_area()
    }

    /// Node `(theta1, theta2)` at row-major index `k`.
    pub fn node(&self, k: usize) -> (f64, f64) {
        let ny = self.grid.gy.len();
        (self.grid.gx.node(k / ny), self.grid.gy.node(k % ny))
    }

    pub fn split(&self, k: usize) -> (usize, usize) {
        let ny = self.grid.gy.len();
        (k / ny, k % ny)
    }

    /// Row-major index of the cell containing `theta`.
    pub fn cell_of(&self, theta: (f64, f64)) -> Option<usize> {
        Some(self.grid.index(self.grid.gx.cell_of(theta.0)?, self.grid.gy.cell_of(theta.1)?))
    }
}

/// Parametric families of independent marginals for `(Z1, Z2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// Maximum-entropy marginals with means `(mu1, mu2)`.
    MaxEntMeans,
    /// `Beta(1, nu1) x Beta(1, nu2)`.
    BetaOneNu,
    /// `Beta(nu1, nu1) x Beta(nu2, nu2)`.
    SymmetricBeta,
    /// `Z1 = lambda Y1`, `Z2 = Y2 / lambda` with `Y1, Y2 ~ Beta(nu, nu)`;
    /// parameters `(nu, lambda)`. The product does not depend on `lambda`.
    ScaledSymmetricBeta,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::MaxEntMeans => "maxent_means",
            Family::BetaOneNu => "beta_one_nu",
            Family::SymmetricBeta => "symmetric_beta",
            Family::ScaledSymmetricBeta => "scaled_symmetric_beta",
        }
    }

    pub fn param_names(&self) -> [&'static str; 2] {
        match self {
            Family::MaxEntMeans => ["mu1", "mu2"],
            Family::BetaOneNu | Family::SymmetricBeta => ["nu1", "nu2"],
            Family::ScaledSymmetricBeta => ["nu", "lambda"],
        }
    }

    pub fn param_grid(&self, a: Grid1D, b: Grid1D) -> ParamGrid {
        ParamGrid::new(self.param_names(), a, b)
    }

    pub fn marginals(&self, theta: (f64, f64)) -> Result<[FamilyMarginal; 2]> {
        let (t1, t2) = theta;
        if !(t1.is_finite() && t2.is_finite()) {
            return Err(Error::Domain(format!("parameters ({t1}, {t2})")));
        }
        let beta = |a: f64, b: f64| -> Result<Law> {
            if a > 0.0 && b > 0.0 {
                Ok(Law::Beta { a, b })
            } else {
                Err(Error::Domain(format!("beta parameters ({a}, {b})")))
            }
        };
        Ok(match self {
            Family::MaxEntMeans => [
                FamilyMarginal::new(Law::MaxEnt { lambda: lambda_from_mu(t1, LAMBDA_TOL)? }, 1.0),
                FamilyMarginal::new(Law::MaxEnt { lambda: lambda_from_mu(t2, LAMBDA_TOL)? }, 1.0),
            ],
            Family::BetaOneNu => [FamilyMarginal::new(beta(1.0, t1)?, 1.0), FamilyMarginal::new(beta(1.0, t2)?, 1.0)],
            Family::SymmetricBeta => [FamilyMarginal::new(beta(t1, t1)?, 1.0), FamilyMarginal::new(beta(t2, t2)?, 1.0)],
            Family::ScaledSymmetricBeta => {
                if t2 <= 0.0 {
                    return Err(Error::Domain(format!("scale {t2}")));
                }
                [FamilyMarginal::new(beta(t1, t1)?, t2), FamilyMarginal::new(beta(t1, t1)?, 1.0 / t2)]
            }
        })
    }
}

/// A scaled law with its normalizing constant precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyMarginal {
    pub law: Law,
    pub scale: f64,
    ln_norm: f64,
}

impl FamilyMarginal {
    pub fn new(law: Law, scale: f64) -> Self {
        let ln_norm = match law {
            Law::Beta { a, b } => ln_beta(a, b),
            _ => 0.0,
        };
        Self { law, scale, ln_norm }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * self.law.sample(rng)
    }

    fn unit_pdf(&self, y: f64, gap: f64) -> f64 {
        match self.law {
            Law::Beta { a, b } => beta_pdf(a, b, self.ln_norm, y, gap),
            law => law.pdf(y),
        }
    }
}

impl Marginal for FamilyMarginal {
    fn pdf(&self, z: f64) -> f64 {
        let y = z / self.scale;
        self.unit_pdf(y, 1.0 - y) / self.scale
    }
    fn pdf_c(&self, z: f64, gap: f64) -> f64 {
        self.unit_pdf(z / self.scale, gap / self.scale) / self.scale
    }
    fn cdf(&self, z: f64) -> f64 {
        self.law.cdf(z / self.scale)
    }
    fn upper(&self) -> f64 {
        self.scale
    }
}

/// Pushforward density of `Z1 Z2` tabulated at nodes uniform in `ln q` over
/// `[ln Q_MIN, 0]` and interpolated linearly in `ln q`.
///
/// Interpolating in `ln q` reproduces the logarithmic singularity of product
/// densities at the origin exactly for `-log q`; below `Q_MIN` the last
/// segment is extrapolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pushforward {
    values: Vec<f64>,
}

impl Pushforward {
    pub fn new<M1: Marginal, M2: Marginal>(m1: &M1, m2: &M2) -> Result<Self> {
        let values = (0..LIKELIHOOD_NODES)
            .map(|i| product_density(m1, m2, log_node(i).exp()))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn of(family: Family, theta: (f64, f64)) -> Result<Self> {
        let [m1, m2] = family.marginals(theta)?;
        Self::new(&m1, &m2)
    }

    /// Interpolated, unfloored density at `q in (0, 1]`.
    pub fn density(&self, q: f64) -> f64 {
        let n = self.values.len();
        let t0 = Q_MIN.ln();
        let dt = -t0 / (n - 1) as f64;
        let s = (q.ln() - t0) / dt;
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        let frac = s - i as f64;
        (self.values[i] + frac * (self.values[i + 1] - self.values[i])).max(0.0)
    }

    pub fn log_likelihood(&self, samples: &SampleSet) -> Result<f64> {
        if samples.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: samples.dim() });
        }
        let mut total = 0.0;
        for (index, &q) in samples.as_flat().iter().enumerate() {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::NonpositiveDensity { index });
            }
            let f = self.density(q);
            if !f.is_finite() {
                return Err(Error::NonpositiveDensity { index });
            }
            total += f.max(DENSITY_FLOOR).ln();
        }
        Ok(total)
    }
}

fn log_node(i: usize) -> f64 {
    Q_MIN.ln() * (1.0 - i as f64 / (LIKELIHOOD_NODES - 1) as f64)
}

/// `sum_i log f_Q(q_i | theta)` with the pushforward tabulated on
/// [`LIKELIHOOD_NODES`] nodes and floored at [`DENSITY_FLOOR`].
pub fn log_likelihood(family: Family, theta: (f64, f64), samples: &SampleSet) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    Pushforward::of(family, theta)?.log_likelihood(samples)
}

/// Pushforwards at every node of a parameter grid; failed nodes are `None`.
#[derive(Debug, Clone)]
pub struct PushforwardTable {
    pub family: Family,
    pub grid: ParamGrid,
    pub nodes: Vec<Option<Pushforward>>,
}

impl PushforwardTable {
    pub fn build(family: Family, grid: ParamGrid) -> Self {
        let nodes = par::map_range(grid.len(), |k| Pushforward::of(family, grid.node(k)).ok());
        Self { family, grid, nodes }
    }

    pub fn failed(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_none()).count()
    }

    pub fn log_likelihoods(&self, samples: &SampleSet) -> Vec<Option<f64>> {
        par::map_range(self.nodes.len(), |k| self.nodes[k].as_ref().and_then(|p| p.log_likelihood(samples).ok()))
    }
}

/// Gridded posterior over two parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPosterior {
    pub grid: ParamGrid,
    pub prior: Vec<f64>,
    /// `-inf` where the likelihood could not be evaluated.
    pub loglik: Vec<f64>,
    pub posterior: Vec<f64>,
    pub map_index: (usize, usize),
    pub n_samples: usize,
    pub seed: u64,
}

impl ParamPosterior {
    pub fn map_estimate(&self) -> (f64, f64) {
        let g = &self.grid.grid;
        (g.gx.node(self.map_index.0), g.gy.node(self.map_index.1))
    }

    pub fn weights(&self) -> Vec<f64> {
        let a = self.grid.cell_area();
        self.posterior.iter().map(|p| p * a).collect()
    }

    pub fn mass(&self) -> f64 {
        self.weights().iter().sum()
    }

    pub fn mean(&self) -> (f64, f64) {
        let w = self.weights();
        let mut m = (0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            let (a, b) = self.grid.node(k);
            m.0 += wk * a;
            m.1 += wk * b;
        }
        m
    }

    /// Trace of the posterior covariance matrix.
    pub fn covariance_trace(&self) -> f64 {
        let (ma, mb) = self.mean();
        self.weights()
            .iter()
            .enumerate()
            .map(|(k, wk)| {
                let (a, b) = self.grid.node(k);
                wk * ((a - ma).powi(2) + (b - mb).powi(2))
            })
            .sum()
    }

    pub fn pdf(&self) -> Result<GriddedPdf2D> {
        GriddedPdf2D::new(self.grid.grid.clone(), self.posterior.clone())
    }

    pub fn prior_pdf(&self) -> Result<GriddedPdf2D> {
        GriddedPdf2D::new(self.grid.grid.clone(), self.prior.clone())
    }

    /// Posterior mass of a parameter box.
    pub fn mass_in(&self, r: Rect) -> Result<f64> {
        self.pdf()?.integrate(r)
    }
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| v > values[b]) {
            best = Some(k);
        }
    }
    best
}

fn tabulate_prior<P: Fn(f64, f64) -> f64>(grid: &ParamGrid, prior: P) -> Result<Vec<f64>> {
    let raw: Vec<f64> = (0..grid.len()).map(|k| {
        let (a, b) = grid.node(k);
        prior(a, b)
    }).collect();
    if let Some(index) = raw.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite { index });
    }
    let mass: f64 = raw.iter().sum::<f64>() * grid.cell_area();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass { mass });
    }
    Ok(raw.into_iter().map(|v| v / mass).collect())
}

/// Posterior on the table's grid given a (possibly unnormalized) prior density.
pub fn posterior_from_table<P: Fn(f64, f64) -> f64>(
    table: &PushforwardTable,
    prior: P,
    samples: &SampleSet,
) -> Result<ParamPosterior> {
    let grid = table.grid.clone();
    let prior = tabulate_prior(&grid, prior)?;
    let loglik: Vec<f64> = if samples.is_empty() {
        table.nodes.iter().map(|n| if n.is_some() { 0.0 } else { f64::NEG_INFINITY }).collect()
    } else {
        table.log_likelihoods(samples).into_iter().map(|l| l.unwrap_or(f64::NEG_INFINITY)).collect()
    };
    ParamPosterior::from_parts(grid, prior, loglik, samples.len(), samples.seed())
}

impl ParamPosterior {
    /// Posterior `exp(loglik) prior` normalized over `grid`; `prior` holds
    /// node values of a possibly unnormalized density.
    pub fn from_parts(grid: ParamGrid, prior: Vec<f64>, loglik: Vec<f64>, n_samples: usize, seed: u64) -> Result<Self> {
        if prior.len() != grid.len() || loglik.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let prior = tabulate_prior(&grid, |a, b| grid.cell_of((a, b)).map_or(0.0, |k| prior[k]))?;
        let peak = loglik
            .iter()
            .zip(&prior)
            .filter(|(l, p)| l.is_finite() && **p > 0.0)
            .map(|(l, _)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::AllCellsFailed);
        }
        let raw: Vec<f64> = loglik
            .iter()
            .zip(&prior)
            .map(|(l, p)| if l.is_finite() { (l - peak).exp() * p } else { 0.0 })
            .collect();
        let mass: f64 = raw.iter().sum::<f64>() * grid.cell_area();
        let posterior: Vec<f64> = raw.into_iter().map(|v| v / mass).collect();
        let best = argmax(&posterior).ok_or(Error::AllCellsFailed)?;
        Ok(Self { map_index: grid.split(best), grid, prior, loglik, posterior, n_samples, seed })
    }
}

/// Posterior over `grid` for `family` with prior density `prior`.
pub fn posterior<P: Fn(f64, f64) -> f64>(
    family: Family,
    grid: ParamGrid,
    prior: P,
    samples: &SampleSet,
) -> Result<ParamPosterior> {
    posterior_from_table(&PushforwardTable::build(family, grid), prior, samples)
}

/// Uniform prior on the maxent means, `[0.25, 0.75]^2`.
pub fn maxent_prior_grid(n: usize) -> Result<ParamGrid> {
    let g = Grid1D::new(0.25, 0.75, n)?;
    Ok(Family::MaxEntMeans.param_grid(g, g))
}

/// Prior for `Beta(1, nu)` marginals induced by uniform means on
/// `[0.25, 0.75]`: proportional to `1 / ((nu1 + 1)^2 (nu2 + 1)^2)` on `[1/3, 3]^2`.
pub fn beta_mean_uniform_prior(nu1: f64, nu2: f64) -> f64 {
    let inside = |v: f64| (1.0 / 3.0..=3.0).contains(&v);
    if inside(nu1) && inside(nu2) {
        4.0 / ((nu1 + 1.0).powi(2) * (nu2 + 1.0).powi(2))
    } else {
        0.0
    }
}

pub fn beta_prior_grid(n: usize) -> Result<ParamGrid> {
    let g = Grid1D::new(1.0 / 3.0, 3.0, n)?;
    Ok(Family::BetaOneNu.param_grid(g, g))
}

/// Result of an L1 pushforward fit over a parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Fit {
    pub grid: ParamGrid,
    /// `None` where the pushforward could not be computed.
    pub surface: Vec<Option<f64>>,
    pub argmin: usize,
    pub theta: (f64, f64),
    pub min_error: f64,
}

/// Evaluate `||f_Q - f_Q(. | theta)||_1` at every node of `grid`.
pub fn l1_fit(family: Family, target: &GriddedPdf1D, grid: ParamGrid) -> Result<L1Fit> {
    let qg = target.grid();
    let surface: Vec<Option<f64>> = par::map_range(grid.len(), |k| {
        let [m1, m2] = family.marginals(grid.node(k)).ok()?;
        let p = propagate_product_pdf(&m1, &m2, qg).ok()?;
        l1_distance(target, &p).ok()
    });
    let neg: Vec<f64> = surface.iter().map(|s| s.map_or(f64::NAN, |v| -v)).collect();
    let argmin = argmax(&neg).ok_or(Error::AllCellsFailed)?;
    Ok(L1Fit { theta: grid.node(argmin), min_error: -neg[argmin], argmin, surface, grid })
}

/// Monotone coordinate bijection `phi = forward(theta)`.
#[derive(Debug, Clone, Copy)]
pub struct Bijection {
    pub forward: fn(f64) -> f64,
    pub inverse: fn(f64) -> f64,
}

impl Bijection {
    pub fn identity() -> Self {
        Self { forward: |x| x, inverse: |x| x }
    }

    /// `mu = 1 / (1 + nu)`, the mean of `Beta(1, nu)`.
    pub fn nu_to_mu() -> Self {
        Self { forward: |nu| 1.0 / (1.0 + nu), inverse: |mu| 1.0 / mu - 1.0 }
    }

    fn image(&self, axis: Grid1D) -> Result<Grid1D> {
        let edges: Vec<f64> = axis.edges().into_iter().map(self.forward).collect();
        let inc = edges.windows(2).all(|w| w[1] > w[0]);
        let dec = edges.windows(2).all(|w| w[1] < w[0]);
        if !(inc || dec) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonMonotoneMap);
        }
        for (&x, &y) in axis.edges().iter().zip(&edges) {
            if ((self.inverse)(y) - x).abs() > 1e-9 * x.abs().max(1.0) {
                return Err(Error::NonMonotoneMap);
            }
        }
        let (a, b) = (edges[0], edges[edges.len() - 1]);
        Grid1D::new(a.min(b), a.max(b), axis.len())
    }

    fn preimage(&self, a: f64, b: f64) -> (f64, f64) {
        let (x, y) = ((self.inverse)(a), (self.inverse)(b));
        (x.min(y), x.max(y))
    }
}

/// Transport a posterior to `phi = (f1(theta1), f2(theta2))`.
///
/// Each `phi` cell receives the `theta` mass of its preimage box, which is
/// the change of variables with the absolute Jacobian applied cellwise and
/// preserves box masses exactly up to the piecewise-constant representation.
/// Log-likelihoods are carried over from the cell containing the preimage of
/// each `phi` node.
pub fn reparameterize(post: &ParamPosterior, maps: [Bijection; 2], names: [&str; 2]) -> Result<ParamPosterior> {
    let [ax, ay] = post.grid.axes();
    let (gx, gy) = (maps[0].image(ax)?, maps[1].image(ay)?);
    let grid = ParamGrid::new(names, gx, gy);
    let post_pdf = post.pdf()?;
    let prior_pdf = post.prior_pdf()?;
    let area = grid.cell_area();
    let n = grid.len();
    let mut posterior = Vec::with_capacity(n);
    let mut prior = Vec::with_capacity(n);
    let mut loglik = Vec::with_capacity(n);
    for k in 0..n {
        let (i, j) = grid.split(k);
        let (x0, x1) = maps[0].preimage(gx.edge(i), gx.edge(i + 1));
        let (y0, y1) = maps[1].preimage(gy.edge(j), gy.edge(j + 1));
        let r = Rect::new(x0, x1, y0, y1);
        posterior.push(post_pdf.integrate(r)? / area);
        prior.push(prior_pdf.integrate(r)? / area);
        let centre = ((maps[0].inverse)(gx.node(i)), (maps[1].inverse)(gy.node(j)));
        loglik.push(post.grid.cell_of(centre).map_or(f64::NEG_INFINITY, |c| post.loglik[c]));
    }
    let best = argmax(&posterior).ok_or(Error::AllCellsFailed)?;
    Ok(ParamPosterior {
        map_index: grid.split(best),
        grid,
        prior,
        loglik,
        posterior,
        n_samples: post.n_samples,
        seed: post.seed,
    })
}

/// `prior(z) * f_obs(Q(z)) / f_prior_push(Q(z))` on the prior's grid with
/// the default sampling settings.
pub fn data_consistent_update(prior: &GriddedPdf2D, f_obs: &GriddedPdf1D, map: ForwardMap) -> Result<GriddedPdf2D> {
    data_consistent_update_with(prior, f_obs, map, DC_SAMPLES, DC_BINS, DC_SEED)
}

/// Data-consistent update with the prior pushforward estimated from `n`
/// rejection samples of `prior` binned into `bins` cells over the map's range.
pub fn data_consistent_update_with(
    prior: &GriddedPdf2D,
    f_obs: &GriddedPdf1D,
    map: ForwardMap,
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<GriddedPdf2D> {
    let (lo, hi) = map.range();
    let qg = Grid1D::new(lo, hi, bins)?;
    let z = rejection_sample_2d(prior, n, seed)?;
    let push = histogram_to_pdf(&forward_sample(map, &z)?, qg)?;
    let obs: Vec<f64> = (0..bins)
        .map(|b| Ok(f_obs.integrate(Interval::new(qg.edge(b), qg.edge(b + 1)))? / qg.h()))
        .collect::<Result<_>>()?;
    let stranded: f64 = obs.iter().zip(push.values()).filter(|(_, p)| **p <= 0.0).map(|(o, _)| o * qg.h()).sum();
    if stranded > DC_SUPPORT_TOL {
        return Err(Error::SupportViolation { mass: stranded });
    }
    let g = prior.grid();
    let mut values = Vec::with_capacity(g.len());
    for i in 0..g.gx.len() {
        for j in 0..g.gy.len() {
            let q = map.apply(g.gx.node(i), g.gy.node(j));
            let ratio = match qg.cell_of(q) {
                Some(b) if push.values()[b] > 0.0 => obs[b] / push.values()[b],
                _ => 0.0,
            };
            values.push(prior.value(i, j) * ratio);
        }
    }
    GriddedPdf2D::new(g, values)?.normalize()
}

fn unit_support(ms: &[FamilyMarginal; 2]) -> bool {
    ms.iter().all(|m| m.upper() == 1.0)
}

/// Conditional pushforward pdfs of a sum or product map at every node of a
/// parameter grid, reusable across posteriors on that grid.
#[derive(Debug, Clone)]
pub struct PredictiveTable {
    pub family: Family,
    pub grid: ParamGrid,
    pub map: ForwardMap,
    pub qgrid: Grid1D,
    pub pdfs: Vec<Option<GriddedPdf1D>>,
}

impl PredictiveTable {
    /// Tabulate every node of `grid`.
    pub fn build(family: Family, grid: ParamGrid, map: ForwardMap, qgrid: Grid1D) -> Result<Self> {
        let all: Vec<usize> = (0..grid.len()).collect();
        Self::build_nodes(family, grid, map, qgrid, &all)
    }

    fn build_nodes(family: Family, grid: ParamGrid, map: ForwardMap, qgrid: Grid1D, nodes: &[usize]) -> Result<Self> {
        if !matches!(map, ForwardMap::Sum | ForwardMap::Product) {
            return Err(Error::Domain(format!("no quadrature pushforward for {map:?}")));
        }
        let mut pdfs = vec![None; grid.len()];
        let built = par::map_range(nodes.len(), |a| -> Option<GriddedPdf1D> {
            let [m1, m2] = family.marginals(grid.node(nodes[a])).ok()?;
            if !unit_support(&[m1, m2]) {
                return None;
            }
            match map {
                ForwardMap::Sum => propagate_sum_pdf(&m1, &m2, qgrid).ok(),
                _ => propagate_product_pdf(&m1, &m2, qgrid).ok(),
            }
        });
        for (a, p) in built.into_iter().enumerate() {
            pdfs[nodes[a]] = p;
        }
        Ok(Self { family, grid, map, qgrid, pdfs })
    }

    /// Posterior-weighted mixture; nodes carrying less than `1e-10` of the
    /// posterior mass are dropped and the rest renormalized.
    pub fn predictive(&self, post: &ParamPosterior) -> Result<GriddedPdf1D> {
        if post.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let w = post.weights();
        let total: f64 = w.iter().sum();
        let mut values = vec![0.0; self.qgrid.len()];
        let mut used = 0.0;
        for (k, &wk) in w.iter().enumerate() {
            if wk <= MIXTURE_CUTOFF * total {
                continue;
            }
            let part = self.pdfs[k].as_ref().ok_or_else(|| Error::Domain(format!("pushforward failed at node {k}")))?;
            used += wk;
            for (v, p) in values.iter_mut().zip(part.values()) {
                *v += wk * p;
            }
        }
        for v in &mut values {
            *v /= used;
        }
        GriddedPdf1D::new(self.qgrid, values)?.normalize()
    }
}

/// Posterior predictive density of `map(Z1, Z2)` on `grid`.
///
/// Sum and product maps of unit-support families are mixtures of quadrature
/// pushforwards (see [`PredictiveTable::predictive`]); every other case goes
/// through [`posterior_predictive_mc`] with [`PREDICTIVE_MC_SAMPLES`] draws
/// seeded by the posterior's sample seed.
pub fn posterior_predictive(post: &ParamPosterior, family: Family, map: ForwardMap, grid: Grid1D) -> Result<GriddedPdf1D> {
    let w = post.weights();
    let total: f64 = w.iter().sum();
    let active: Vec<usize> = (0..w.len()).filter(|&k| w[k] > MIXTURE_CUTOFF * total).collect();
    let quadrature = matches!(map, ForwardMap::Sum | ForwardMap::Product)
        && active.iter().all(|&k| family.marginals(post.grid.node(k)).is_ok_and(|m| unit_support(&m)));
    if !quadrature {
        return posterior_predictive_mc(post, family, map, grid, PREDICTIVE_MC_SAMPLES, post.seed);
    }
    PredictiveTable::build_nodes(family, post.grid.clone(), map, grid, &active)?.predictive(post)
}

/// Monte Carlo posterior predictive: draw a node from the posterior weights,
/// then `(Z1, Z2)` from that node's marginals, and histogram `map(Z1, Z2)`.
pub fn posterior_predictive_mc(
    post: &ParamPosterior,
    family: Family,
    map: ForwardMap,
    grid: Grid1D,
    n: usize,
    seed: u64,
) -> Result<GriddedPdf1D> {
    let w = post.weights();
    let pick = WeightedIndex::new(&w).map_err(|_| Error::AllCellsFailed)?;
    let marginals: Vec<Option<[FamilyMarginal; 2]>> =
        (0..w.len()).map(|k| if w[k] > 0.0 { family.marginals(post.grid.node(k)).ok() } else { None }).collect();
    let mut r = sampling::rng(seed);
    let mut q = Vec::with_capacity(n);
    while q.len() < n {
        let k = pick.sample(&mut r);
        let Some([m1, m2]) = &marginals[k] else {
            return Err(Error::AllCellsFailed);
        };
        let v = map.apply(m1.sample(&mut r), m2.sample(&mut r));
        if grid.cell_of(v).is_some() {
            q.push(v);
        }
    }
    histogram_to_pdf(&SampleSet::from_scalars(q, seed)?, grid)?.normalize()
}

/// Pushforward of a gridded `(Z1, Z2)` pdf under `Z1 + Z2` treating each cell
/// as a point mass at its centre: on a square grid with spacing `h` the sums
/// fall on the lattice `(k + 1) h`, giving `2n - 1` cells starting at `h / 2`.
pub fn lattice_sum_pdf(p: &GriddedPdf2D) -> Result<GriddedPdf1D> {
    let g = p.grid();
    let (gx, gy) = (g.gx, g.gy);
    let h = gx.h();
    if gx.len() != gy.len() || (gy.h() - h).abs() > 1e-12 * h || (gx.lo() - gy.lo()).abs() > 1e-12 {
        return Err(Error::GridMismatch);
    }
    let n = gx.len();
    let out = Grid1D::new(2.0 * gx.lo() + 0.5 * h, 2.0 * gx.lo() + (2 * n) as f64 * h - 0.5 * h, 2 * n - 1)?;
    let a = g.cell_area();
    let mut values = vec![0.0; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            values[i + j] += p.value(i, j) * a / h;
        }
    }
    GriddedPdf1D::new(out, values)
}

/// `P(map(Z) <= threshold)` with each grid cell's mass placed at its centre.
pub fn lattice_probability_below(p: &GriddedPdf2D, map: ForwardMap, threshold: f64) -> f64 {
    let g = p.grid();
    let a = g.cell_area();
    let mut s = 0.0;
    for i in 0..g.gx.len() {
        for j in 0..g.gy.len() {
            if map.apply(g.gx.node(i), g.gy.node(j)) <= threshold {
                s += p.value(i, j) * a;
            }
        }
    }
    s
}
