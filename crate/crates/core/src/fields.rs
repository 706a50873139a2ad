//! One-dimensional random fields: covariance kernels, Gaussian and
//! translation-process sampling, the integral ODE solves, discrete
//! Karhunen-Loeve decompositions, truncation and least-squares field
//! reconstruction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::par;
use crate::quad::quad_1d_breaks;
use crate::sampling;

pub const DEFAULT_MESH_POINTS: usize = 201;
pub const GP_JITTER: f64 = 1e-10;
/// Modes with eigenvalue below this fraction of the largest get zero scores.
pub const SCORE_CUTOFF: f64 = 1e-12;
/// Bound on the spectral mass discarded beyond the frequency cutoff.
pub const SPECTRAL_TAIL_TOL: f64 = 1e-8;
const SPECTRAL_QUAD_TOL: f64 = 1e-12;
const QUANTILE_TOL: f64 = 1e-12;
/// Design matrices with a larger 2-norm condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Uniform mesh on `[0, 1]` including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    n: usize,
}

impl Mesh1D {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 mesh points, got {n_points}")));
        }
        Ok(Self { n: n_points })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Trapezoid weights: `h` inside, `h / 2` at the endpoints.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n).map(|i| if i == 0 || i + 1 == self.n { 0.5 * h } else { h }).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights().iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Cumulative trapezoid operator: row `i` integrates over `[0, x_i]`.
    pub fn cumulative_trapezoid(&self) -> DMatrix<f64> {
        let h = self.h();
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i == 0 || j > i {
                0.0
            } else if j == 0 || j == i {
                0.5 * h
            } else {
                h
            }
        })
    }
}

impl Default for Mesh1D {
    fn default() -> Self {
        Self { n: DEFAULT_MESH_POINTS }
    }
}

/// Stationary correlation functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovKernel {
    /// Matern with smoothness `nu` in `{1/2, 3/2, 5/2}` and length scale `ell`.
    Matern { nu: f64, ell: f64 },
    /// Single-degree-of-freedom oscillator spectrum
    /// `s(v) = F / ((v^2 - v0^2)^2 + (2 zeta v v0)^2)` with cutoff frequency `cutoff`.
    SpectralSdof { nu0: f64, zeta: f64, f: f64, cutoff: f64 },
}

impl CovKernel {
    pub fn matern52(ell: f64) -> Self {
        CovKernel::Matern { nu: 2.5, ell }
    }

    /// Oscillator spectrum with `F` calibrated so the correlation is one at
    /// zero lag. The cutoff starts at `50 v0` and doubles until the
    /// discarded two-sided mass `2 F / (3 N^3)` is below [`SPECTRAL_TAIL_TOL`].
    pub fn spectral_sdof(nu0: f64, zeta: f64) -> Result<Self> {
        if !(nu0 > 0.0 && zeta > 0.0 && zeta < 1.0) {
            return Err(Error::Domain(format!("oscillator parameters nu0 = {nu0}, zeta = {zeta}")));
        }
        let unit = CovKernel::SpectralSdof { nu0, zeta, f: 1.0, cutoff: 50.0 * nu0 };
        let mut cutoff = 50.0 * nu0;
        let mut f = 1.0 / unit.spectral_integral(0.0, cutoff)?;
        while 2.0 * f / (3.0 * cutoff.powi(3)) >= SPECTRAL_TAIL_TOL {
            cutoff *= 2.0;
            f = 1.0 / unit.spectral_integral(0.0, cutoff)?;
        }
        Ok(CovKernel::SpectralSdof { nu0, zeta, f, cutoff })
    }

    pub fn spectral_density(&self, v: f64) -> f64 {
        match *self {
            CovKernel::SpectralSdof { nu0, zeta, f, .. } => {
                f / ((v * v - nu0 * nu0).powi(2) + (2.0 * zeta * v * nu0).powi(2))
            }
            CovKernel::Matern { .. } => f64::NAN,
        }
    }

    /// `2 int_0^N s(v) cos(v tau) dv`.
    fn spectral_integral(&self, tau: f64, cutoff: f64) -> Result<f64> {
        let CovKernel::SpectralSdof { nu0, zeta, .. } = *self else {
            return Err(Error::Domain("not a spectral kernel".into()));
        };
        let w = zeta * nu0;
        let mut breaks: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0].iter().map(|k| nu0 + k * w).collect();
        let mut b = 4.0 * nu0;
        while b < cutoff {
            breaks.push(b);
            b *= 2.0;
        }
        let v = quad_1d_breaks(|v| self.spectral_density(v) * (v * tau).cos(), 0.0, cutoff, &breaks, SPECTRAL_QUAD_TOL)?;
        Ok(2.0 * v)
    }

    pub fn correlation(&self, tau: f64) -> Result<f64> {
        let t = tau.abs();
        match *self {
            CovKernel::Matern { nu, ell } => {
                let r = t / ell;
                if nu == 0.5 {
                    Ok((-r).exp())
                } else if nu == 1.5 {
                    let s = 3f64.sqrt() * r;
                    Ok((1.0 + s) * (-s).exp())
                } else if nu == 2.5 {
                    let s = 5f64.sqrt() * r;
                    Ok((1.0 + s + s * s / 3.0) * (-s).exp())
                } else {
                    Err(Error::Domain(format!("Matern smoothness {nu}")))
                }
            }
            CovKernel::SpectralSdof { cutoff, .. } => self.spectral_integral(t, cutoff),
        }
    }

    /// Correlation matrix on the mesh; each distinct lag is evaluated once.
    pub fn matrix(&self, mesh: Mesh1D) -> Result<DMatrix<f64>> {
        let h = mesh.h();
        let lags = par::map_range(mesh.len(), |k| self.correlation(k as f64 * h));
        let lags = lags.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(DMatrix::from_fn(mesh.len(), mesh.len(), |i, j| lags[i.abs_diff(j)]))
    }
}

/// Sample paths on a mesh, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnsemble {
    pub mesh: Mesh1D,
    pub samples: DMatrix<f64>,
    pub seed: u64,
}

impl FieldEnsemble {
    pub fn new(mesh: Mesh1D, samples: DMatrix<f64>, seed: u64) -> Result<Self> {
        if samples.ncols() != mesh.len() {
            return Err(Error::DimensionMismatch { expected: mesh.len(), got: samples.ncols() });
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { mesh, samples, seed })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.samples.row_mean().transpose()
    }

    /// Per-node sample variance (denominator `n - 1`).
    pub fn variance(&self) -> DVector<f64> {
        self.covariance().diagonal()
    }

    pub fn centered(&self) -> DMatrix<f64> {
        let m = self.samples.row_mean();
        let mut c = self.samples.clone();
        for mut row in c.row_iter_mut() {
            row -= &m;
        }
        c
    }

    /// Sample covariance between nodes (denominator `n - 1`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let c = self.centered();
        let d = (self.n_samples().max(2) - 1) as f64;
        (c.transpose() * &c) / d
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> FieldEnsemble {
        FieldEnsemble { mesh: self.mesh, samples: self.samples.map(f), seed: self.seed }
    }
}

/// `n` zero-mean paths with correlation `kernel` via Cholesky factorization
/// of the mesh correlation matrix (diagonal jitter [`GP_JITTER`] if needed).
pub fn sample_gp(kernel: &CovKernel, mesh: Mesh1D, n: usize, seed: u64) -> Result<FieldEnsemble> {
    let k = kernel.matrix(mesh)?;
    let l = match k.clone().cholesky() {
        Some(c) => c.l(),
        None => {
            let jittered = k + DMatrix::identity(mesh.len(), mesh.len()) * GP_JITTER;
            jittered.cholesky().ok_or(Error::NotPsd)?.l()
        }
    };
    let mut r = sampling::rng(seed);
    let z = DMatrix::from_fn(mesh.len(), n, |_, _| StandardNormal.sample(&mut r));
    FieldEnsemble::new(mesh, (l * z).transpose(), seed)
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Quantile of `Beta(a, b)`: Newton steps on the regularized incomplete
/// beta function, safeguarded by a shrinking bisection bracket, to [`QUANTILE_TOL`].
pub fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let ln_norm = statrs::function::beta::ln_beta(a, b);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = a / (a + b);
    for _ in 0..200 {
        let f = beta_reg(a, b, x) - p;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_norm).exp();
        let step = f / d;
        let next = x - step;
        if d > 0.0 && next >= lo && next <= hi {
            if step.abs() < QUANTILE_TOL {
                return next;
            }
            x = next;
        } else {
            x = 0.5 * (lo + hi);
        }
        if hi - lo < QUANTILE_TOL {
            return 0.5 * (lo + hi);
        }
    }
    x
}

/// `alpha + (beta - alpha) F^{-1}_{Beta(a, b)}(Phi(G))` pointwise.
pub fn translation_process(g: &FieldEnsemble, alpha: f64, beta: f64, params: (f64, f64)) -> Result<FieldEnsemble> {
    if !(beta > alpha && params.0 > 0.0 && params.1 > 0.0) {
        return Err(Error::Domain(format!("translation range [{alpha}, {beta}], shape {params:?}")));
    }
    let (n, m) = g.samples.shape();
    let rows = par::map_range(n, |i| {
        (0..m).map(|j| alpha + (beta - alpha) * beta_quantile(params.0, params.1, standard_normal_cdf(g.samples[(i, j)]))).collect::<Vec<f64>>()
    });
    let samples = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
    FieldEnsemble::new(g.mesh, samples, g.seed)
}

fn cumulative(mesh: Mesh1D, row: impl Iterator<Item = f64>) -> Vec<f64> {
    let h = mesh.h();
    let mut out = Vec::with_capacity(mesh.len());
    let mut acc = 0.0;
    let mut prev = None;
    for v in row {
        if let Some(p) = prev {
            acc += 0.5 * h * (p + v);
        }
        out.push(acc);
        prev = Some(v);
    }
    out
}

fn integrate_paths(a: &FieldEnsemble) -> Result<FieldEnsemble> {
    let n = a.n_samples();
    let rows: Vec<Vec<f64>> = par::map_range(n, |i| cumulative(a.mesh, a.samples.row(i).iter().copied()));
    FieldEnsemble::new(a.mesh, DMatrix::from_fn(n, a.mesh.len(), |i, j| rows[i][j]), a.seed)
}

/// `U(x) = int_0^x 1 / A(y) dy` per path by cumulative trapezoid.
pub fn solve_ode_reciprocal(a: &FieldEnsemble) -> Result<FieldEnsemble> {
    for (i, row) in a.samples.row_iter().enumerate() {
        if let Some(node) = row.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::NonpositiveField { sample: i, node });
        }
    }
    integrate_paths(&a.map(|v| 1.0 / v))
}

/// `U(x) = int_0^x A(y) dy` per path by cumulative trapezoid.
pub fn solve_ode_integral(a: &FieldEnsemble) -> Result<FieldEnsemble> {
    integrate_paths(a)
}

/// Discrete Karhunen-Loeve basis under the trapezoid inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct KLBasis {
    pub mesh: Mesh1D,
    pub mean: DVector<f64>,
    /// Descending, clipped at zero.
    pub eigvals: Vec<f64>,
    /// Columns orthonormal under the trapezoid weights.
    pub eigvecs: DMatrix<f64>,
    /// `n_samples x n_modes`; empty when built from a covariance matrix.
    pub scores: DMatrix<f64>,
    /// Modes whose scores were zeroed for being numerically null.
    pub skipped: Vec<usize>,
}

impl KLBasis {
    pub fn n_modes(&self) -> usize {
        self.eigvals.len()
    }

    /// `sum_{k < m} lambda_k phi_k phi_k^T`.
    pub fn covariance(&self, m: usize) -> DMatrix<f64> {
        let m = m.min(self.n_modes());
        let p = self.eigvecs.columns(0, m);
        let l = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigvals[..m]));
        &p * l * p.transpose()
    }

    /// Scores of the modes with nonzero variance, the stochastic basis used
    /// for least-squares reconstruction.
    pub fn active_scores(&self) -> DMatrix<f64> {
        let keep: Vec<usize> = (0..self.n_modes()).filter(|k| !self.skipped.contains(k)).collect();
        self.scores.select_columns(&keep)
    }
}

fn weighted_eigen(mesh: Mesh1D, cov: &DMatrix<f64>, n_modes: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mesh.len();
    if cov.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, got: cov.nrows() });
    }
    if n_modes == 0 || n_modes > n {
        return Err(Error::DimensionMismatch { expected: n, got: n_modes });
    }
    let sw: Vec<f64> = mesh.weights().iter().map(|w| w.sqrt()).collect();
    let kw = DMatrix::from_fn(n, n, |i, j| sw[i] * cov[(i, j)] * sw[j]);
    let kw = 0.5 * (&kw + kw.transpose());
    let eig = SymmetricEigen::new(kw);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(n_modes);
    let vals: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let vecs = DMatrix::from_fn(n, n_modes, |i, c| eig.eigenvectors[(i, order[c])] / sw[i]);
    Ok((vals, vecs))
}

/// KL decomposition of an analytic covariance matrix on the mesh.
pub fn kl_decompose_covariance(mesh: Mesh1D, cov: &DMatrix<f64>, n_modes: usize) -> Result<KLBasis> {
    let (eigvals, eigvecs) = weighted_eigen(mesh, cov, n_modes)?;
    Ok(KLBasis {
        mesh,
        mean: DVector::zeros(mesh.len()),
        eigvals,
        eigvecs,
        scores: DMatrix::zeros(0, n_modes),
        skipped: Vec::new(),
    })
}

/// KL decomposition of an ensemble's sample covariance, with scores
/// `Y_k = <u - mean, phi_k> / sqrt(lambda_k)`.
pub fn kl_decompose(e: &FieldEnsemble, n_modes: usize) -> Result<KLBasis> {
    let (eigvals, eigvecs) = weighted_eigen(e.mesh, &e.covariance(), n_modes)?;
    let w = DVector::from_vec(e.mesh.weights());
    let weighted = DMatrix::from_fn(e.mesh.len(), n_modes, |i, k| w[i] * eigvecs[(i, k)]);
    let mut scores = e.centered() * weighted;
    let top = eigvals.first().copied().unwrap_or(0.0);
    let mut skipped = Vec::new();
    for (k, &l) in eigvals.iter().enumerate() {
        if l < SCORE_CUTOFF * top || l <= 0.0 {
            scores.column_mut(k).fill(0.0);
            skipped.push(k);
        } else {
            scores.column_mut(k).scale_mut(1.0 / l.sqrt());
        }
    }
    Ok(KLBasis { mesh: e.mesh, mean: e.mean(), eigvals, eigvecs, scores, skipped })
}

/// Smallest `M` with `sum_{k <= M} lambda_k >= alpha sum_k lambda_k`.
pub fn truncation_level(eigvals: &[f64], alpha: f64) -> usize {
    let total: f64 = eigvals.iter().sum();
    let positive = eigvals.iter().filter(|&&l| l > 0.0).count();
    let mut acc = 0.0;
    for (k, l) in eigvals.iter().enumerate() {
        acc += l;
        if acc >= alpha * total {
            return (k + 1).min(positive.max(1));
        }
    }
    positive
}

/// Per-node linear expansion `c_0(x) + sum_k c_k(x) Y_k` fitted by least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExpansion {
    /// `(1 + n_scores) x n_nodes`; row 0 is `c_0`.
    pub coefficients: DMatrix<f64>,
    pub fitted: FieldEnsemble,
    pub condition: f64,
}

/// Ordinary least squares of every node of `target` on `[1, Y_1, ..., Y_M]`
/// through a single QR factorization of the design matrix.
pub fn field_least_squares(target: &FieldEnsemble, scores: &DMatrix<f64>) -> Result<LinearExpansion> {
    let n = target.n_samples();
    if scores.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: scores.nrows() });
    }
    let p = scores.ncols() + 1;
    if p > n {
        return Err(Error::DimensionMismatch { expected: n, got: p });
    }
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { scores[(i, j - 1)] });
    let sv = x.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { cond: condition });
    }
    let qr = x.clone().qr();
    let qtb = qr.q().transpose() * &target.samples;
    let coefficients = qr.r().solve_upper_triangular(&qtb).ok_or(Error::IllConditioned { cond: condition })?;
    let fitted = FieldEnsemble::new(target.mesh, x * &coefficients, target.seed)?;
    Ok(LinearExpansion { coefficients, fitted, condition })
}

/// Second-order comparison between a field and its reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderReport {
    pub mean_true: DVector<f64>,
    pub mean_fit: DVector<f64>,
    pub var_true: DVector<f64>,
    pub var_fit: DVector<f64>,
    /// `|c(s, t) - c~(s, t)|`.
    pub cov_abs_diff: DMatrix<f64>,
    pub sup_mean_rel: f64,
    pub sup_var_rel: f64,
    pub sup_cov_diff: f64,
    pub sup_cov: f64,
    pub integrated_var_true: f64,
    pub integrated_var_fit: f64,
}

impl SecondOrderReport {
    /// `1 - int Var(fit) / int Var(true)`.
    pub fn variance_deficit(&self) -> f64 {
        1.0 - self.integrated_var_fit / self.integrated_var_true
    }
}

pub fn second_order_report(truth: &FieldEnsemble, fit: &FieldEnsemble) -> Result<SecondOrderReport> {
    if truth.mesh != fit.mesh {
        return Err(Error::GridMismatch);
    }
    let (mt, mf) = (truth.mean(), fit.mean());
    let (ct, cf) = (truth.covariance(), fit.covariance());
    let (vt, vf) = (ct.diagonal(), cf.diagonal());
    let diff = (&ct - &cf).abs();
    let rel = |a: &DVector<f64>, b: &DVector<f64>| {
        a.iter().zip(b.iter()).map(|(x, y)| if *x != 0.0 { ((x - y) / x).abs() } else { (x - y).abs() }).fold(0.0, f64::max)
    };
    Ok(SecondOrderReport {
        sup_mean_rel: rel(&mt, &mf),
        sup_var_rel: rel(&vt, &vf),
        sup_cov_diff: diff.max(),
        sup_cov: ct.abs().max(),
        integrated_var_true: truth.mesh.integrate(vt.as_slice()),
        integrated_var_fit: truth.mesh.integrate(vf.as_slice()),
        mean_true: mt,
        mean_fit: mf,
        var_true: vt,
        var_fit: vf,
        cov_abs_diff: diff,
    })
}

/// Central moment of order `p` of the Gaussian expansion truncated at `m`
/// modes, per node: zero for odd `p`, `Var_M` for `p = 2`, `3 Var_M^2` for `p = 4`.
pub fn truncated_moments(basis: &KLBasis, m: usize, p: u32) -> Result<Vec<f64>> {
    let m = m.min(basis.n_modes());
    let var: Vec<f64> = (0..basis.mesh.len())
        .map(|i| (0..m).map(|k| basis.eigvals[k] * basis.eigvecs[(i, k)].powi(2)).sum())
        .collect();
    match p {
        1 | 3 => Ok(vec![0.0; var.len()]),
        2 => Ok(var),
        4 => Ok(var.into_iter().map(|v| 3.0 * v * v).collect()),
        _ => Err(Error::Domain(format!("moment order {p}"))),
    }
}

/// Correlation of a spectral kernel at lag `tau`.
pub fn spectral_correlation(kernel: &CovKernel, tau: f64) -> Result<f64> {
    match kernel {
        CovKernel::SpectralSdof { .. } => kernel.correlation(tau),
        _ => Err(Error::Domain("not a spectral kernel".into())),
    }
}

/// Covariance of `U(x) = int_0^x G` given the correlation matrix of `G`,
/// by double cumulative trapezoid.
pub fn integrated_covariance(mesh: Mesh1D, r: &DMatrix<f64>) -> DMatrix<f64> {
    let c = mesh.cumulative_trapezoid();
    &c * r * c.transpose()
}
