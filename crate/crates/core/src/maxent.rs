//! Maximum-entropy densities under moment constraints.
//!
//! With first-moment constraints on independent coordinates of the unit
//! square the solution factorises into truncated exponentials, each fixed by
//! the bijection `mu(lambda) = 1/(1 - e^{-lambda}) - 1/lambda`. The general
//! solver minimises the convex dual on a grid by damped Newton.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::density::GriddedPdf2D;
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::product::{maxent_marginal_pdf, Law};

const SERIES_CUTOFF: f64 = 1e-4;

/// Mean of the truncated exponential `lambda e^{lambda z} / (e^lambda - 1)` on `[0, 1]`.
pub fn mu_from_lambda(lambda: f64) -> f64 {
    if lambda.abs() < SERIES_CUTOFF {
        let l2 = lambda * lambda;
        0.5 + lambda / 12.0 - lambda * l2 / 720.0 + lambda * l2 * l2 / 30240.0
    } else {
        -1.0 / (-lambda).exp_m1() - 1.0 / lambda
    }
}

/// Inverse of [`mu_from_lambda`] by safeguarded Newton on a bracket.
pub fn lambda_from_mu(mu: f64, tol: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::OutOfRange(mu));
    }
    // mu ~ 1 - 1/lambda for large lambda, mu ~ -1/lambda for very negative lambda
    let (mut lo, mut hi) = (-1.0, 1.0);
    while mu_from_lambda(lo) > mu {
        lo *= 2.0;
    }
    while mu_from_lambda(hi) < mu {
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = mu_from_lambda(x) - mu;
        if r.abs() <= tol {
            return Ok(x);
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = mu_slope(x);
        let newton = x - r / slope;
        x = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// `d mu / d lambda`, the variance of the truncated exponential.
fn mu_slope(lambda: f64) -> f64 {
    if lambda.abs() < 1e-3 {
        1.0 / 12.0 - lambda * lambda / 240.0
    } else {
        let s = (0.5 * lambda).sinh();
        1.0 / (lambda * lambda) - 1.0 / (4.0 * s * s)
    }
}

/// Product exponential density on the unit square with marginal means `(mu1, mu2)`.
pub struct IndependentMaxEnt {
    pub lambdas: [f64; 2],
    pub marginals: [Law; 2],
    pub pdf: GriddedPdf2D,
}

/// Closed-form maximum-entropy density for independent first-moment constraints.
pub fn maxent_pdf_independent(mu1: f64, mu2: f64, grid: Grid2D) -> Result<IndependentMaxEnt> {
    let l1 = lambda_from_mu(mu1, 1e-13)?;
    let l2 = lambda_from_mu(mu2, 1e-13)?;
    let pdf = GriddedPdf2D::from_fn(grid, |x, y| maxent_marginal_pdf(l1, x) * maxent_marginal_pdf(l2, y))?;
    Ok(IndependentMaxEnt {
        lambdas: [l1, l2],
        marginals: [Law::MaxEnt { lambda: l1 }, Law::MaxEnt { lambda: l2 }],
        pdf,
    })
}

/// Constraint function `z1^p1 z2^p2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    pub p1: u32,
    pub p2: u32,
}

impl Monomial {
    pub const Z1: Monomial = Monomial { p1: 1, p2: 0 };
    pub const Z2: Monomial = Monomial { p1: 0, p2: 1 };

    pub fn eval(&self, z1: f64, z2: f64) -> f64 {
        z1.powi(self.p1 as i32) * z2.powi(self.p2 as i32)
    }

    pub fn name(&self) -> String {
        let part = |v: &str, p: u32| match p {
            0 => String::new(),
            1 => v.to_string(),
            _ => format!("{v}^{p}"),
        };
        let s = [part("z1", self.p1), part("z2", self.p2)].into_iter().filter(|s| !s.is_empty()).collect::<Vec<_>>().join("*");
        if s.is_empty() {
            "1".into()
        } else {
            s
        }
    }
}

/// Moment-constrained exponential family on a gridded domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntModel {
    pub domain: Grid2D,
    pub constraints: Vec<Monomial>,
    pub targets: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub tol: f64,
}

/// JSON layout of a solved model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxEntRecord {
    pub constraint_names: Vec<String>,
    pub targets: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub tol: f64,
    pub domain: Grid2D,
}

impl MaxEntModel {
    pub fn new(domain: Grid2D, constraints: Vec<Monomial>, targets: Vec<f64>) -> Result<Self> {
        if constraints.len() != targets.len() {
            return Err(Error::DimensionMismatch { expected: constraints.len(), got: targets.len() });
        }
        let n = constraints.len();
        Ok(Self { domain, constraints, targets, lambdas: vec![0.0; n], tol: 0.0 })
    }

    /// Default 400 x 400 grid on the unit square.
    pub fn on_unit_square(constraints: Vec<Monomial>, targets: Vec<f64>) -> Result<Self> {
        Self::new(Grid2D::unit_square(400)?, constraints, targets)
    }

    fn quadrature(&self) -> Quadrature {
        Quadrature::new(self.domain, &self.constraints)
    }

    /// The density `exp(sum lambda_k g_k) / Z` at the cell centres.
    ///
    /// `Z` is the Gauss-Legendre partition function, so the values are the
    /// exact continuous density; their midpoint mass differs from one by
    /// `O(h^2)`.
    pub fn density(&self) -> Result<GriddedPdf2D> {
        let log_z = self.quadrature().log_partition(&self.lambdas);
        let lam = &self.lambdas;
        let cs = &self.constraints;
        GriddedPdf2D::from_fn(self.domain, |x, y| {
            let e: f64 = cs.iter().zip(lam).map(|(g, l)| l * g.eval(x, y)).sum();
            (e - log_z).exp()
        })
    }

    /// Moment residuals `E[g_k] - mu_k` of the current multipliers.
    pub fn residuals(&self) -> Vec<f64> {
        let (m, _) = self.quadrature().moments(&self.lambdas);
        m.iter().zip(&self.targets).map(|(a, b)| a - b).collect()
    }

    pub fn record(&self) -> MaxEntRecord {
        MaxEntRecord {
            constraint_names: self.constraints.iter().map(Monomial::name).collect(),
            targets: self.targets.clone(),
            lambdas: self.lambdas.clone(),
            tol: self.tol,
            domain: self.domain,
        }
    }
}

/// Tensor 3-point Gauss-Legendre rule on every grid cell, with the
/// constraint functions tabulated at the quadrature points.
struct Quadrature {
    g: Vec<Vec<f64>>,
    w: Vec<f64>,
}

impl Quadrature {
    fn new(domain: Grid2D, constraints: &[Monomial]) -> Self {
        let r = (0.6f64).sqrt();
        let pts = [(-r, 5.0 / 9.0), (0.0, 8.0 / 9.0), (r, 5.0 / 9.0)];
        let (gx, gy) = (domain.gx, domain.gy);
        let (hx, hy) = (gx.h(), gy.h());
        let axis = |grid: crate::grid::Grid1D, h: f64| -> Vec<(f64, f64)> {
            grid.nodes().into_iter().flat_map(|c| pts.iter().map(move |&(t, w)| (c + 0.5 * h * t, 0.5 * h * w))).collect()
        };
        let xs = axis(gx, hx);
        let ys = axis(gy, hy);
        let mut w = Vec::with_capacity(xs.len() * ys.len());
        let mut g = vec![Vec::with_capacity(xs.len() * ys.len()); constraints.len()];
        for &(x, wx) in &xs {
            for &(y, wy) in &ys {
                w.push(wx * wy);
                for (k, c) in constraints.iter().enumerate() {
                    g[k].push(c.eval(x, y));
                }
            }
        }
        Self { g, w }
    }

    fn exponents(&self, lambdas: &[f64]) -> Vec<f64> {
        let mut e = vec![0.0; self.w.len()];
        for (row, &l) in self.g.iter().zip(lambdas) {
            e.iter_mut().zip(row).for_each(|(a, b)| *a += l * b);
        }
        e
    }

    fn log_partition(&self, lambdas: &[f64]) -> f64 {
        let e = self.exponents(lambdas);
        let top = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = e.iter().zip(&self.w).map(|(x, w)| w * (x - top).exp()).sum();
        top + s.ln()
    }

    /// Mean vector and covariance matrix of the constraint functions.
    fn moments(&self, lambdas: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let e = self.exponents(lambdas);
        let top = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = e.iter().zip(&self.w).map(|(x, w)| w * (x - top).exp()).collect();
        let total: f64 = p.iter().sum();
        let n = self.g.len();
        let mean = DVector::from_fn(n, |k, _| self.g[k].iter().zip(&p).map(|(g, p)| g * p).sum::<f64>() / total);
        let mut cov = DMatrix::zeros(n, n);
        for k in 0..n {
            for l in 0..=k {
                let c = self.g[k]
                    .iter()
                    .zip(&self.g[l])
                    .zip(&p)
                    .map(|((a, b), p)| (a - mean[k]) * (b - mean[l]) * p)
                    .sum::<f64>()
                    / total;
                cov[(k, l)] = c;
                cov[(l, k)] = c;
            }
        }
        (mean, cov)
    }

    fn range(&self, k: usize) -> (f64, f64) {
        let row = &self.g[k];
        (row.iter().copied().fold(f64::INFINITY, f64::min), row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Solve for the multipliers matching every target to `tol`.
pub fn solve_multipliers(model: &MaxEntModel, tol: f64) -> Result<MaxEntModel> {
    const MAX_ITER: usize = 200;
    const MAX_HALVINGS: usize = 40;

    let quad = model.quadrature();
    for (k, &mu) in model.targets.iter().enumerate() {
        let (lo, hi) = quad.range(k);
        if !(mu > lo && mu < hi) {
            return Err(Error::Infeasible(format!(
                "target {mu} for {} outside the open range ({lo}, {hi})",
                model.constraints[k].name()
            )));
        }
    }
    let targets = DVector::from_column_slice(&model.targets);
    let dual = |lam: &DVector<f64>| quad.log_partition(lam.as_slice()) - lam.dot(&targets);
    let mut lam = DVector::from_element(targets.len(), 0.0);
    let (mut mean, mut cov) = quad.moments(lam.as_slice());
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let grad = &mean - &targets;
        residual = grad.amax();
        if residual <= tol {
            let mut out = model.clone();
            out.lambdas = lam.as_slice().to_vec();
            out.tol = tol;
            return Ok(out);
        }
        let step = match cov.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => return Err(Error::Infeasible(format!("singular moment covariance at residual {residual:e}"))),
        };
        let f0 = dual(&lam);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &lam - &step * t;
            let (m, c) = quad.moments(trial.as_slice());
            let f = dual(&trial);
            // near the optimum the dual is flat to rounding; fall back on the residual
            let decrease = f <= f0 - 1e-4 * t * slope;
            let flat = (f - f0).abs() <= 1e-13 * f0.abs().max(1.0) && (&m - &targets).amax() < residual;
            if decrease || flat {
                lam = trial;
                mean = m;
                cov = c;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Infeasible(format!("line search stalled at residual {residual:e}")));
        }
    }
    Err(Error::MaxIterations { iterations: MAX_ITER, residual })
}

/// Differential entropy `-int p log p` with `0 log 0 = 0`.
pub fn entropy<P: crate::density::Tabulated>(p: &P) -> f64 {
    let mut s = 0.0;
    for (v, w) in p.cells() {
        if v > 0.0 {
            s -= v * v.ln() * w;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GriddedPdf1D;
    use crate::grid::{Grid1D, Rect};
    use rand::Rng;

    #[test]
    fn mu_closed_form_values() {
        assert_eq!(mu_from_lambda(0.0), 0.5);
        // mu(50) = 0.98 + 1/(e^50 - 1) is 0.98 to working precision
        assert!(mu_from_lambda(50.0) >= 0.98 - 1e-12);
        assert!(mu_from_lambda(60.0) > 0.98);
        let e = std::f64::consts::E;
        assert!((mu_from_lambda(1.0) - (1.0 / (1.0 - 1.0 / e) - 1.0)).abs() < 1e-14);
        assert!((mu_from_lambda(1.0) - 0.5820).abs() < 1e-4);
    }

    #[test]
    fn series_and_direct_branches_agree() {
        for l in [SERIES_CUTOFF, -SERIES_CUTOFF] {
            let direct = -1.0 / (-l).exp_m1() - 1.0 / l;
            let lo = mu_from_lambda(l * (1.0 - 1e-9));
            assert!((direct - lo).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_round_trips() {
        assert!(lambda_from_mu(0.5, 1e-12).unwrap().abs() < 1e-9);
        assert!((lambda_from_mu(mu_from_lambda(2.0), 1e-12).unwrap() - 2.0).abs() < 1e-8);
        let l = lambda_from_mu(0.25, 1e-12).unwrap();
        assert!(l < 0.0 && (mu_from_lambda(l) - 0.25).abs() < 1e-8);
        assert!(matches!(lambda_from_mu(1.0, 1e-9), Err(Error::OutOfRange(_))));
        assert!(matches!(lambda_from_mu(0.0, 1e-9), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn independent_density_properties() {
        let g = Grid2D::unit_square(200).unwrap();
        let m = maxent_pdf_independent(0.5, 0.5, g).unwrap();
        assert!(m.pdf.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let m = maxent_pdf_independent(0.3, 0.7, g).unwrap();
        let [l1, l2] = m.lambdas;
        let f = |x, y| maxent_marginal_pdf(l1, x) * maxent_marginal_pdf(l2, y);
        assert!((f(1.0, 1.0) - f(0.0, 0.0) * (l1 + l2).exp()).abs() < 1e-12 * f(1.0, 1.0));
        let fine = maxent_pdf_independent(0.3, 0.7, Grid2D::unit_square(1000).unwrap()).unwrap();
        assert!((fine.pdf.expectation(|x, _| x) - 0.3).abs() < 1e-6);
        assert!((fine.pdf.expectation(|_, y| y) - 0.7).abs() < 1e-6);
    }

    #[test]
    fn solver_trivial_and_separable() {
        let model = MaxEntModel::new(Grid2D::unit_square(100).unwrap(), vec![Monomial::Z1, Monomial::Z2], vec![0.5, 0.5]).unwrap();
        let s = solve_multipliers(&model, 1e-10).unwrap();
        assert!(s.lambdas.iter().all(|l| l.abs() < 1e-8));

        let model = MaxEntModel::on_unit_square(vec![Monomial::Z1, Monomial::Z2], vec![0.3, 0.7]).unwrap();
        let s = solve_multipliers(&model, 1e-12).unwrap();
        assert!((s.lambdas[0] - lambda_from_mu(0.3, 1e-14).unwrap()).abs() < 1e-6);
        assert!((s.lambdas[1] - lambda_from_mu(0.7, 1e-14).unwrap()).abs() < 1e-6);
        let closed = maxent_pdf_independent(0.3, 0.7, model.domain).unwrap().pdf;
        let solved = s.density().unwrap();
        let worst = solved.values().iter().zip(closed.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn solver_single_constraint_is_constant_in_z2() {
        let model = MaxEntModel::new(Grid2D::unit_square(200).unwrap(), vec![Monomial::Z1], vec![0.6]).unwrap();
        let s = solve_multipliers(&model, 1e-12).unwrap();
        let p = s.density().unwrap();
        for i in 0..200 {
            let row = &p.values()[i * 200..(i + 1) * 200];
            assert!(row.iter().all(|v| (v - row[0]).abs() < 1e-12));
        }
        assert!((s.lambdas[0] - lambda_from_mu(0.6, 1e-14).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn solver_rejects_boundary_targets() {
        let model = MaxEntModel::new(Grid2D::unit_square(10).unwrap(), vec![Monomial::Z1], vec![1.0]).unwrap();
        assert!(matches!(solve_multipliers(&model, 1e-9), Err(Error::Infeasible(_))));
    }

    #[test]
    fn entropy_closed_forms() {
        let u = GriddedPdf2D::uniform_unit_square(50).unwrap();
        assert!(entropy(&u).abs() < 1e-14);
        let small = GriddedPdf2D::from_fn(Grid2D::unit_square(100).unwrap(), |x, y| if x < 0.5 && y < 0.5 { 1.0 } else { 0.0 })
            .unwrap()
            .normalize()
            .unwrap();
        assert!((entropy(&small) + 4f64.ln()).abs() < 1e-12);
        assert!((small.integrate(Rect::new(0.0, 0.5, 0.0, 0.5)).unwrap() - 1.0).abs() < 1e-12);
        let p = GriddedPdf1D::from_fn(Grid1D::new(0.0, 1.0, 10).unwrap(), |_| 1.0).unwrap();
        assert!(entropy(&p).abs() < 1e-14);
    }

    #[test]
    fn maxent_beats_constraint_preserving_perturbations() {
        let grid = Grid2D::unit_square(40).unwrap();
        let model = MaxEntModel::new(grid, vec![Monomial::Z1, Monomial::Z2], vec![0.35, 0.6]).unwrap();
        let p = solve_multipliers(&model, 1e-12).unwrap().density().unwrap().normalize().unwrap();
        let h0 = entropy(&p);
        let xs = grid.gx.nodes();
        let basis: Vec<Vec<f64>> = vec![
            vec![1.0; grid.len()],
            (0..grid.len()).map(|c| xs[c / 40]).collect(),
            (0..grid.len()).map(|c| xs[c % 40]).collect(),
        ];
        let mut rng = crate::sampling::rng(7);
        for _ in 0..20 {
            let mut d: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            // Gram-Schmidt against {1, z1, z2} so mass and both moments are unchanged
            let mut ortho: Vec<Vec<f64>> = Vec::new();
            for b in &basis {
                let mut v = b.clone();
                for o in &ortho {
                    let c = dot(&v, o) / dot(o, o);
                    v.iter_mut().zip(o).for_each(|(x, y)| *x -= c * y);
                }
                ortho.push(v);
            }
            for o in &ortho {
                let c = dot(&d, o) / dot(o, o);
                d.iter_mut().zip(o).for_each(|(x, y)| *x -= c * y);
            }
            let scale = 0.5 * p.values().iter().zip(&d).filter(|(_, e)| **e < 0.0).map(|(v, e)| v / -e).fold(f64::INFINITY, f64::min);
            let q: Vec<f64> = p.values().iter().zip(&d).map(|(v, e)| v + scale * e).collect();
            let q = GriddedPdf2D::new(grid, q).unwrap();
            assert!((q.expectation(|x, _| x) - p.expectation(|x, _| x)).abs() < 1e-10);
            assert!(entropy(&q) < h0);
        }
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn record_names() {
        let m = MaxEntModel::new(Grid2D::unit_square(4).unwrap(), vec![Monomial::Z1, Monomial { p1: 2, p2: 1 }], vec![0.5, 0.1]).unwrap();
        assert_eq!(m.record().constraint_names, vec!["z1".to_string(), "z1^2*z2".to_string()]);
    }
}
