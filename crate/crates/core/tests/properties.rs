//! Randomized invariants of every module.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use sipkit_core::contour::*;
use sipkit_core::density::*;
use sipkit_core::fields::*;
use sipkit_core::grid::{Grid1D, Grid2D, Interval, Rect};
use sipkit_core::inference::*;
use sipkit_core::maxent::*;
use sipkit_core::product::*;
use sipkit_core::sampling::{rejection_sample_2d, rng, uniform_unit_square};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

fn random_pdf_1d(seed: u64, n: usize) -> GriddedPdf1D {
    let mut r = rng(seed);
    let g = Grid1D::new(0.0, 1.0, n).unwrap();
    GriddedPdf1D::new(g, (0..n).map(|_| r.random::<f64>() + 0.01).collect()).unwrap().normalize().unwrap()
}

// density_core

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn normalized_pdfs_integrate_to_one(seed in any::<u64>(), n in 2usize..300, lo in -5.0f64..5.0, w in 0.1f64..10.0) {
        let mut r = rng(seed);
        let g = Grid1D::new(lo, lo + w, n).unwrap();
        let p = GriddedPdf1D::new(g, (0..n).map(|_| r.random::<f64>() * 5.0 + 1e-3).collect()).unwrap().normalize().unwrap();
        prop_assert!((p.integrate(Interval::new(lo, lo + w)).unwrap() - 1.0).abs() < 1e-8);
        let g2 = Grid2D::new(Grid1D::new(lo, lo + w, n.min(40)).unwrap(), Grid1D::new(0.0, 1.0, 17).unwrap());
        let p2 = GriddedPdf2D::new(g2, (0..g2.len()).map(|_| r.random::<f64>() + 1e-3).collect()).unwrap().normalize().unwrap();
        prop_assert!((p2.integrate(g2.support()).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn distances_are_metrics(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (p, q, s) = (random_pdf_1d(a, 64), random_pdf_1d(b, 64), random_pdf_1d(c, 64));
        for d in [l1_distance, sup_distance] {
            prop_assert_eq!(d(&p, &q).unwrap(), d(&q, &p).unwrap());
            prop_assert_eq!(d(&p, &p).unwrap(), 0.0);
            prop_assert!(d(&p, &s).unwrap() <= d(&p, &q).unwrap() + d(&q, &s).unwrap() + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(cases(6))]

    #[test]
    fn rejection_frequencies_match_box_masses(seed in any::<u64>(), x0 in 0.0f64..0.6, y0 in 0.0f64..0.6, wx in 0.1f64..0.4, wy in 0.1f64..0.4) {
        let g = Grid2D::unit_square(50).unwrap();
        let p = GriddedPdf2D::from_fn(g, |x, y| 1.0 + x * x + (3.0 * y).sin()).unwrap().normalize().unwrap();
        let n = 100_000;
        let s = rejection_sample_2d(&p, n, seed).unwrap();
        let r = Rect::new(x0, x0 + wx, y0, y0 + wy);
        let err = (s.frequency_in(&r) - p.integrate(r).unwrap()).abs();
        prop_assert!(err <= 4.0 / (n as f64).sqrt(), "{}", err);
    }

    #[test]
    fn identical_seeds_give_identical_samples(seed in any::<u64>()) {
        let p = GriddedPdf2D::from_fn(Grid2D::unit_square(10).unwrap(), |x, y| 1.0 + x * y).unwrap();
        prop_assert_eq!(rejection_sample_2d(&p, 100, seed).unwrap(), rejection_sample_2d(&p, 100, seed).unwrap());
        prop_assert_eq!(uniform_unit_square(100, seed), uniform_unit_square(100, seed));
        prop_assert_eq!(true_product_samples(100, seed), true_product_samples(100, seed));
    }
}

#[test]
fn histograms_converge_to_bounded_densities() {
    let law = Law::Beta { a: 2.0, b: 3.0 };
    let z = sample_independent(&law, &Law::Uniform, 1_000_000, 17);
    let x: Vec<f64> = z.points().map(|p| p[0]).collect();
    let g = Grid1D::new(0.0, 1.0, 100).unwrap();
    let h = histogram_to_pdf(&sipkit_core::SampleSet::from_scalars(x, 17).unwrap(), g).unwrap();
    let exact = GriddedPdf1D::from_cdf(g, |x| law.cdf(x)).unwrap();
    assert!(l1_distance(&h, &exact).unwrap() <= 0.05);
}

// product_model

proptest! {
    #![proptest_config(cases(6))]

    #[test]
    fn sampled_pushforwards_match_quadrature(a1 in 1.0f64..4.0, b1 in 1.0f64..4.0, a2 in 1.0f64..4.0, b2 in 1.0f64..4.0, seed in any::<u64>()) {
        let (m1, m2) = (Law::Beta { a: a1, b: b1 }, Law::Beta { a: a2, b: b2 });
        let prod = GriddedPdf2D::from_fn(Grid2D::unit_square(200).unwrap(), |x, y| m1.pdf(x) * m2.pdf(y)).unwrap().normalize().unwrap();
        let z = rejection_sample_2d(&prod, 100_000, seed).unwrap();
        let pg = product_grid(100).unwrap();
        let hp = histogram_to_pdf(&forward_sample(ForwardMap::Product, &z).unwrap(), Grid1D::new(0.0, 1.0, 100).unwrap()).unwrap();
        let qp = propagate_product_pdf(&m1, &m2, pg).unwrap();
        let qp = GriddedPdf1D::new(hp.grid(), qp.values().to_vec()).unwrap();
        prop_assert!(l1_distance(&hp, &qp).unwrap() <= 0.05);
        let sg = Grid1D::new(0.0, 2.0, 100).unwrap();
        let hs = histogram_to_pdf(&forward_sample(ForwardMap::Sum, &z).unwrap(), sg).unwrap();
        prop_assert!(l1_distance(&hs, &propagate_sum_pdf(&m1, &m2, sg).unwrap()).unwrap() <= 0.05);
    }

    #[test]
    fn symmetric_sum_pdfs_are_symmetric(a in 0.6f64..5.0) {
        let m = Law::Beta { a, b: a };
        let p = propagate_sum_pdf(&m, &m, Grid1D::new(0.0, 2.0, 200).unwrap()).unwrap();
        let v = p.values();
        for i in 0..100 {
            prop_assert!((v[i] - v[199 - i]).abs() <= 1e-8 * v[i].max(1.0));
        }
    }

    #[test]
    fn raw_pushforwards_have_unit_mass(a1 in 1.5f64..4.0, b1 in 1.5f64..4.0, a2 in 1.5f64..4.0, b2 in 1.5f64..4.0) {
        let (m1, m2) = (Law::Beta { a: a1, b: b1 }, Law::Beta { a: a2, b: b2 });
        prop_assert!((product_cdf(&m1, &m2, 1.0).unwrap() - 1.0).abs() <= 1e-6);
        let n = 2000;
        let h = 2.0 / n as f64;
        let mass: f64 = (0..n).map(|i| sum_density(&m1, &m2, (i as f64 + 0.5) * h).unwrap()).sum::<f64>() * h;
        prop_assert!((mass - 1.0).abs() <= 1e-6, "{}", mass);
    }
}

// contour_disintegration

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn contour_points_are_exact(x_l in 1e-3f64..1.414, t in 0.0f64..1.0) {
        let c = ContourCurve::new(x_l).unwrap();
        let (lo, hi) = c.z1_range();
        let z1 = lo + (hi - lo) * t;
        prop_assert!((z1 * c.z2(z1) - x_l * x_l / 2.0).abs() <= 1e-14);
    }
}

proptest! {
    #![proptest_config(cases(4))]

    #[test]
    fn box_partitions_carry_unit_mass(nx in 1usize..5, ny in 1usize..5, cut in 0.2f64..0.8) {
        let xs: Vec<f64> = (0..=nx).map(|i| (i as f64 / nx as f64).powf(cut + 0.5)).collect();
        let ys: Vec<f64> = (0..=ny).map(|j| j as f64 / ny as f64).collect();
        let mut total = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                total += cell_probability(&Rect::new(xs[i], xs[i + 1], ys[j], ys[j + 1]), transverse_pdf, &ConditionalRule::Ansatz).unwrap();
            }
        }
        prop_assert!((total - 1.0).abs() <= 1e-3, "{}", total);
    }
}

#[test]
fn band_conditionals_reproduce_true_quadrant_masses() {
    let uniform = |_: f64, _: f64| 1.0;
    let band = ConditionalRule::Empirical { f_z: &uniform, eps: DEFAULT_EPS, n_segments: DEFAULT_SEGMENTS };
    for a in Rect::unit_quadrants() {
        let exact = cell_probability(&a, transverse_pdf, &ConditionalRule::Disintegrated(&uniform)).unwrap();
        let est = cell_probability(&a, transverse_pdf, &band).unwrap();
        assert!((est - exact).abs() <= 5e-3, "{a:?}: {est} vs {exact}");
    }
}

#[test]
fn transverse_pdf_has_unit_mass() {
    let n = 200_000;
    let h = std::f64::consts::SQRT_2 / n as f64;
    let m: f64 = (0..n).map(|i| transverse_pdf((i as f64 + 0.5) * h).unwrap()).sum::<f64>() * h;
    assert!((m - 1.0).abs() < 1e-6);
}

// maxent

proptest! {
    #![proptest_config(cases(256))]

    #[test]
    fn mu_is_increasing(l in -60.0f64..60.0, d in 1e-6f64..1.0) {
        prop_assert!(mu_from_lambda(l + d) > mu_from_lambda(l));
    }

    #[test]
    fn lambda_mu_round_trip(l in -30.0f64..30.0) {
        prop_assert!((lambda_from_mu(mu_from_lambda(l), 1e-13).unwrap() - l).abs() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(cases(4))]

    #[test]
    fn solver_matches_closed_form_and_beats_uniform(mu1 in 0.15f64..0.85, mu2 in 0.15f64..0.85) {
        let model = MaxEntModel::new(Grid2D::unit_square(200).unwrap(), vec![Monomial::Z1, Monomial::Z2], vec![mu1, mu2]).unwrap();
        let s = solve_multipliers(&model, 1e-10).unwrap();
        prop_assert!(s.residuals().iter().all(|r| r.abs() <= 1e-10));
        let solved = s.density().unwrap();
        let closed = maxent_pdf_independent(mu1, mu2, model.domain).unwrap().pdf;
        let worst = solved.values().iter().zip(closed.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(worst <= 1e-6, "{}", worst);
        // uniform on a box [0, 2 mu1] x [0, 2 mu2] meets the constraints when it fits
        if mu1 <= 0.5 && mu2 <= 0.5 {
            let (a, b) = (2.0 * mu1, 2.0 * mu2);
            prop_assert!(entropy(&solved) >= (a * b).ln() - 1e-3);
        }
    }
}

// inference

fn small_table() -> &'static PushforwardTable {
    static T: std::sync::OnceLock<PushforwardTable> = std::sync::OnceLock::new();
    T.get_or_init(|| PushforwardTable::build(Family::MaxEntMeans, maxent_prior_grid(15).unwrap()))
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn posterior_ignores_prior_scale(seed in 0u64..1000, c in 1e-6f64..1e6) {
        let s = true_product_samples(50, seed);
        let prior = |a: f64, b: f64| 1.0 + a - b * b;
        let p = posterior_from_table(small_table(), prior, &s).unwrap();
        let q = posterior_from_table(small_table(), |a, b| c * prior(a, b), &s).unwrap();
        prop_assert_eq!(p.map_index, q.map_index);
        for (x, y) in p.weights().iter().zip(q.weights()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let w: f64 = p.weights().iter().sum();
        prop_assert!((w - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn predictive_has_unit_mass(seed in 0u64..1000) {
        let p = posterior_from_table(small_table(), |_, _| 1.0, &true_product_samples(100, seed)).unwrap();
        let f = posterior_predictive(&p, Family::MaxEntMeans, ForwardMap::Sum, Grid1D::new(0.0, 2.0, 100).unwrap()).unwrap();
        prop_assert!((f.mass() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn reparameterization_preserves_box_masses(seed in 0u64..1000, i0 in 0usize..10, j0 in 0usize..10, di in 1usize..5, dj in 1usize..5) {
        let g = Grid1D::new(1.0 / 3.0, 3.0, 15).unwrap();
        let grid = Family::BetaOneNu.param_grid(g, g);
        let mut r = rng(seed);
        let loglik: Vec<f64> = (0..grid.len()).map(|_| -3.0 * r.random::<f64>()).collect();
        let post = ParamPosterior::from_parts(grid, vec![1.0; 225], loglik, 0, seed).unwrap();
        let mu = reparameterize(&post, [Bijection::nu_to_mu(); 2], ["mu1", "mu2"]).unwrap();
        let [ax, ay] = mu.grid.axes();
        let (i1, j1) = ((i0 + di).min(15), (j0 + dj).min(15));
        let boxed = Rect::new(ax.edge(i0), ax.edge(i1), ay.edge(j0), ay.edge(j1));
        let f = Bijection::nu_to_mu().inverse;
        let pre = Rect::new(f(boxed.x1), f(boxed.x0), f(boxed.y1), f(boxed.y0));
        prop_assert!((mu.mass_in(boxed).unwrap() - post.mass_in(pre).unwrap()).abs() <= 1e-3);
    }
}

// The maxent and Beta(1, nu) families only identify a ridge in parameter
// space, along which extra samples may spread the posterior; the symmetric
// Beta family is identified and concentrates.
#[test]
fn more_samples_concentrate_the_posterior() {
    let g = Grid1D::new(0.2, 3.0, 15).unwrap();
    let table = PushforwardTable::build(Family::SymmetricBeta, Family::SymmetricBeta.param_grid(g, g));
    for seed in 0..10 {
        let s = true_product_samples(400, seed);
        let small = posterior_from_table(&table, |_, _| 1.0, &s.head(100)).unwrap();
        let large = posterior_from_table(&table, |_, _| 1.0, &s).unwrap();
        assert!(large.covariance_trace() < small.covariance_trace(), "seed {seed}");
    }
}

#[test]
fn data_consistent_update_is_idempotent() {
    let obs = pdf_product_uniform(product_grid(500).unwrap()).unwrap();
    let prior = GriddedPdf2D::uniform_unit_square(100).unwrap();
    let once = data_consistent_update(&prior, &obs, ForwardMap::Product).unwrap();
    let twice = data_consistent_update(&once, &obs, ForwardMap::Product).unwrap();
    let l1: f64 = once.values().iter().zip(twice.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() * prior.grid().cell_area();
    assert!(l1 < 0.02, "{l1}");
}

// random_fields

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn kl_spectral_identity(ell in 0.01f64..0.5, n in 21usize..121) {
        let mesh = Mesh1D::new(n).unwrap();
        let c = CovKernel::matern52(ell).matrix(mesh).unwrap();
        let b = kl_decompose_covariance(mesh, &c, n).unwrap();
        let w = mesh.weights();
        let trace: f64 = (0..n).map(|i| w[i] * c[(i, i)]).sum();
        prop_assert!((b.eigvals.iter().sum::<f64>() - trace).abs() <= 1e-8);
        prop_assert!((b.covariance(n) - &c).abs().max() <= 1e-8);
        prop_assert!(b.eigvals.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn projection_contracts_variance(seed in any::<u64>(), m in 1usize..8) {
        let mesh = Mesh1D::new(11).unwrap();
        let mut r = rng(seed);
        let y: DMatrix<f64> = DMatrix::from_fn(400, m, |_, _| StandardNormal.sample(&mut r));
        let t = DMatrix::from_fn(400, 11, |i, j| (y[(i, 0)] as f64 * j as f64).cos() + r.random::<f64>());
        let target = FieldEnsemble::new(mesh, t, seed).unwrap();
        let fit = field_least_squares(&target, &y).unwrap();
        for (f, v) in fit.fitted.variance().iter().zip(target.variance().iter()) {
            prop_assert!(*f <= v + 1e-10);
        }
    }

    #[test]
    fn ode_solves_commute_with_the_mean(seed in any::<u64>()) {
        let mesh = Mesh1D::new(51).unwrap();
        let mut r = rng(seed);
        let a = FieldEnsemble::new(mesh, DMatrix::from_fn(30, 51, |_, _| 1.0 + 5.0 * r.random::<f64>()), seed).unwrap();
        let one = |v: nalgebra::DVector<f64>| FieldEnsemble::new(mesh, DMatrix::from_row_slice(1, 51, v.as_slice()), seed).unwrap();
        let mean_of_solves = solve_ode_integral(&a).unwrap().mean();
        let solve_of_mean = solve_ode_integral(&one(a.mean())).unwrap().samples.row(0).transpose();
        prop_assert!((mean_of_solves - solve_of_mean).abs().max() <= 1e-12);
        // the reciprocal solve is linear in 1 / A
        let harmonic = one(a.samples.map(|v| 1.0 / v).row_mean().transpose().map(|v| 1.0 / v));
        let mean_of_solves = solve_ode_reciprocal(&a).unwrap().mean();
        let solve_of_mean = solve_ode_reciprocal(&harmonic).unwrap().samples.row(0).transpose();
        prop_assert!((mean_of_solves - solve_of_mean).abs().max() <= 1e-12);
    }
}

#[test]
fn scores_are_whitened() {
    let mesh = Mesh1D::default();
    let e = sample_gp(&CovKernel::matern52(0.1), mesh, 10_000, 5).unwrap();
    let b = kl_decompose(&e, 10).unwrap();
    let n = e.n_samples() as f64;
    let y = &b.scores;
    for k in 0..10 {
        let col = y.column(k);
        let mean = col.mean();
        assert!(mean.abs() <= 3.0 / n.sqrt());
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() <= 0.05);
        for j in 0..k {
            let c = col.iter().zip(y.column(j).iter()).map(|(a, b)| a * b).sum::<f64>() / n;
            assert!(c.abs() <= 0.05, "{k},{j}: {c}");
        }
    }
}

#[test]
fn eigen_decay_ordering_on_every_mesh() {
    for n in [101, 201, 401] {
        let mesh = Mesh1D::new(n).unwrap();
        let rg = CovKernel::spectral_sdof(20.0, 0.1).unwrap().matrix(mesh).unwrap();
        let ru = integrated_covariance(mesh, &rg);
        let mg = truncation_level(&kl_decompose_covariance(mesh, &rg, n).unwrap().eigvals, 0.95);
        let mu = truncation_level(&kl_decompose_covariance(mesh, &ru, n).unwrap().eigvals, 0.95);
        assert!(mu < mg, "{n}: {mu} vs {mg}");
    }
}

#[test]
fn gaussian_moment_identities() {
    let mesh = Mesh1D::default();
    let b = kl_decompose_covariance(mesh, &CovKernel::matern52(0.03).matrix(mesh).unwrap(), 60).unwrap();
    for m in [1, 6, 30, 60] {
        let (v, m3, m4) = (truncated_moments(&b, m, 2).unwrap(), truncated_moments(&b, m, 3).unwrap(), truncated_moments(&b, m, 4).unwrap());
        assert!(m3.iter().all(|x| *x == 0.0));
        assert!(v.iter().zip(&m4).all(|(v, q)| (q - 3.0 * v * v).abs() <= 1e-13));
    }
}
