//! Adaptive Simpson quadrature.
//!
//! `quad_1d` is used for every one-dimensional integral in the crate: arc
//! lengths, transverse integrals, pushforward densities and the spectral
//! correlation. Integrands with integrable endpoint singularities go through
//! [`quad_1d_endpoint_singular`], a tanh-sinh rule that never evaluates the
//! endpoints.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 48;
const INITIAL_PANELS: usize = 4;

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Returns [`Error::MaxDepthExceeded`] carrying the partial estimate if some
/// subinterval fails to converge before the depth limit.
pub fn quad_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain(format!("quadrature limits [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut ok = true;
    let w = (b - a) / INITIAL_PANELS as f64;
    let ptol = tol / INITIAL_PANELS as f64;
    for k in 0..INITIAL_PANELS {
        let lo = a + k as f64 * w;
        let hi = if k + 1 == INITIAL_PANELS { b } else { lo + w };
        let (v, converged) = panel(&f, lo, hi, ptol);
        total += v;
        ok &= converged;
    }
    if ok {
        Ok(total)
    } else {
        Err(Error::MaxDepthExceeded { partial: total })
    }
}

/// Like [`quad_1d`], treating the sorted `breaks` as mandatory panel boundaries.
///
/// Breakpoints outside `(a, b)` are ignored. The tolerance is shared between
/// panels in proportion to their width.
pub fn quad_1d_breaks<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner);
    pts.push(b);
    let span = b - a;
    let mut total = 0.0;
    let mut failed = false;
    for w in pts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let t = if span > 0.0 { tol * (w[1] - w[0]) / span } else { tol };
        match quad_1d(&f, w[0], w[1], t) {
            Ok(v) => total += v,
            Err(Error::MaxDepthExceeded { partial }) => {
                total += partial;
                failed = true;
            }
            Err(e) => return Err(e),
        }
    }
    if failed {
        Err(Error::MaxDepthExceeded { partial: total })
    } else {
        Ok(total)
    }
}

/// Integrate an integrand that may blow up (integrably) at either endpoint.
///
/// Tanh-sinh quadrature: `x = a + (b - a) / (1 + exp(-pi sinh t))` with the
/// step halved until two successive levels agree to `tol`. The weights decay
/// double exponentially towards the ends, so algebraic and logarithmic
/// endpoint singularities are handled without special treatment and the
/// endpoints themselves are never evaluated. Non-finite integrand values are
/// treated as zero.
pub fn quad_1d_endpoint_singular<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    quad_1d_endpoint_singular_c(|x, _| f(x), a, b, tol)
}

/// [`quad_1d_endpoint_singular`] for integrands `f(x, b - x)` that need the
/// distance to the upper limit without cancellation, e.g. `(1 - x)^(-s)` near `x = 1`.
pub fn quad_1d_endpoint_singular_c<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain(format!("quadrature limits [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let len = b - a;
    let g = |t: f64| -> f64 {
        let u = PI * t.sinh();
        let e = (-u.abs()).exp();
        // distance to the nearer endpoint, computed without cancellation
        let near = len * e / (1.0 + e);
        let (x, to_b) = if u < 0.0 { (a + near, len - near) } else { (b - near, near) };
        if near == 0.0 || to_b <= 0.0 || x <= a {
            return 0.0;
        }
        let w = len * PI * t.cosh() * e / ((1.0 + e) * (1.0 + e));
        let v = f(x, to_b) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut h = 0.5;
    let mut sum = g(0.0) + sweep(&g, h, 1, 1);
    let mut estimate = sum * h;
    for _ in 0..TS_LEVELS {
        h *= 0.5;
        sum += sweep(&g, h, 1, 2);
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= tol.max(4.0 * f64::EPSILON * next.abs()) {
            return Ok(next);
        }
    }
    Err(Error::MaxDepthExceeded { partial: estimate })
}

const TS_LEVELS: usize = 12;
const TS_TMAX: f64 = 6.5;

/// Sum of `g(+-k h)` for `k = first, first + step, ...` while `k h <= TS_TMAX`.
fn sweep<G: Fn(f64) -> f64>(g: &G, h: f64, first: usize, step: usize) -> f64 {
    let mut s = 0.0;
    let mut k = first;
    loop {
        let t = k as f64 * h;
        if t > TS_TMAX {
            break;
        }
        s += g(t) + g(-t);
        k += step;
    }
    s
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> (f64, bool) {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> (f64, bool) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let both = left + right;
    let diff = both - whole;
    if !diff.is_finite() {
        return (both, false);
    }
    let floor = 4.0 * f64::EPSILON * both.abs();
    if diff.abs() <= 15.0 * tol.max(floor) || (m - a) <= f64::EPSILON * a.abs().max(1.0) {
        return (both + diff / 15.0, true);
    }
    if depth >= MAX_DEPTH {
        return (both + diff / 15.0, false);
    }
    let (l, lok) = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1);
    let (r, rok) = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
    (l + r, lok && rok)
}

/// Midpoint rule with `n` panels; used as a brute-force oracle.
pub fn midpoint<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.0;
    let mut c = 0.0;
    for i in 0..n {
        // Kahan summation keeps 10^6-panel oracles accurate to ~1e-14.
        let y = f(a + (i as f64 + 0.5) * h) - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial() {
        let v = quad_1d(|x| x * x, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn arc_length_integrand_matches_midpoint_oracle() {
        let xl: f64 = 0.2;
        let c = xl.powi(4) / 4.0;
        let f = |z: f64| (1.0 + c / z.powi(4)).sqrt();
        let lo = xl * xl / 2.0;
        let v = quad_1d(f, lo, 1.0, 1e-10).unwrap();
        let oracle = midpoint(f, lo, 1.0, 1_000_000);
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn truncated_log_integral() {
        let q: f64 = 1e-6;
        let v = quad_1d(|x| -x.ln(), q, 1.0, 1e-12).unwrap();
        let exact = 1.0 - (q - q * q.ln());
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn empty_interval_and_bad_limits() {
        assert_eq!(quad_1d(|x| x, 0.3, 0.3, 1e-8).unwrap(), 0.0);
        assert!(quad_1d(|x| x, 1.0, 0.0, 1e-8).is_err());
    }

    #[test]
    fn non_integrable_reports_depth_exceeded() {
        match quad_1d(|x: f64| 1.0 / (x - 0.5).abs(), 0.0, 1.0, 1e-10) {
            Err(Error::MaxDepthExceeded { partial }) => assert!(partial > 0.0),
            other => panic!("expected depth failure, got {other:?}"),
        }
    }

    #[test]
    fn endpoint_singular_beta_kernel() {
        // int_0^1 x^{-1/2} (1-x)^{-1/2} dx = pi
        let v = quad_1d_endpoint_singular(|x: f64| 1.0 / (x * (1.0 - x)).sqrt(), 0.0, 1.0, 1e-9).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-7, "{v}");
    }

    #[test]
    fn breaks_split_panels() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let v = quad_1d_breaks(f, 0.0, 1.0, &[0.3], 1e-12).unwrap();
        assert!((v - 1.7).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singular_log_and_beta() {
        let v = quad_1d_endpoint_singular(|x: f64| -x.ln(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
        // Beta(0.3, 0.7) density integrates to one
        let norm = statrs::function::beta::beta(0.3, 0.7);
        let v = quad_1d_endpoint_singular(|x: f64| x.powf(-0.7) * (1.0 - x).powf(-0.3) / norm, 0.0, 1.0, 1e-9).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }
}
