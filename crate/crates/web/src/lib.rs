//! Browser bindings: three cheap operations on the unit-square benchmark.

use sipkit_core::contour::{
    ansatz_conditional, cell_probability, empirical_contour_pdf, nonlebesgue_recovery_test, transverse_pdf, ConditionalRule, ContourCurve,
    DEFAULT_EPS,
};
use sipkit_core::{Rect, Result};
use wasm_bindgen::prelude::*;

/// Ansatz probability of `[x0, x1] x [y0, y1]`.
pub fn ansatz_box_probability(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<f64> {
    cell_probability(&Rect::new(x0, x1, y0, y1), transverse_pdf, &ConditionalRule::Ansatz)
}

/// Band estimate of the uniform law's conditional along contour `x_l` at
/// both contour ends and the segment midpoints, interleaved as `[x_C0, f0, x_C1, f1, ...]`.
pub fn band_conditional(x_l: f64, segments: usize) -> Result<Vec<f64>> {
    let p = empirical_contour_pdf(x_l, DEFAULT_EPS, segments, &|_: f64, _: f64| 1.0)?;
    Ok(p.arc_nodes().into_iter().zip(p.values()).flat_map(|(s, v)| [s, v]).collect())
}

/// Constant ansatz density along contour `x_l`.
pub fn ansatz_level(x_l: f64) -> Result<f64> {
    ansatz_conditional(&ContourCurve::new(x_l)?)
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = boxProbability)]
pub fn box_probability_js(x0: f64, x1: f64, y0: f64, y1: f64) -> std::result::Result<f64, JsError> {
    js(ansatz_box_probability(x0, x1, y0, y1))
}

#[wasm_bindgen(js_name = bandConditional)]
pub fn band_conditional_js(x_l: f64, segments: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(band_conditional(x_l, segments))
}

/// Coefficient of variation of the Beta/uniform conditional ratio along `x_l`.
#[wasm_bindgen(js_name = betaRatioCv)]
pub fn beta_ratio_cv_js(nu1: f64, nu2: f64, tau1: f64, tau2: f64, x_l: f64) -> std::result::Result<f64, JsError> {
    js(nonlebesgue_recovery_test((nu1, nu2, tau1, tau2), x_l))
}

#[wasm_bindgen(js_name = ansatzLevel)]
pub fn ansatz_level_js(x_l: f64) -> std::result::Result<f64, JsError> {
    js(ansatz_level(x_l))
}
