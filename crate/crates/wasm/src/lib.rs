//! Browser bindings for the demo page in `www/`.
//!
//! Results cross the boundary as flat `Float64Array`s with a fixed stride,
//! which keeps the page free of any serialization layer. A missing
//! significance (zero standard error) is encoded as `NaN`.

use clickspace::{
    click_distribution, scan_line, significance_vs_s, DetectorArray, LineGrid, OrderingParam, PhasePoint, Result,
    StateSpec, DEFAULT_TAIL_EPS,
};
use wasm_bindgen::prelude::*;

/// Values per point in the arrays returned by [`scan`] and [`significance_curve`]:
/// coordinate, `P_N`, paper standard error, significance.
pub const STRIDE: usize = 4;

/// `P_N` along `Re alpha in [re_start, re_stop]` at fixed `Im alpha`.
#[allow(clippy::too_many_arguments)]
pub fn scan_rows(
    state: &str,
    n_detectors: usize,
    eta: f64,
    s: f64,
    nu: u64,
    re_start: f64,
    re_stop: f64,
    steps: usize,
    im: f64,
) -> Result<Vec<f64>> {
    let state: StateSpec = state.parse()?;
    let detector = DetectorArray::new(n_detectors, eta)?;
    let grid = LineGrid::new(re_start, re_stop, steps)?;
    let rows = scan_line(&state, detector, OrderingParam::new(s)?, nu, grid, im, DEFAULT_TAIL_EPS)?;
    Ok(rows
        .iter()
        .flat_map(|r| {
            [
                r.re_alpha,
                r.p_value,
                r.stderr_paper,
                r.significance.unwrap_or(f64::NAN),
            ]
        })
        .collect())
}

/// Significance at a fixed point for `s` on `[s_start, s_stop]`.
#[allow(clippy::too_many_arguments)]
pub fn significance_rows(
    state: &str,
    n_detectors: usize,
    eta: f64,
    re: f64,
    im: f64,
    nu: u64,
    s_start: f64,
    s_stop: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let state: StateSpec = state.parse()?;
    let detector = DetectorArray::new(n_detectors, eta)?;
    let s_grid = LineGrid::new(s_start, s_stop, steps)?.points();
    let rows = significance_vs_s(&state, detector, PhasePoint::new(re, im), nu, &s_grid, DEFAULT_TAIL_EPS)?;
    Ok(rows
        .iter()
        .flat_map(|r| [r.s, r.p_value, r.stderr_paper, r.significance.unwrap_or(f64::NAN)])
        .collect())
}

/// Click statistics `c_0..c_N` at one point.
pub fn click_probabilities(state: &str, n_detectors: usize, eta: f64, re: f64, im: f64) -> Result<Vec<f64>> {
    let state: StateSpec = state.parse()?;
    let detector = DetectorArray::new(n_detectors, eta)?;
    let pnd = state.distribution(PhasePoint::new(re, im), DEFAULT_TAIL_EPS)?;
    Ok(click_distribution(&pnd, detector)?.probs().to_vec())
}

fn js<T>(result: Result<T>) -> std::result::Result<T, JsError> {
    result.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn scan(
    state: &str,
    n_detectors: usize,
    eta: f64,
    s: f64,
    nu: u32,
    re_start: f64,
    re_stop: f64,
    steps: usize,
    im: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(scan_rows(
        state,
        n_detectors,
        eta,
        s,
        nu.into(),
        re_start,
        re_stop,
        steps,
        im,
    ))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn significance_curve(
    state: &str,
    n_detectors: usize,
    eta: f64,
    re: f64,
    im: f64,
    nu: u32,
    s_start: f64,
    s_stop: f64,
    steps: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(significance_rows(
        state,
        n_detectors,
        eta,
        re,
        im,
        nu.into(),
        s_start,
        s_stop,
        steps,
    ))
}

#[wasm_bindgen]
pub fn click_statistics(
    state: &str,
    n_detectors: usize,
    eta: f64,
    re: f64,
    im: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(click_probabilities(state, n_detectors, eta, re, im))
}
