//! wasm-bindgen exports behind `www/index.html`.
//!
//! Each call returns a flat `[x0, y0, x1, y1, ...]` array for one measure and
//! separation `r`; errors surface as JavaScript exceptions.

use wasm_bindgen::prelude::*;
use xyquench::evolve::IntegratorConfig;
use xyquench::model::{ChainSpec, RampProtocol};
use xyquench::sweep::{self, linear_grid, log_grid, Averaging, MeasureId, SweepRecord};

/// Points per curve above which the page would stall.
pub const MAX_POINTS: usize = 400;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn setup(n: usize, gamma: f64, measure: &str, r: usize, count: usize) -> Result<(ChainSpec, MeasureId), String> {
    if !(1..=2).contains(&r) {
        return Err(format!("r must be 1 or 2, got {r}"));
    }
    if !(2..=MAX_POINTS).contains(&count) {
        return Err(format!("point count must be in 2..={MAX_POINTS}, got {count}"));
    }
    let spec = ChainSpec::new(n, gamma, ChainSpec::DEFAULT_H_I, ChainSpec::DEFAULT_H_F).map_err(|e| e.to_string())?;
    Ok((spec, measure.parse().map_err(|e: xyquench::Error| e.to_string())?))
}

fn flatten(records: &[SweepRecord], m: MeasureId, r: usize, x: impl Fn(&SweepRecord) -> f64) -> Vec<f64> {
    records.iter().filter(|s| s.measure == m && s.r == r).flat_map(|s| [x(s), s.value]).collect()
}

/// Ground-state measure against field on `count` points of `[h_min, h_max]`.
pub fn static_points(n: usize, gamma: f64, h_min: f64, h_max: f64, count: usize, measure: &str, r: usize) -> Result<Vec<f64>, String> {
    let (spec, m) = setup(n, gamma, measure, r, count)?;
    let recs = sweep::static_reference(&spec, &linear_grid(h_min, h_max, count), &[m]).map_err(|e| e.to_string())?;
    Ok(flatten(&recs, m, r, |s| s.h))
}

/// Measure along one ramp of time scale `tau` and noise `xi`.
#[allow(clippy::too_many_arguments)]
pub fn field_points(
    n: usize,
    gamma: f64,
    tau: f64,
    xi: f64,
    h_min: f64,
    h_max: f64,
    count: usize,
    measure: &str,
    r: usize,
) -> Result<Vec<f64>, String> {
    let (spec, m) = setup(n, gamma, measure, r, count)?;
    let p = RampProtocol::new(&spec, tau, xi).map_err(|e| e.to_string())?;
    let grid = linear_grid(h_min, h_max, count);
    let recs = sweep::field_sweep(&spec, &p, &IntegratorConfig::default(), Averaging::TwoPoint, &[m], &grid)
        .map_err(|e| e.to_string())?;
    Ok(flatten(&recs, m, r, |s| s.h))
}

/// Endpoint measure against `tau` on a log grid.
#[allow(clippy::too_many_arguments)]
pub fn tau_points(
    n: usize,
    gamma: f64,
    xi: f64,
    tau_min: f64,
    tau_max: f64,
    count: usize,
    measure: &str,
    r: usize,
) -> Result<Vec<f64>, String> {
    let (spec, m) = setup(n, gamma, measure, r, count)?;
    if !(tau_min > 0.0 && tau_max >= tau_min) {
        return Err(format!("need 0 < tau_min <= tau_max, got {tau_min}, {tau_max}"));
    }
    let recs = sweep::tau_sweep(
        &spec,
        xi,
        &log_grid(tau_min, tau_max, count),
        &IntegratorConfig::default(),
        Averaging::TwoPoint,
        &[m],
    )
    .map_err(|e| e.to_string())?;
    Ok(flatten(&recs, m, r, |s| s.tau))
}

#[wasm_bindgen]
pub fn static_curve(n: usize, gamma: f64, h_min: f64, h_max: f64, count: usize, measure: &str, r: usize) -> Result<Vec<f64>, JsError> {
    static_points(n, gamma, h_min, h_max, count, measure, r).map_err(fail)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn field_sweep_curve(
    n: usize,
    gamma: f64,
    tau: f64,
    xi: f64,
    h_min: f64,
    h_max: f64,
    count: usize,
    measure: &str,
    r: usize,
) -> Result<Vec<f64>, JsError> {
    field_points(n, gamma, tau, xi, h_min, h_max, count, measure, r).map_err(fail)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn tau_sweep_curve(
    n: usize,
    gamma: f64,
    xi: f64,
    tau_min: f64,
    tau_max: f64,
    count: usize,
    measure: &str,
    r: usize,
) -> Result<Vec<f64>, JsError> {
    tau_points(n, gamma, xi, tau_min, tau_max, count, measure, r).map_err(fail)
}
