//! Field and ramp-time sweeps, peak location and fits.

use crate::evolve::{
    evolve_chain, evolve_second_moments, ground_state, IntegratorConfig, ModeState, SecondMoments,
};
use crate::fermion_corr::{spin_correlators, ContractionTable};
use crate::measures::{measure, MeasureResult};
use crate::model::{momentum_grid, ChainSpec, Mode, RampProtocol};
use crate::par;
use crate::rdm::{assemble_rdm, Snapshot, TwoSpinRDM};
use crate::{Error, Result};

fn rdms_from_states(
    spec: &ChainSpec,
    modes: &[Mode],
    states: &[ModeState],
    second: Option<&SecondMoments>,
    snapshot: Snapshot,
) -> Result<[TwoSpinRDM; 2]> {
    let mut table = ContractionTable::from_states(modes, states, snapshot.h, spec.n, 2);
    if let Some(c) = second {
        table = table.with_second_moments(c, states);
    }
    let corr = spin_correlators(&table)?;
    Ok([
        assemble_rdm(&corr, 1)?.with_snapshot(snapshot),
        assemble_rdm(&corr, 2)?.with_snapshot(snapshot),
    ])
}

/// How four-point functions are averaged over the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Averaging {
    /// Wick's theorem applied to the averaged two-point functions.
    #[default]
    TwoPoint,
    /// Products of contractions averaged with the mode-pair second moments.
    Exact,
}

/// `r = 1, 2` states along one ramp at the fields `h_points` (ascending).
pub fn ramp_rdms(
    spec: &ChainSpec,
    protocol: &RampProtocol,
    cfg: &IntegratorConfig,
    averaging: Averaging,
    h_points: &[f64],
) -> Result<Vec<[TwoSpinRDM; 2]>> {
    let times: Vec<f64> = h_points.iter().map(|&h| protocol.time_at(h)).collect();
    let states = evolve_chain(spec, protocol, cfg, &times)?;
    let second = if averaging == Averaging::Exact && protocol.xi > 0.0 {
        Some(evolve_second_moments(spec, protocol, cfg, &times)?)
    } else {
        None
    };
    let modes = momentum_grid(spec);
    states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let snap = Snapshot { tau: protocol.tau, xi: protocol.xi, h: h_points[i], t: times[i] };
            rdms_from_states(spec, &modes, s, second.as_ref().map(|c| &c[i]), snap)
        })
        .collect()
}

/// `r = 1, 2` states of the instantaneous ground state at `h`.
pub fn ground_rdms(spec: &ChainSpec, h: f64) -> Result<[TwoSpinRDM; 2]> {
    let modes = momentum_grid(spec);
    let states: Vec<ModeState> = modes.iter().map(|m| ground_state(m, h, 0.0)).collect();
    let snap = Snapshot { tau: f64::INFINITY, xi: 0.0, h, t: 0.0 };
    rdms_from_states(spec, &modes, &states, None, snap)
}

/// Which scalar a record holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureId {
    Qfi,
    LqcX,
    LqcY,
    LqcZ,
}

impl MeasureId {
    pub const ALL: [MeasureId; 4] = [MeasureId::Qfi, MeasureId::LqcX, MeasureId::LqcY, MeasureId::LqcZ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureId::Qfi => "qfi",
            MeasureId::LqcX => "lqc_x",
            MeasureId::LqcY => "lqc_y",
            MeasureId::LqcZ => "lqc_z",
        }
    }

    pub fn of(self, m: &MeasureResult) -> f64 {
        match self {
            MeasureId::Qfi => m.qfi,
            MeasureId::LqcX => m.lqc_x,
            MeasureId::LqcY => m.lqc_y,
            MeasureId::LqcZ => m.lqc_z,
        }
    }
}

impl std::fmt::Display for MeasureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MeasureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidProtocol(format!("unknown measure '{s}'")))
    }
}

/// One `(tau, xi, r, measure)` value, evaluated at field `h`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRecord {
    pub tau: f64,
    pub xi: f64,
    pub r: usize,
    pub measure: MeasureId,
    pub h: f64,
    pub value: f64,
}

impl SweepRecord {
    fn sort_key(a: &Self, b: &Self) -> std::cmp::Ordering {
        a.measure
            .cmp(&b.measure)
            .then(a.r.cmp(&b.r))
            .then(a.xi.total_cmp(&b.xi))
            .then(a.tau.total_cmp(&b.tau))
            .then(a.h.total_cmp(&b.h))
    }
}

/// Sorts by `(measure, r, xi, tau, h)`.
pub fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(SweepRecord::sort_key);
}

fn push_records(out: &mut Vec<SweepRecord>, rdms: &[TwoSpinRDM; 2], measures: &[MeasureId]) -> Result<()> {
    for rdm in rdms {
        let m = measure(rdm)?;
        for &id in measures {
            out.push(SweepRecord {
                tau: m.snapshot.tau,
                xi: m.snapshot.xi,
                r: m.r,
                measure: id,
                h: m.snapshot.h,
                // rounding can leave a skew information a hair below zero
                value: id.of(&m).max(0.0),
            });
        }
    }
    Ok(())
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Measures at every grid field along one ramp.
pub fn field_sweep(
    spec: &ChainSpec,
    protocol: &RampProtocol,
    cfg: &IntegratorConfig,
    averaging: Averaging,
    measures: &[MeasureId],
    h_grid: &[f64],
) -> Result<Vec<SweepRecord>> {
    let slack = 1e-12 * (spec.h_f - spec.h_i).abs().max(1.0);
    if let Some(h) = h_grid.iter().find(|&&h| !(h >= spec.h_i - slack && h <= spec.h_f + slack)) {
        return Err(Error::InvalidProtocol(format!(
            "field {h} outside the ramp [{}, {}]",
            spec.h_i, spec.h_f
        )));
    }
    let mut grid = h_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let rdms = ramp_rdms(spec, protocol, cfg, averaging, &grid)?;
    let mut out = Vec::with_capacity(grid.len() * 2 * measures.len());
    for r in &rdms {
        push_records(&mut out, r, measures)?;
    }
    sort_records(&mut out);
    Ok(out)
}

/// Measures on the instantaneous ground state; `tau` is recorded as infinite.
pub fn static_reference(spec: &ChainSpec, h_grid: &[f64], measures: &[MeasureId]) -> Result<Vec<SweepRecord>> {
    let per_h = par::map_collect(h_grid, |&h| {
        let mut out = Vec::new();
        push_records(&mut out, &ground_rdms(spec, h)?, measures)?;
        Ok(out)
    });
    let mut out: Vec<SweepRecord> = per_h.into_iter().collect::<Result<Vec<_>>>()?.concat();
    sort_records(&mut out);
    Ok(out)
}

/// Endpoint (`h = h_f`) measures for each ramp time.
pub fn tau_sweep(
    spec: &ChainSpec,
    xi: f64,
    taus: &[f64],
    cfg: &IntegratorConfig,
    averaging: Averaging,
    measures: &[MeasureId],
) -> Result<Vec<SweepRecord>> {
    if taus.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidProtocol("ramp times must be positive".into()));
    }
    let per_tau = par::map_collect(taus, |&tau| {
        let protocol = RampProtocol::new(spec, tau, xi)?;
        let rdms = ramp_rdms(spec, &protocol, cfg, averaging, &[spec.h_f])?;
        let mut out = Vec::new();
        push_records(&mut out, &rdms[0], measures)?;
        Ok(out)
    });
    let mut out: Vec<SweepRecord> = per_tau.into_iter().collect::<Result<Vec<_>>>()?.concat();
    sort_records(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    ExpDecay,
    PowerLaw,
    Peak,
}

/// A fitted line or a located peak.
///
/// - `ExpDecay`: `ln value = slope * tau + intercept` over `(window_lo, window_hi]`.
/// - `PowerLaw`: for `tau_m` against `xi`, `slope_or_exponent` is `delta` in
///   `tau_m ∝ (xi^2)^-delta`; for decay data it is `nu` in `value ∝ tau^-nu`.
/// - `Peak`: `tau_m`, with the parabola's value at the vertex in `intercept`
///   and its curvature in `ln tau` in `slope_or_exponent`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitResult {
    pub kind: FitKind,
    pub slope_or_exponent: f64,
    pub intercept: f64,
    pub tau_m: Option<f64>,
    pub r_squared: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    /// Standard error of `slope_or_exponent`; zero for peaks.
    pub stderr: f64,
    pub points: usize,
}

struct Line {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    stderr: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Line {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let stderr = if xs.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Line { slope, intercept, r_squared, stderr }
}

fn sorted_by_tau(records: &[SweepRecord]) -> Vec<SweepRecord> {
    let mut v = records.to_vec();
    v.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    v
}

/// Discrete maximum refined by a parabola in `ln tau` through its neighbours.
pub fn locate_peak(records: &[SweepRecord]) -> Result<FitResult> {
    let v = sorted_by_tau(records);
    if v.len() < 5 {
        return Err(Error::Fit(format!("peak needs at least 5 points, got {}", v.len())));
    }
    let i = (0..v.len()).fold(0, |best, j| if v[j].value > v[best].value { j } else { best });
    if i == 0 || i == v.len() - 1 {
        return Err(Error::Fit(format!(
            "maximum at grid boundary tau = {} (xi = {}, {} r = {})",
            v[i].tau, v[i].xi, v[i].measure, v[i].r
        )));
    }
    let (x0, x1, x2) = (v[i - 1].tau.ln(), v[i].tau.ln(), v[i + 1].tau.ln());
    let (y0, y1, y2) = (v[i - 1].value, v[i].value, v[i + 1].value);
    // divided differences
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let a = (d2 - d1) / (x2 - x0);
    let b = d1 - a * (x0 + x1);
    let (x_m, y_m) = if a < 0.0 {
        let xm = (-b / (2.0 * a)).clamp(x0, x2);
        (xm, y0 + d1 * (xm - x0) + a * (xm - x0) * (xm - x1))
    } else {
        (x1, y1)
    };
    Ok(FitResult {
        kind: FitKind::Peak,
        slope_or_exponent: 2.0 * a,
        intercept: y_m,
        tau_m: Some(x_m.exp()),
        r_squared: 1.0,
        window_lo: v[i - 1].tau,
        window_hi: v[i + 1].tau,
        stderr: 0.0,
        points: 3,
    })
}

fn window_points(records: &[SweepRecord], window: (f64, f64)) -> Result<Vec<SweepRecord>> {
    let v: Vec<SweepRecord> =
        sorted_by_tau(records).into_iter().filter(|r| r.tau > window.0 && r.tau <= window.1).collect();
    if v.len() < 3 {
        return Err(Error::Fit(format!(
            "window ({}, {}] holds {} points, need at least 3",
            window.0,
            window.1,
            v.len()
        )));
    }
    if let Some(r) = v.iter().find(|r| !(r.value > 0.0)) {
        return Err(Error::Fit(format!("nonpositive value {} at tau = {}", r.value, r.tau)));
    }
    Ok(v)
}

/// Line through `(tau, ln value)` over `tau` in `(window.0, window.1]`.
pub fn fit_exp_decay(records: &[SweepRecord], window: (f64, f64)) -> Result<FitResult> {
    let v = window_points(records, window)?;
    let xs: Vec<f64> = v.iter().map(|r| r.tau).collect();
    let ys: Vec<f64> = v.iter().map(|r| r.value.ln()).collect();
    let l = least_squares(&xs, &ys);
    Ok(FitResult {
        kind: FitKind::ExpDecay,
        slope_or_exponent: l.slope,
        intercept: l.intercept,
        tau_m: None,
        r_squared: l.r_squared,
        window_lo: window.0,
        window_hi: window.1,
        stderr: l.stderr,
        points: v.len(),
    })
}

/// Line through `(ln tau, ln value)`; `slope_or_exponent` is `-slope`.
pub fn fit_power_decay(records: &[SweepRecord], window: (f64, f64)) -> Result<FitResult> {
    let v = window_points(records, window)?;
    let xs: Vec<f64> = v.iter().map(|r| r.tau.ln()).collect();
    let ys: Vec<f64> = v.iter().map(|r| r.value.ln()).collect();
    let l = least_squares(&xs, &ys);
    Ok(FitResult {
        kind: FitKind::PowerLaw,
        slope_or_exponent: -l.slope,
        intercept: l.intercept,
        tau_m: None,
        r_squared: l.r_squared,
        window_lo: window.0,
        window_hi: window.1,
        stderr: l.stderr,
        points: v.len(),
    })
}

/// `tau_m ∝ (xi^2)^-delta` from `(xi, tau_m)` pairs.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("power law needs at least 4 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::Fit(format!("xi and tau_m must be positive, got ({}, {})", p.0, p.1)));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 * p.0).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let l = least_squares(&xs, &ys);
    let xi = points.iter().map(|p| p.0);
    Ok(FitResult {
        kind: FitKind::PowerLaw,
        slope_or_exponent: -l.slope,
        intercept: l.intercept,
        tau_m: None,
        r_squared: l.r_squared,
        window_lo: xi.clone().fold(f64::INFINITY, f64::min),
        window_hi: xi.fold(f64::NEG_INFINITY, f64::max),
        stderr: l.stderr,
        points: points.len(),
    })
}

/// Peak and decay fits for one noise strength.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct XiAnalysis {
    pub xi: f64,
    pub peak: std::result::Result<FitResult, String>,
    pub decay: std::result::Result<FitResult, String>,
    pub power_decay: std::result::Result<FitResult, String>,
}

/// Per-`xi` fits and the `tau_m` power law for one `(measure, r)` series.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalingAnalysis {
    pub measure: MeasureId,
    pub r: usize,
    pub per_xi: Vec<XiAnalysis>,
    pub exponent: std::result::Result<FitResult, String>,
}

impl ScalingAnalysis {
    /// Decay fits in order of increasing `xi`, if every one succeeded.
    pub fn decays(&self) -> Option<Vec<FitResult>> {
        self.per_xi.iter().map(|a| a.decay.clone().ok()).collect()
    }
}

/// Fits every noisy `xi` found in `records` for one `(measure, r)`.
///
/// The decay window defaults to `(2 tau_m, tau_max]`.
pub fn analyze_scaling(
    records: &[SweepRecord],
    measure: MeasureId,
    r: usize,
    window: Option<(f64, f64)>,
) -> ScalingAnalysis {
    let series: Vec<SweepRecord> =
        records.iter().copied().filter(|x| x.measure == measure && x.r == r && x.xi > 0.0).collect();
    let mut xis: Vec<f64> = series.iter().map(|x| x.xi).collect();
    xis.sort_by(f64::total_cmp);
    xis.dedup();
    let per_xi: Vec<XiAnalysis> = xis
        .iter()
        .map(|&xi| {
            let s: Vec<SweepRecord> = series.iter().copied().filter(|x| x.xi == xi).collect();
            let tau_max = s.iter().map(|x| x.tau).fold(f64::NEG_INFINITY, f64::max);
            let peak = locate_peak(&s).map_err(|e| e.to_string());
            let w = match (window, &peak) {
                (Some(w), _) => Ok(w),
                (None, Ok(p)) => Ok((2.0 * p.tau_m.unwrap_or(0.0), tau_max)),
                (None, Err(e)) => Err(format!("no decay window without a peak: {e}")),
            };
            let fit = |f: fn(&[SweepRecord], (f64, f64)) -> Result<FitResult>| {
                w.clone().and_then(|w| f(&s, w).map_err(|e| e.to_string()))
            };
            XiAnalysis { xi, decay: fit(fit_exp_decay), power_decay: fit(fit_power_decay), peak }
        })
        .collect();
    let taus: std::result::Result<Vec<(f64, f64)>, String> = per_xi
        .iter()
        .map(|a| a.peak.as_ref().map(|p| (a.xi, p.tau_m.unwrap_or(f64::NAN))).map_err(|e| e.clone()))
        .collect();
    let exponent = taus.and_then(|t| fit_power_law(&t).map_err(|e| e.to_string()));
    ScalingAnalysis { measure, r, per_xi, exponent }
}

/// `tau` sweeps at each `xi`, concatenated and sorted.
pub fn scaling_sweep(
    spec: &ChainSpec,
    xis: &[f64],
    taus: &[f64],
    cfg: &IntegratorConfig,
    averaging: Averaging,
    measures: &[MeasureId],
) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::new();
    for &xi in xis {
        out.extend(tau_sweep(spec, xi, taus, cfg, averaging, measures)?);
    }
    sort_records(&mut out);
    Ok(out)
}
