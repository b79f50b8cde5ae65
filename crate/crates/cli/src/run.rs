//! Dispatch of the five subcommands.

use std::path::Path;

use xyquench::model::{ChainSpec, RampProtocol};
use xyquench::oracle::{
    ensemble_deviation, max_entry_diff, noiseless_rdms, trajectory_ensemble, EnsembleConfig,
};
use xyquench::sweep::{
    analyze_scaling, field_sweep, ramp_rdms, scaling_sweep, sort_records, static_reference, tau_sweep,
    MeasureId, SweepRecord,
};

use crate::config::{averaging_name, Command, ConfigError, RunConfig};
use crate::output::{write_csv, write_json, FitEntry, FitFailure, FitSummary};

/// Noiseless oracle agreement required by `validate`.
pub const NOISELESS_TOL: f64 = 1e-6;
/// Magnus step of the noiseless oracle.
pub const ORACLE_DT: f64 = 0.005;
const MC_SIGMAS: f64 = 3.0;
const MC_FLOOR: f64 = 1e-9;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute { stage: &'static str, message: String },
    Validation(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Compute { .. } => 3,
            RunError::Validation(_) => 4,
        }
    }

    fn compute(stage: &'static str) -> impl Fn(xyquench::Error) -> RunError {
        move |e| RunError::Compute { stage, message: e.to_string() }
    }

    fn io(e: std::io::Error) -> RunError {
        RunError::Compute { stage: "output", message: e.to_string() }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config: {e}"),
            RunError::Compute { stage, message } => write!(f, "{stage}: {message}"),
            RunError::Validation(m) => write!(f, "validation: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// Runs `cfg` and returns the lines to print on success.
pub fn run(cfg: &RunConfig) -> Result<Vec<String>, RunError> {
    match cfg.command {
        Command::FieldSweep => run_field_sweep(cfg),
        Command::TauSweep => run_tau_sweep(cfg),
        Command::Static => run_static(cfg),
        Command::Scaling => run_scaling(cfg),
        Command::Validate => run_validate(cfg),
    }
}

fn out_dir(cfg: &RunConfig) -> &Path {
    cfg.out.as_deref().expect("validated: output directory present")
}

fn keep_r(cfg: &RunConfig, mut records: Vec<SweepRecord>) -> Vec<SweepRecord> {
    records.retain(|x| cfg.r_list.contains(&x.r));
    sort_records(&mut records);
    records
}

fn emit(cfg: &RunConfig, name: &str, records: &[SweepRecord]) -> Result<String, RunError> {
    let path = out_dir(cfg).join(name);
    write_csv(&path, &cfg.entries(), records).map_err(RunError::io)?;
    Ok(format!("wrote {} rows to {}", records.len(), path.display()))
}

fn run_field_sweep(cfg: &RunConfig) -> Result<Vec<String>, RunError> {
    let h = cfg.h_values();
    let mut records = Vec::new();
    for &tau in &cfg.taus {
        for &xi in &cfg.xis {
            let p = RampProtocol::new(&cfg.spec, tau, xi).map_err(RunError::compute("protocol"))?;
            records.extend(
                field_sweep(&cfg.spec, &p, &cfg.integrator, cfg.averaging, &cfg.measures, &h)
                    .map_err(RunError::compute("field sweep"))?,
            );
        }
    }
    Ok(vec![emit(cfg, "field_sweep.csv", &keep_r(cfg, records))?])
}

fn run_tau_sweep(cfg: &RunConfig) -> Result<Vec<String>, RunError> {
    let mut records = Vec::new();
    for &xi in &cfg.xis {
        records.extend(
            tau_sweep(&cfg.spec, xi, &cfg.taus, &cfg.integrator, cfg.averaging, &cfg.measures)
                .map_err(RunError::compute("tau sweep"))?,
        );
    }
    Ok(vec![emit(cfg, "tau_sweep.csv", &keep_r(cfg, records))?])
}

fn run_static(cfg: &RunConfig) -> Result<Vec<String>, RunError> {
    let records = static_reference(&cfg.spec, &cfg.h_values(), &cfg.measures)
        .map_err(RunError::compute("static reference"))?;
    Ok(vec![emit(cfg, "static.csv", &keep_r(cfg, records))?])
}

/// Peaked curves `(tau / tau_m) e^(1 - tau / tau_m)` with `tau_m = (xi^2)^(-2/3)`.
pub fn synthetic_records(
    xis: &[f64],
    taus: &[f64],
    measures: &[MeasureId],
    r_list: &[usize],
    h: f64,
) -> Vec<SweepRecord> {
    let mut out = Vec::new();
    for &xi in xis.iter().filter(|&&x| x > 0.0) {
        let tau_m = (xi * xi).powf(-2.0 / 3.0);
        for &tau in taus {
            let shape = tau / tau_m * (1.0 - tau / tau_m).exp();
            for &measure in measures {
                for &r in r_list {
                    let scale = if measure == MeasureId::Qfi { 2.0 } else { 0.125 } / r as f64;
                    out.push(SweepRecord { tau, xi, r, measure, h, value: scale * shape });
                }
            }
        }
    }
    sort_records(&mut out);
    out
}

fn run_scaling(cfg: &RunConfig) -> Result<Vec<String>, RunError> {
    let records = if cfg.synthetic {
        synthetic_records(&cfg.xis, &cfg.taus, &cfg.measures, &cfg.r_list, cfg.spec.h_f)
    } else {
        let r = scaling_sweep(&cfg.spec, &cfg.xis, &cfg.taus, &cfg.integrator, cfg.averaging, &cfg.measures)
            .map_err(RunError::compute("scaling sweep"))?;
        keep_r(cfg, r)
    };
    let mut lines = vec![emit(cfg, "scaling.csv", &records)?];

    let mut summary = FitSummary { version: env!("CARGO_PKG_VERSION"), config: cfg.entries(), ..Default::default() };
    let mut failed = Vec::new();
    for &measure in &cfg.measures {
        for &r in &cfg.r_list {
            let a = analyze_scaling(&records, measure, r, cfg.fit_window);
            for x in &a.per_xi {
                for (role, fit) in [("peak", &x.peak), ("exp_decay", &x.decay), ("power_decay", &x.power_decay)] {
                    match fit {
                        Ok(f) => summary.fits.push(FitEntry { measure, r, xi: Some(x.xi), role, fit: *f }),
                        Err(e) => summary.failures.push(FitFailure { measure, r, xi: Some(x.xi), role, error: e.clone() }),
                    }
                }
            }
            match &a.exponent {
                Ok(f) => {
                    lines.push(format!(
                        "{measure} r={r}: delta = {:.4} ± {:.4} (R^2 = {:.4})",
                        f.slope_or_exponent, f.stderr, f.r_squared
                    ));
                    summary.fits.push(FitEntry { measure, r, xi: None, role: "tau_m_power_law", fit: *f });
                }
                Err(e) => {
                    lines.push(format!("{measure} r={r}: no exponent ({e})"));
                    failed.push(format!("{measure} r={r}"));
                    summary.failures.push(FitFailure { measure, r, xi: None, role: "tau_m_power_law", error: e.clone() });
                }
            }
        }
    }
    let path = out_dir(cfg).join("fits.json");
    write_json(&path, &summary).map_err(RunError::io)?;
    lines.push(format!("wrote {} fits to {}", summary.fits.len(), path.display()));
    if failed.is_empty() {
        Ok(lines)
    } else {
        for l in &lines {
            println!("{l}");
        }
        Err(RunError::Compute { stage: "fit", message: format!("exponent fit failed for {}", failed.join(", ")) })
    }
}

#[derive(Debug, Clone, serde::Serialize)]
struct ValidationRow {
    tau: f64,
    xi: f64,
    r: usize,
    /// Largest entry difference (noiseless) or deviation in standard errors (noisy).
    discrepancy: f64,
    measure_discrepancy: f64,
    pass: bool,
}

fn run_validate(cfg: &RunConfig) -> Result<Vec<String>, RunError> {
    let spec = ChainSpec::new(cfg.n_oracle, cfg.spec.gamma, cfg.spec.h_i, cfg.spec.h_f)
        .map_err(|e| RunError::Config(ConfigError(e.to_string())))?;
    let ens_cfg = EnsembleConfig { trajectories: cfg.trajectories, seed: cfg.seed, ..Default::default() };
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for &tau in &cfg.taus {
        for &xi in &cfg.xis {
            let p = RampProtocol::new(&spec, tau, xi).map_err(RunError::compute("protocol"))?;
            let pipe = ramp_rdms(&spec, &p, &cfg.integrator, cfg.averaging, &[spec.h_f])
                .map_err(RunError::compute("pipeline"))?;
            if xi == 0.0 {
                let exact = noiseless_rdms(&spec, &p, ORACLE_DT).map_err(RunError::compute("oracle"))?;
                for (a, b) in pipe[0].iter().zip(&exact) {
                    let (ma, mb) = (
                        xyquench::measures::measure(a).map_err(RunError::compute("measures"))?,
                        xyquench::measures::measure(b).map_err(RunError::compute("measures"))?,
                    );
                    let md = [ma.qfi - mb.qfi, ma.lqc_x - mb.lqc_x, ma.lqc_y - mb.lqc_y, ma.lqc_z - mb.lqc_z]
                        .iter()
                        .fold(0.0f64, |m, d| m.max(d.abs()));
                    let d = max_entry_diff(a, b);
                    rows.push(ValidationRow { tau, xi, r: a.r, discrepancy: d, measure_discrepancy: md, pass: d <= NOISELESS_TOL });
                    lines.push(format!("tau={tau} xi=0 r={}: max RDM discrepancy {d:.3e}, measures {md:.3e}", a.r));
                }
            } else {
                let ens = trajectory_ensemble(&spec, &p, &ens_cfg).map_err(RunError::compute("trajectories"))?;
                for (a, est) in pipe[0].iter().zip(&ens.estimates) {
                    let d = ensemble_deviation(a, est, MC_SIGMAS, MC_FLOOR).map_err(RunError::compute("measures"))?;
                    rows.push(ValidationRow {
                        tau,
                        xi,
                        r: a.r,
                        discrepancy: d.worst_sigma,
                        measure_discrepancy: d.worst_sigma,
                        pass: d.within,
                    });
                    lines.push(format!(
                        "tau={tau} xi={xi} r={}: worst deviation {:.2} standard errors ({} averaging, M = {})",
                        a.r,
                        d.worst_sigma,
                        averaging_name(cfg.averaging),
                        cfg.trajectories
                    ));
                }
            }
        }
    }
    if rows.iter().any(|r| r.xi == 0.0) {
        let max = rows.iter().filter(|r| r.xi == 0.0).map(|r| r.discrepancy).fold(0.0f64, f64::max);
        lines.push(format!("max RDM discrepancy (noiseless): {max:.3e}"));
    }
    if let Some(dir) = &cfg.out {
        let path = dir.join("validate.json");
        write_json(&path, &rows).map_err(RunError::io)?;
        lines.push(format!("wrote {}", path.display()));
    }
    if rows.iter().all(|r| r.pass) {
        Ok(lines)
    } else {
        for l in &lines {
            println!("{l}");
        }
        Err(RunError::Validation(format!("{} of {} checks failed", rows.iter().filter(|r| !r.pass).count(), rows.len())))
    }
}
