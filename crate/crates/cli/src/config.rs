//! Flat `key = value` run configuration, merged under command-line overrides.

use std::path::{Path, PathBuf};

use xyquench::evolve::IntegratorConfig;
use xyquench::model::ChainSpec;
use xyquench::oracle::MAX_SITES;
use xyquench::sweep::{linear_grid, log_grid, Averaging, MeasureId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FieldSweep,
    TauSweep,
    Scaling,
    Validate,
    Static,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FieldSweep => "field-sweep",
            Command::TauSweep => "tau-sweep",
            Command::Scaling => "scaling",
            Command::Validate => "validate",
            Command::Static => "static",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub spec: ChainSpec,
    pub integrator: IntegratorConfig,
    pub averaging: Averaging,
    pub taus: Vec<f64>,
    pub xis: Vec<f64>,
    pub r_list: Vec<usize>,
    pub measures: Vec<MeasureId>,
    pub h_grid: (f64, f64, usize),
    pub out: Option<PathBuf>,
    pub n_oracle: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub fit_window: Option<(f64, f64)>,
    pub synthetic: bool,
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key = value, got '{line}'", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    parse_pairs(&text)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| ConfigError(format!("{key}: cannot parse '{v}'")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect()
}

fn range2(key: &str, v: &str) -> Result<(f64, f64)> {
    match v.split(':').collect::<Vec<_>>()[..] {
        [a, b] => Ok((num(key, a)?, num(key, b)?)),
        _ => Err(ConfigError(format!("{key}: expected lo:hi, got '{v}'"))),
    }
}

fn range3(key: &str, v: &str) -> Result<(f64, f64, usize)> {
    match v.split(':').collect::<Vec<_>>()[..] {
        [a, b, n] => Ok((num(key, a)?, num(key, b)?, num(key, n)?)),
        _ => Err(ConfigError(format!("{key}: expected min:max:count, got '{v}'"))),
    }
}

/// A comma list, or `lo:hi:count` for a log-spaced grid.
fn tau_values(v: &str) -> Result<Vec<f64>> {
    if v.contains(':') {
        let (lo, hi, n) = range3("tau", v)?;
        if !(lo > 0.0 && hi >= lo && n > 0) {
            return Err(ConfigError(format!("tau: bad log grid '{v}'")));
        }
        Ok(log_grid(lo, hi, n))
    } else {
        list("tau", v)
    }
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn averaging(v: &str) -> Result<Averaging> {
    match v {
        "two_point" => Ok(Averaging::TwoPoint),
        "exact" => Ok(Averaging::Exact),
        _ => Err(ConfigError(format!("averaging: expected two_point or exact, got '{v}'"))),
    }
}

pub fn averaging_name(a: Averaging) -> &'static str {
    match a {
        Averaging::TwoPoint => "two_point",
        Averaging::Exact => "exact",
    }
}

impl RunConfig {
    /// Defaults for `command`, then `pairs` applied in order.
    pub fn build(command: Command, pairs: &[(String, String)]) -> Result<Self> {
        let mut n = 200usize;
        let (mut gamma, mut h_i, mut h_f) = (1.0, -30.0, 30.0);
        let mut integrator = IntegratorConfig::default();
        let mut taus = None;
        let mut xis = None;
        let mut c = RunConfig {
            command,
            spec: ChainSpec::default(),
            integrator,
            averaging: if command == Command::Validate { Averaging::Exact } else { Averaging::TwoPoint },
            taus: vec![],
            xis: vec![],
            r_list: vec![1, 2],
            measures: MeasureId::ALL.to_vec(),
            h_grid: (-2.0, 2.0, 81),
            out: None,
            n_oracle: 8,
            trajectories: 2000,
            seed: 0x5eed,
            fit_window: None,
            synthetic: false,
        };
        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "N" => n = num(k, v)?,
                "gamma" => gamma = num(k, v)?,
                "h_i" => h_i = num(k, v)?,
                "h_f" => h_f = num(k, v)?,
                "tau" => taus = Some(tau_values(v)?),
                "xi" => xis = Some(list(k, v)?),
                "r" => c.r_list = list(k, v)?,
                "measures" => {
                    c.measures = v
                        .split(',')
                        .map(|s| s.trim().parse().map_err(|e: xyquench::Error| ConfigError(e.to_string())))
                        .collect::<Result<_>>()?
                }
                "h_grid" => c.h_grid = range3(k, v)?,
                "rel_tol" => integrator.rel_tol = num(k, v)?,
                "abs_tol" => integrator.abs_tol = num(k, v)?,
                "N_oracle" => c.n_oracle = num(k, v)?,
                "trajectories" => c.trajectories = num(k, v)?,
                "seed" => c.seed = num(k, v)?,
                "fit_window" => c.fit_window = Some(range2(k, v)?),
                "out" => c.out = Some(PathBuf::from(v)),
                "averaging" => c.averaging = averaging(v)?,
                "synthetic" => c.synthetic = boolean(k, v)?,
                _ => return Err(ConfigError(format!("unknown key '{k}'"))),
            }
        }
        c.spec = ChainSpec::new(n, gamma, h_i, h_f).map_err(|e| ConfigError(e.to_string()))?;
        integrator.validate().map_err(|e| ConfigError(e.to_string()))?;
        c.integrator = integrator;
        let (default_taus, default_xis) = match command {
            Command::FieldSweep => (vec![500.0], vec![0.0]),
            Command::TauSweep => (log_grid(1.0, 200.0, 16), vec![0.0]),
            Command::Scaling => (log_grid(1.0, 100.0, 31), vec![0.15, 0.2, 0.25, 0.3, 0.35, 0.4]),
            Command::Validate => (vec![0.5, 2.0], vec![0.0]),
            Command::Static => (vec![], vec![0.0]),
        };
        c.taus = taus.unwrap_or(default_taus);
        c.xis = xis.unwrap_or(default_xis);
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ConfigError(m));
        if self.out.is_none() && self.command != Command::Validate {
            return bad(format!("{} needs an output directory (--out or out = ...)", self.command.name()));
        }
        if self.taus.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return bad("tau values must be positive".into());
        }
        if self.xis.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return bad("xi values must be nonnegative".into());
        }
        if self.r_list.is_empty() || self.r_list.iter().any(|r| !(1..=2).contains(r)) {
            return bad("r must be 1 and/or 2".into());
        }
        if self.measures.is_empty() {
            return bad("measures must not be empty".into());
        }
        if !(self.spec.h_i < self.spec.h_f) {
            return bad(format!("the ramp must run upward, got h_i = {} and h_f = {}", self.spec.h_i, self.spec.h_f));
        }
        let (lo, hi, count) = self.h_grid;
        if !(lo <= hi && count > 0) {
            return bad(format!("h_grid: need min <= max and count > 0, got {lo}:{hi}:{count}"));
        }
        if self.command == Command::FieldSweep && (lo < self.spec.h_i || hi > self.spec.h_f) {
            return bad(format!("h_grid {lo}:{hi} leaves the ramp [{}, {}]", self.spec.h_i, self.spec.h_f));
        }
        if let Some((lo, hi)) = self.fit_window {
            if !(lo < hi) {
                return bad(format!("fit_window: need lo < hi, got {lo}:{hi}"));
            }
        }
        if self.command == Command::Validate {
            if !(4..=MAX_SITES).contains(&self.n_oracle) || self.n_oracle % 2 == 1 {
                return bad(format!("N_oracle must be even and in 4..={MAX_SITES}, got {}", self.n_oracle));
            }
            if self.trajectories < 40 {
                return bad("trajectories must be at least 40".into());
            }
        }
        if self.command == Command::Scaling && !self.synthetic && self.xis.iter().filter(|&&x| x > 0.0).count() < 4 {
            return bad("scaling needs at least 4 positive xi values".into());
        }
        Ok(())
    }

    pub fn h_values(&self) -> Vec<f64> {
        let (lo, hi, n) = self.h_grid;
        linear_grid(lo, hi, n)
    }

    /// Resolved settings as `key = value` lines for provenance headers.
    pub fn entries(&self) -> Vec<(String, String)> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let (lo, hi, n) = self.h_grid;
        let mut e = vec![
            ("command", self.command.name().to_string()),
            ("N", self.spec.n.to_string()),
            ("gamma", self.spec.gamma.to_string()),
            ("h_i", self.spec.h_i.to_string()),
            ("h_f", self.spec.h_f.to_string()),
            ("tau", join(&self.taus)),
            ("xi", join(&self.xis)),
            ("r", self.r_list.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")),
            ("measures", self.measures.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")),
            ("h_grid", format!("{lo}:{hi}:{n}")),
            ("rel_tol", self.integrator.rel_tol.to_string()),
            ("abs_tol", self.integrator.abs_tol.to_string()),
            ("averaging", averaging_name(self.averaging).to_string()),
            ("N_oracle", self.n_oracle.to_string()),
            ("trajectories", self.trajectories.to_string()),
            ("seed", self.seed.to_string()),
            ("synthetic", self.synthetic.to_string()),
        ];
        if let Some((lo, hi)) = self.fit_window {
            e.push(("fit_window", format!("{lo}:{hi}")));
        }
        if let Some(out) = &self.out {
            e.push(("out", out.display().to_string()));
        }
        e.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(s: &[(&str, &str)]) -> Vec<(String, String)> {
        s.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::build(Command::Validate, &[]).unwrap();
        assert_eq!((c.spec.n, c.spec.gamma, c.spec.h_i, c.spec.h_f), (200, 1.0, -30.0, 30.0));
        assert_eq!(c.r_list, vec![1, 2]);
        assert_eq!(c.measures.len(), 4);
    }

    #[test]
    fn file_syntax() {
        let p = parse_pairs("# run\nN = 100   # desk size\n\n tau=1,2,5\n").unwrap();
        assert_eq!(p, pairs(&[("N", "100"), ("tau", "1,2,5")]));
        assert!(parse_pairs("N 100").is_err());
    }

    #[test]
    fn later_pairs_override() {
        let c = RunConfig::build(Command::TauSweep, &pairs(&[("N", "50"), ("out", "x"), ("N", "60")])).unwrap();
        assert_eq!(c.spec.n, 60);
    }

    #[test]
    fn tau_list_and_grid() {
        let c = RunConfig::build(Command::TauSweep, &pairs(&[("tau", "1,2,5"), ("xi", "0"), ("out", "o")])).unwrap();
        assert_eq!(c.taus, vec![1.0, 2.0, 5.0]);
        assert_eq!(c.xis, vec![0.0]);
        let c = RunConfig::build(Command::TauSweep, &pairs(&[("tau", "1:100:3"), ("out", "o")])).unwrap();
        assert!((c.taus[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejections() {
        let bad = [
            vec![("bogus", "1")],
            vec![("N", "abc")],
            vec![("N", "7")],
            vec![("r", "3")],
            vec![("measures", "qfi,lqc_w")],
            vec![("h_grid", "1:2")],
            vec![("averaging", "mean")],
            vec![("tau", "-1")],
        ];
        for b in bad {
            let mut p = pairs(&b);
            p.push(("out".into(), "o".into()));
            assert!(RunConfig::build(Command::FieldSweep, &p).is_err(), "{b:?}");
        }
        assert!(RunConfig::build(Command::FieldSweep, &[]).is_err());
        assert!(RunConfig::build(Command::Validate, &pairs(&[("N_oracle", "14")])).is_err());
    }
}
