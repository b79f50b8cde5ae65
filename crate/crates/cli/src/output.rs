//! CSV and JSON files, each written once through a temp file and a rename.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use xyquench::sweep::{FitResult, MeasureId, SweepRecord};

pub const CSV_HEADER: &str = "tau,xi,r,measure,h,value";

fn write_atomic(path: &Path, body: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `#` provenance lines, the header, then one row per record in the given order.
pub fn csv_string(provenance: &[(String, String)], records: &[SweepRecord]) -> String {
    let mut s = format!("# xyquench {}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in provenance {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!("{},{},{},{},{},{}\n", r.tau, r.xi, r.r, r.measure, r.h, r.value));
    }
    s
}

pub fn write_csv(path: &Path, provenance: &[(String, String)], records: &[SweepRecord]) -> std::io::Result<()> {
    write_atomic(path, csv_string(provenance, records).as_bytes())
}

/// One fit with the series it belongs to; `xi` is absent for the `tau_m` power law.
#[derive(Debug, Clone, Serialize)]
pub struct FitEntry {
    pub measure: MeasureId,
    pub r: usize,
    pub xi: Option<f64>,
    pub role: &'static str,
    #[serde(flatten)]
    pub fit: FitResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitFailure {
    pub measure: MeasureId,
    pub r: usize,
    pub xi: Option<f64>,
    pub role: &'static str,
    pub error: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FitSummary {
    pub version: &'static str,
    pub config: Vec<(String, String)>,
    pub fits: Vec<FitEntry>,
    pub failures: Vec<FitFailure>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut body = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
    body.push(b'\n');
    write_atomic(path, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rec = SweepRecord { tau: 2.5, xi: 0.1, r: 1, measure: MeasureId::LqcX, h: 30.0, value: 0.125 };
        let s = csv_string(&[("N".into(), "100".into())], &[rec]);
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[0].starts_with("# xyquench"));
        assert_eq!(lines[1], "# N = 100");
        assert_eq!(lines[2], CSV_HEADER);
        assert_eq!(lines[3], "2.5,0.1,1,lqc_x,30,0.125");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_csv(&p, &[], &[]).unwrap();
        write_csv(&p, &[("k".into(), "v".into())], &[]).unwrap();
        let s = std::fs::read_to_string(&p).unwrap();
        assert!(s.contains("# k = v"));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
