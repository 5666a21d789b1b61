//! Per-sample CSV export.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use super::run::ResultSet;

pub const CSV_HEADER: &str =
    "scenario,seed,config_name,true_distance_m,sample_index,elapsed_ms,est_distance_m,rtt_ps,rssi_dbm,burst_std_m,dropped";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn to_csv(results: &ResultSet) -> String {
    let s = &results.scenario;
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for d in &results.distances {
        let prefix = format!("{},{},{},{:.4}", s.name, s.seed, s.config_name, d.true_distance_m);
        if d.all_dropped() {
            let _ = writeln!(out, "{prefix},,,,,,,all");
            continue;
        }
        for r in &d.rows {
            let _ = writeln!(
                out,
                "{prefix},{},{:.4},{},{},{},{},{}",
                r.sample_index,
                r.elapsed_ms,
                opt(r.est_distance_m),
                opt(r.rtt_ps),
                opt(r.rssi_dbm),
                opt(r.burst_std_m),
                r.dropped
            );
        }
    }
    out
}

/// Writes `<scenario>_<seed>.csv` under `out_dir` and returns its path.
pub fn export_csv(results: &ResultSet, out_dir: &Path) -> io::Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}_{}.csv", results.scenario.name, results.scenario.seed));
    std::fs::write(&path, to_csv(results))?;
    Ok(path)
}

/// A parsed data line. Empty cells come back as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scenario: String,
    pub seed: u64,
    pub config_name: String,
    pub true_distance_m: f64,
    pub sample_index: Option<u32>,
    pub elapsed_ms: Option<f64>,
    pub est_distance_m: Option<f64>,
    pub rtt_ps: Option<f64>,
    pub rssi_dbm: Option<f64>,
    pub burst_std_m: Option<f64>,
    pub dropped: String,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err("missing or wrong header".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(format!("line {}: expected 11 fields, got {}", i + 2, f.len()));
            }
            let num = |s: &str| -> Result<Option<f64>, String> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|e| format!("line {}: {e}", i + 2))
                }
            };
            Ok(CsvRow {
                scenario: f[0].to_string(),
                seed: f[1].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
                config_name: f[2].to_string(),
                true_distance_m: num(f[3])?.ok_or("empty distance")?,
                sample_index: num(f[4])?.map(|x| x as u32),
                elapsed_ms: num(f[5])?,
                est_distance_m: num(f[6])?,
                rtt_ps: num(f[7])?,
                rssi_dbm: num(f[8])?,
                burst_std_m: num(f[9])?,
                dropped: f[10].to_string(),
            })
        })
        .collect()
}
