use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::integrator::{DiagnosticsRow, RunRecord, RunStatus};

use super::config::RunConfig;
use super::snapshot::SnapshotFile;

pub const SERIES_FILE: &str = "series.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const FINAL_SNAPSHOT: &str = "final.json";

pub fn csv_header(mass_below_r: &[f64]) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "dt", "M", "E", "linf", "S", "D", "clamped_fraction", "n0"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(mass_below_r.iter().map(|r| format!("mass_below_R{r}")));
    cols.extend(
        ["blowup_criterion", "condensation_criterion", "low_mass_margin"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols
}

pub fn csv_text(rows: &[DiagnosticsRow], mass_below_r: &[f64]) -> String {
    let mut out = csv_header(mass_below_r).join(",");
    out.push('\n');
    for r in rows {
        let mut fields = vec![r.t, r.dt, r.mass, r.energy, r.linf, r.entropy, r.dissipation, r.clamped_fraction, r.n0];
        fields.extend(&r.mass_below);
        fields.extend([r.blowup_value, r.condensation_value, r.low_mass_margin]);
        let line: Vec<String> = fields.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parsed CSV time series: header and numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty time series".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?;
            if row.len() != header.len() {
                return Err(Error::Parse(format!(
                    "line {} has {} fields, header has {}",
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: RunConfig,
    pub status: RunStatus,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    /// CSV rows after the initial `t = 0` row. Equals `accepted_steps`
    /// when every step is recorded.
    pub rows: usize,
    pub first_condensate_time: Option<f64>,
    pub total_clipped_mass: f64,
    pub files: Vec<FileHash>,
    /// SHA-256 over the `path sha256` lines of `files`.
    pub content_hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(dir: &Path, rel: &str, bytes: &[u8], hashes: &mut Vec<FileHash>) -> Result<()> {
    let path = dir.join(rel);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    hashes.push(FileHash {
        path: rel.to_string(),
        sha256: sha256_hex(bytes),
    });
    Ok(())
}

/// Writes the CSV, snapshots and manifest of one run into `dir`.
pub fn write_run(dir: &Path, config: &RunConfig, record: &RunRecord) -> Result<PathBuf> {
    std::fs::create_dir_all(dir.join(SNAPSHOT_DIR)).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let csv = csv_text(&record.rows, &config.output.mass_below_r);
    write_file(dir, SERIES_FILE, csv.as_bytes(), &mut files)?;
    for (i, snap) in record.snapshots.iter().enumerate() {
        let text = SnapshotFile::from_distribution(&snap.dist, snap.t).to_json()? + "\n";
        write_file(dir, &format!("{SNAPSHOT_DIR}/snapshot_{i:04}.json"), text.as_bytes(), &mut files)?;
    }
    let t_final = record.rows.last().map_or(0.0, |r| r.t);
    let text = SnapshotFile::from_distribution(&record.final_state, t_final).to_json()? + "\n";
    write_file(dir, &format!("{SNAPSHOT_DIR}/{FINAL_SNAPSHOT}"), text.as_bytes(), &mut files)?;

    let mut listing = String::new();
    for f in &files {
        let _ = writeln!(listing, "{} {}", f.path, f.sha256);
    }
    let manifest = Manifest {
        version: 1,
        config: config.clone(),
        status: record.status,
        accepted_steps: record.accepted_steps,
        rejected_steps: record.rejected_steps,
        rows: record.rows.len().saturating_sub(1),
        first_condensate_time: record.first_condensate_time,
        total_clipped_mass: record.total_clipped_mass,
        files,
        content_hash: sha256_hex(listing.as_bytes()),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let row = DiagnosticsRow {
            t: 0.5,
            dt: 0.1,
            mass: 1.0,
            energy: 2.0,
            linf: 3.0,
            entropy: 4.0,
            dissipation: 5.0,
            clamped_fraction: 0.0,
            n0: 0.25,
            mass_below: vec![0.125, 0.5],
            blowup_value: 6.0,
            condensation_value: f64::INFINITY,
            low_mass_margin: -1.0,
        };
        let text = csv_text(std::slice::from_ref(&row), &[0.1, 1.0]);
        assert!(text.starts_with("t,dt,M,E,linf,S,D,clamped_fraction,n0,mass_below_R0.1,mass_below_R1,"));
        let series = Series::parse(&text).unwrap();
        assert_eq!(series.column("n0").unwrap(), vec![0.25]);
        assert_eq!(series.column("condensation_criterion").unwrap(), vec![f64::INFINITY]);
        assert!(series.column("nope").is_err());
    }

    #[test]
    fn ragged_csv_is_rejected() {
        assert!(Series::parse("a,b\n1,2,3\n").is_err());
        assert!(Series::parse("a,b\n1,x\n").is_err());
        assert!(Series::parse("").is_err());
    }
}
