use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collision::{Distribution, DistributionKind};
use crate::error::{Error, Result};
use crate::grid::{EnergyGrid, GridSpec};

pub const SNAPSHOT_VERSION: u32 = 1;

/// On-disk form of a state. See `docs/snapshot-format.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFile {
    pub version: u32,
    pub t: f64,
    pub kind: DistributionKind,
    pub grid: GridSpec,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub condensate: f64,
}

impl SnapshotFile {
    pub fn from_distribution(dist: &Distribution, t: f64) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            t,
            kind: dist.kind(),
            grid: dist.grid().spec().clone(),
            nodes: dist.grid().nodes().to_vec(),
            values: dist.values().to_vec(),
            condensate: dist.condensate(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: SnapshotFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported snapshot version {} (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        Ok(snap)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Rebuilds the grid and checks it against the stored nodes.
    pub fn to_distribution(&self) -> Result<Distribution> {
        let grid = EnergyGrid::build(&self.grid).map_err(|e| Error::Parse(format!("snapshot grid: {e}")))?;
        if grid.nodes().len() != self.nodes.len()
            || grid
                .nodes()
                .iter()
                .zip(&self.nodes)
                .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1e-300))
        {
            return Err(Error::Parse("snapshot nodes do not match its grid specification".into()));
        }
        Distribution::new(Arc::new(grid), self.kind, self.values.clone(), self.condensate)
            .map_err(|e| Error::Parse(format!("snapshot values: {e}")))
    }
}
