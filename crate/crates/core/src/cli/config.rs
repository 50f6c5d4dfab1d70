use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collision::{density_factor, Distribution, DistributionKind};
use crate::diagnostics::DetectorParams;
use crate::entropy::DEFAULT_LOG_FLOOR;
use crate::equilibrium::{critical_mass, EquilibriumParams};
use crate::error::{Error, Result};
use crate::grid::{EnergyGrid, GridSpec};
use crate::integrator::{Scheme, StepControl};

use super::snapshot::SnapshotFile;

/// A complete run description, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    /// Only used by randomized test data; runs themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    /// Mass placed in the condensate before the first step, as a fraction of
    /// the total (weak-g schemes only). `n₀ = 0` is invariant under the
    /// discrete dynamics, so supercritical runs need a positive seed.
    #[serde(default)]
    pub condensate_seed: f64,
    pub step: StepControl,
    #[serde(default)]
    pub detectors: DetectorParams,
    pub output: OutputSpec,
}

/// Initial datum. Amplitudes are occupation numbers `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `1/(exp(β(ε+α)) − 1)`; `m0` goes to the condensate slot (weak-g) or the first cell (strong-f).
    BoseEinstein {
        alpha: f64,
        beta: f64,
        #[serde(default)]
        m0: f64,
    },
    /// `A exp(−((ε − c)/w)²)`.
    GaussianBump {
        amplitude: f64,
        center: f64,
        width: f64,
        /// Rescale the amplitude so that `M/M_c(E)` equals this value.
        #[serde(default)]
        critical_ratio: Option<f64>,
    },
    /// `A` on `[0, rho]`, zero above.
    PowerBump {
        amplitude: f64,
        rho: f64,
        #[serde(default)]
        critical_ratio: Option<f64>,
    },
    Constant {
        value: f64,
    },
    FromSnapshot {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
    #[serde(default)]
    pub mass_below_r: Vec<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default)]
    pub record_interval: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_log_floor")]
    pub log_floor: f64,
}

fn default_record_every() -> u64 {
    1
}

fn default_log_floor() -> f64 {
    DEFAULT_LOG_FLOOR
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.step.validate()?;
        self.detectors.resolve(self.grid.cutoff_energy)?;
        if self.output.record_every == 0 {
            return Err(Error::Config("output.record_every must be at least 1".into()));
        }
        if let Some(i) = self.output.record_interval {
            if !(i > 0.0) {
                return Err(Error::Config(format!("output.record_interval must be positive, got {i}")));
            }
        }
        if let Some(r) = self.output.mass_below_r.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::Config(format!("output.mass_below_r entries must be positive, got {r}")));
        }
        if !(self.output.log_floor > 0.0) {
            return Err(Error::Config("output.log_floor must be positive".into()));
        }
        if !(self.condensate_seed >= 0.0 && self.condensate_seed < 1.0) {
            return Err(Error::Config(format!(
                "condensate_seed must lie in [0, 1), got {}",
                self.condensate_seed
            )));
        }
        if self.condensate_seed > 0.0 && self.scheme == Scheme::StrongF {
            return Err(Error::Config("condensate_seed requires a weak-g scheme".into()));
        }
        self.initial.validate()
    }

    /// Initial state in the representation the scheme evolves.
    pub fn initial_state(&self, grid: Arc<EnergyGrid>, base_dir: &Path) -> Result<Distribution> {
        let f = match &self.initial {
            InitialSpec::FromSnapshot { path } => {
                let path = base_dir.join(path);
                let snap = SnapshotFile::load(&path)?;
                let dist = snap.to_distribution()?;
                if **dist.grid() != *grid {
                    return Err(Error::Config(format!(
                        "snapshot {} was written on a different grid",
                        path.display()
                    )));
                }
                let dist = match (self.scheme.kind(), dist.kind()) {
                    (DistributionKind::MassDensity, DistributionKind::Occupation) => dist.to_mass_density()?,
                    (DistributionKind::Occupation, DistributionKind::MassDensity) => dist.to_occupation()?,
                    _ => dist,
                };
                return self.seeded(dist);
            }
            InitialSpec::BoseEinstein { alpha, beta, m0 } => {
                let params = EquilibriumParams::new(*alpha, *beta, 0.0)?;
                let f = Distribution::bose_einstein(grid.clone(), &params)?;
                let g = f.to_mass_density()?;
                let dist = match self.scheme.kind() {
                    DistributionKind::MassDensity => Distribution::mass_density(grid, g.values().to_vec(), *m0)?,
                    DistributionKind::Occupation => {
                        let mut values = f.values().to_vec();
                        values[0] += m0 / (grid.weights()[0] * density_factor(grid.nodes()[0]));
                        Distribution::occupation(grid, values)?
                    }
                };
                return self.seeded(dist);
            }
            InitialSpec::GaussianBump {
                amplitude,
                center,
                width,
                critical_ratio,
            } => {
                let (c, w) = (*center, *width);
                let shape = Distribution::from_occupation_fn(grid.clone(), |e| (-((e - c) / w).powi(2)).exp())?;
                scale_shape(shape, *amplitude, *critical_ratio)?
            }
            InitialSpec::PowerBump {
                amplitude,
                rho,
                critical_ratio,
            } => {
                let r = *rho;
                let shape = Distribution::from_occupation_fn(grid.clone(), |e| if e <= r { 1.0 } else { 0.0 })?;
                scale_shape(shape, *amplitude, *critical_ratio)?
            }
            InitialSpec::Constant { value } => Distribution::from_occupation_fn(grid.clone(), |_| *value)?,
        };
        match self.scheme.kind() {
            DistributionKind::Occupation => self.seeded(f),
            DistributionKind::MassDensity => self.seeded(f.to_mass_density()?),
        }
    }

    fn seeded(&self, dist: Distribution) -> Result<Distribution> {
        if self.condensate_seed == 0.0 {
            return Ok(dist);
        }
        let seed = self.condensate_seed * dist.moments().mass;
        Distribution::mass_density(dist.grid().clone(), dist.values().to_vec(), dist.condensate() + seed)
    }
}

impl InitialSpec {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("initial.{what} is invalid: {v}")));
        match self {
            InitialSpec::BoseEinstein { alpha, beta, m0 } => {
                EquilibriumParams::new(*alpha, *beta, *m0)?;
            }
            InitialSpec::GaussianBump {
                amplitude,
                width,
                center,
                critical_ratio,
            } => {
                if !(*amplitude > 0.0 && amplitude.is_finite()) {
                    return bad("amplitude", *amplitude);
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return bad("width", *width);
                }
                if !center.is_finite() {
                    return bad("center", *center);
                }
                check_ratio(*critical_ratio)?;
            }
            InitialSpec::PowerBump {
                amplitude,
                rho,
                critical_ratio,
            } => {
                if !(*amplitude > 0.0 && amplitude.is_finite()) {
                    return bad("amplitude", *amplitude);
                }
                if !(*rho > 0.0 && rho.is_finite()) {
                    return bad("rho", *rho);
                }
                check_ratio(*critical_ratio)?;
            }
            InitialSpec::Constant { value } => {
                if !(*value >= 0.0 && value.is_finite()) {
                    return bad("value", *value);
                }
            }
            InitialSpec::FromSnapshot { .. } => {}
        }
        Ok(())
    }
}

fn check_ratio(ratio: Option<f64>) -> Result<()> {
    match ratio {
        Some(r) if !(r > 0.0 && r.is_finite()) => {
            Err(Error::Config(format!("initial.critical_ratio must be positive, got {r}")))
        }
        _ => Ok(()),
    }
}

/// `A·shape`, or the multiple of `shape` with `M/M_c(E) = ratio`.
///
/// Mass and energy are linear in the amplitude while `M_c ∝ E^{3/5}`, so the
/// ratio scales as `A^{2/5}`.
fn scale_shape(shape: Distribution, amplitude: f64, ratio: Option<f64>) -> Result<Distribution> {
    let scale = match ratio {
        None => amplitude,
        Some(target) => {
            let m = shape.moments();
            if !(m.mass > 0.0) {
                return Err(Error::Config("initial datum has no mass on this grid".into()));
            }
            let unit = m.mass / critical_mass(m.energy)?;
            (target / unit).powf(2.5)
        }
    };
    let values = shape.values().iter().map(|v| v * scale).collect();
    Distribution::occupation(shape.grid().clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
scheme = "weak-g"

[grid]
n_nodes = 24
cutoff_energy = 10.0

[initial]
family = "gaussian-bump"
amplitude = 2.0
center = 1.0
width = 0.5

[step]
dt = 1e-3
dt_min = 1e-9
dt_max = 0.1
stop_time = 1.0

[output]
directory = "out"
mass_below_r = [0.5]
"#;

    fn grid(c: &RunConfig) -> Arc<EnergyGrid> {
        Arc::new(EnergyGrid::build(&c.grid).unwrap())
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(c.output.record_every, 1);
        assert_eq!(c.detectors, DetectorParams::default());
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(RunConfig::from_toml(&BASE.replace("width = 0.5", "width = 0.5\nwdth = 1")).is_err());
        assert!(RunConfig::from_toml(&BASE.replace("width = 0.5", "width = -0.5")).is_err());
        assert!(RunConfig::from_toml(&BASE.replace("dt = 1e-3", "dt = 1.0")).is_err());
        assert!(RunConfig::from_toml(&BASE.replace("\"weak-g\"", "\"weak\"")).is_err());
        let seeded = BASE.replace("scheme = \"weak-g\"", "scheme = \"strong-f\"\ncondensate_seed = 1e-9");
        assert!(RunConfig::from_toml(&seeded).is_err());
    }

    #[test]
    fn critical_ratio_sets_the_amplitude() {
        let text = BASE.replace("width = 0.5", "width = 0.5\ncritical_ratio = 1.5");
        let c = RunConfig::from_toml(&text).unwrap();
        let d = c.initial_state(grid(&c), Path::new(".")).unwrap();
        let m = d.moments();
        let ratio = m.mass / critical_mass(m.energy).unwrap();
        assert!((ratio - 1.5).abs() < 1e-12, "ratio {ratio}");
    }

    #[test]
    fn representation_follows_the_scheme() {
        let weak = RunConfig::from_toml(BASE).unwrap();
        let strong = RunConfig::from_toml(&BASE.replace("\"weak-g\"", "\"strong-f\"")).unwrap();
        let implicit = RunConfig::from_toml(&BASE.replace("\"weak-g\"", "\"weak-g-implicit\"")).unwrap();
        let g = weak.initial_state(grid(&weak), Path::new(".")).unwrap();
        let f = strong.initial_state(grid(&strong), Path::new(".")).unwrap();
        let gi = implicit.initial_state(grid(&implicit), Path::new(".")).unwrap();
        assert_eq!(g.kind(), DistributionKind::MassDensity);
        assert_eq!(f.kind(), DistributionKind::Occupation);
        assert_eq!(gi, g);
        let (mg, mf) = (g.moments().mass, f.moments().mass);
        assert!((mg - mf).abs() <= 1e-12 * mg);
    }

    #[test]
    fn seed_is_a_fraction_of_the_mass() {
        let c = RunConfig::from_toml(&BASE.replace("scheme = \"weak-g\"", "scheme = \"weak-g\"\ncondensate_seed = 1e-3"))
            .unwrap();
        let d = c.initial_state(grid(&c), Path::new(".")).unwrap();
        let continuum = d.moments().mass - d.condensate();
        assert!((d.condensate() - 1e-3 * continuum).abs() <= 1e-15 * continuum);
    }

    #[test]
    fn bose_einstein_condensate_placement() {
        let text = BASE.replace(
            "family = \"gaussian-bump\"\namplitude = 2.0\ncenter = 1.0\nwidth = 0.5",
            "family = \"bose-einstein\"\nalpha = 0.0\nbeta = 1.0\nm0 = 0.75",
        );
        let weak = RunConfig::from_toml(&text).unwrap();
        let g = weak.initial_state(grid(&weak), Path::new(".")).unwrap();
        assert_eq!(g.condensate(), 0.75);
        let strong = RunConfig::from_toml(&text.replace("\"weak-g\"", "\"strong-f\"")).unwrap();
        let f = strong.initial_state(grid(&strong), Path::new(".")).unwrap();
        let mass_diff = f.moments().mass - g.moments().mass;
        assert!(mass_diff.abs() < 1e-12, "{mass_diff}");
        let alpha_m0 = text.replace("alpha = 0.0", "alpha = 0.5");
        assert!(RunConfig::from_toml(&alpha_m0).is_err());
    }

    #[test]
    fn snapshot_datum_is_converted() {
        let dir = tempfile::tempdir().unwrap();
        let strong = RunConfig::from_toml(&BASE.replace("\"weak-g\"", "\"strong-f\"")).unwrap();
        let f = strong.initial_state(grid(&strong), Path::new(".")).unwrap();
        SnapshotFile::from_distribution(&f, 0.0).write(&dir.path().join("s.json")).unwrap();
        let text = BASE.replace(
            "family = \"gaussian-bump\"\namplitude = 2.0\ncenter = 1.0\nwidth = 0.5",
            "family = \"from-snapshot\"\npath = \"s.json\"",
        );
        let c = RunConfig::from_toml(&text).unwrap();
        let g = c.initial_state(grid(&c), dir.path()).unwrap();
        assert_eq!(g.kind(), DistributionKind::MassDensity);
        assert_eq!(g, f.to_mass_density().unwrap());
        let mut other = c.clone();
        other.grid.n_nodes = 30;
        assert!(other.initial_state(grid(&other), dir.path()).is_err());
    }
}
