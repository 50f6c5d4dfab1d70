//! Command-line front end: `run`, `classify`, `equilibrium`, `check`, `plot`.

pub mod config;
pub mod output;
pub mod plot;
pub mod snapshot;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::collision::{Distribution, DistributionKind, KernelTables, TableSelection, DEFAULT_TABLE_BUDGET};
use crate::diagnostics::{
    blowup_criterion, condensation_criterion, low_mass_check, mass_below, DetectorParams,
};
use crate::equilibrium::{
    classify, critical_mass, invert_moments, moments_of_equilibrium, EquilibriumParams, MomentPair,
    DEFAULT_CRITICAL_BAND,
};
use crate::error::{Error, Result};
use crate::grid::{EnergyGrid, GridSpec};
use crate::integrator::{run, RunOptions, RunStatus, Scheme};

pub use config::{InitialSpec, OutputSpec, RunConfig};
pub use output::{Manifest, Series};
pub use plot::Panel;
pub use snapshot::SnapshotFile;

/// Default critical band of `classify`; wide enough for inputs given to five digits.
pub const CLI_CRITICAL_BAND: f64 = 1e-4;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NON_FINITE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nordheim", version, about = "Isotropic Nordheim equation solver")]
pub struct Cli {
    /// Worker threads for the collision operator (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify (M, E) against the critical curve and print the equilibrium.
    Classify {
        #[arg(long, allow_hyphen_values = true)]
        mass: f64,
        #[arg(long, allow_hyphen_values = true)]
        energy: f64,
        /// Relative half-width of the critical band.
        #[arg(long, default_value_t = CLI_CRITICAL_BAND)]
        tol: f64,
    },
    /// Print the moments of a Bose–Einstein equilibrium, optionally writing it as a snapshot.
    Equilibrium {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        m0: f64,
        /// Write the equilibrium on a grid to this snapshot file.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        nodes: usize,
        #[arg(long, default_value_t = 20.0)]
        cutoff_energy: f64,
        #[arg(long, default_value_t = 2.0)]
        clustering: f64,
    },
    /// Evaluate the detectors on a saved snapshot.
    Check {
        snapshot: PathBuf,
        #[command(flatten)]
        detectors: DetectorArgs,
        /// Energies R for mass_below(R); repeatable.
        #[arg(long = "mass-below")]
        mass_below: Vec<f64>,
    },
    /// Draw SVG panels from a run directory.
    Plot {
        run_dir: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',')]
        panels: Vec<Panel>,
        /// Log–log axes for the occupation panel.
        #[arg(long)]
        log_log: bool,
        /// Directory for the SVG files (default: `<run_dir>/plots`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub k_star: Option<f64>,
    #[arg(long)]
    pub theta_star: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub rho1: Option<f64>,
    /// Constant K of the low-mass check.
    #[arg(long)]
    pub k: Option<f64>,
}

impl DetectorArgs {
    fn params(&self) -> DetectorParams {
        let d = DetectorParams::default();
        DetectorParams {
            nu: self.nu.unwrap_or(d.nu),
            k_star: self.k_star.unwrap_or(d.k_star),
            theta_star: self.theta_star.unwrap_or(d.theta_star),
            rho0: self.rho0.or(d.rho0),
            rho1: self.rho1.or(d.rho1),
            k: self.k.unwrap_or(d.k),
        }
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Contract(_) | Error::Domain(_) | Error::Parse(_) | Error::Io { .. } => EXIT_INPUT,
        Error::Overflow(_) | Error::Divergence(_) | Error::Numerical { .. } | Error::Resource { .. } => EXIT_RUNTIME,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => Err(Error::Config(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli.command),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    println!("{text}");
    Ok(())
}

pub fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Run { config, out } => cmd_run(config, out.as_deref()),
        Command::Classify { mass, energy, tol } => {
            print_json(&classify_report(*mass, *energy, *tol)?)?;
            Ok(EXIT_OK)
        }
        Command::Equilibrium {
            alpha,
            beta,
            m0,
            snapshot,
            nodes,
            cutoff_energy,
            clustering,
        } => {
            let params = EquilibriumParams::new(*alpha, *beta, *m0)?;
            let moments = moments_of_equilibrium(&params);
            let class = classify(&moments, DEFAULT_CRITICAL_BAND);
            if let Some(path) = snapshot {
                let grid = Arc::new(EnergyGrid::build(&GridSpec::new(*nodes, *cutoff_energy, *clustering))?);
                let f = Distribution::bose_einstein(grid.clone(), &EquilibriumParams::new(*alpha, *beta, 0.0)?)?;
                let g = f.to_mass_density()?;
                let dist = Distribution::mass_density(grid, g.values().to_vec(), *m0)?;
                SnapshotFile::from_distribution(&dist, 0.0).write(path)?;
            }
            print_json(&json!({ "params": params, "moments": moments, "classification": class }))?;
            Ok(EXIT_OK)
        }
        Command::Check {
            snapshot,
            detectors,
            mass_below,
        } => {
            let dist = SnapshotFile::load(snapshot)?.to_distribution()?;
            print_json(&check_report(&dist, &detectors.params(), mass_below)?)?;
            Ok(EXIT_OK)
        }
        Command::Plot {
            run_dir,
            panels,
            log_log,
            out,
        } => {
            let panels = if panels.is_empty() { Panel::ALL.to_vec() } else { panels.clone() };
            let out = out.clone().unwrap_or_else(|| run_dir.join("plots"));
            for path in plot::plot_run(run_dir, &panels, *log_log, &out)? {
                println!("{}", path.display());
            }
            Ok(EXIT_OK)
        }
    }
}

pub fn classify_report(mass: f64, energy: f64, tol: f64) -> Result<serde_json::Value> {
    if !(mass.is_finite() && mass > 0.0 && energy.is_finite() && energy > 0.0) {
        return Err(Error::Domain(format!("M and E must be positive, got M = {mass}, E = {energy}")));
    }
    if !(0.0..1.0).contains(&tol) {
        return Err(Error::Domain(format!("tol must lie in [0, 1), got {tol}")));
    }
    let moments = MomentPair::new(mass, energy);
    let class = classify(&moments, tol);
    let params = invert_moments(&moments)?;
    Ok(json!({
        "mass": mass,
        "energy": energy,
        "critical_mass": critical_mass(energy)?,
        "class": class.class,
        "ratio": class.ratio,
        "equilibrium": params,
    }))
}

pub fn check_report(dist: &Distribution, params: &DetectorParams, radii: &[f64]) -> Result<serde_json::Value> {
    let resolved = params.resolve(dist.grid().cutoff())?;
    let f = dist.continuum_occupation();
    let g = match dist.kind() {
        DistributionKind::MassDensity => dist.clone(),
        DistributionKind::Occupation => dist.to_mass_density()?,
    };
    let below = radii
        .iter()
        .map(|&r| mass_below(&g, r).map(|m| json!({ "r": r, "mass": m })))
        .collect::<Result<Vec<_>>>()?;
    let moments = dist.moments();
    Ok(json!({
        "parameters": resolved,
        "moments": moments,
        "n0": g.condensate(),
        "blowup": blowup_criterion(&f, &resolved)?,
        "condensation": condensation_criterion(&g, &resolved)?,
        "low_mass": low_mass_check(&g, resolved.k, resolved.rho1)?,
        "mass_below": below,
    }))
}

/// Tables needed by a scheme plus the dissipation column.
pub fn tables_for(grid: Arc<EnergyGrid>, scheme: Scheme) -> Result<KernelTables> {
    let which = match scheme {
        Scheme::StrongF => TableSelection::ALL,
        Scheme::WeakG | Scheme::WeakGImplicit => TableSelection::SHELL,
    };
    KernelTables::build_with(grid, which, DEFAULT_TABLE_BUDGET)
}

pub fn run_options(config: &RunConfig) -> Result<RunOptions> {
    Ok(RunOptions {
        scheme: config.scheme,
        detectors: config.detectors.resolve(config.grid.cutoff_energy)?,
        mass_below_r: config.output.mass_below_r.clone(),
        record_every: config.output.record_every,
        record_interval: config.output.record_interval,
        snapshot_times: config.output.snapshot_times.clone(),
        log_floor: config.output.log_floor,
    })
}

fn cmd_run(config_path: &Path, out: Option<&Path>) -> Result<i32> {
    let config = RunConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out_dir = match out {
        Some(dir) => dir.to_path_buf(),
        None => base.join(&config.output.directory),
    };
    let grid = Arc::new(EnergyGrid::build(&config.grid)?);
    let initial = config.initial_state(grid.clone(), base)?;
    let tables = tables_for(grid, config.scheme)?;
    let record = run(&initial, &tables, &config.step, &run_options(&config)?)?;
    let manifest_path = output::write_run(&out_dir, &config, &record)?;
    let last = record.rows.last();
    print_json(&json!({
        "status": record.status,
        "accepted_steps": record.accepted_steps,
        "rejected_steps": record.rejected_steps,
        "final_mass": last.map(|r| r.mass),
        "final_energy": last.map(|r| r.energy),
        "final_n0": last.map(|r| r.n0),
        "manifest": manifest_path,
    }))?;
    Ok(match record.status {
        RunStatus::ReachedNonFinite { t } => {
            eprintln!("error: non-finite state after t = {t}; partial outputs kept in {}", out_dir.display());
            EXIT_NON_FINITE
        }
        _ => EXIT_OK,
    })
}
