//! Time stepping.
//!
//! The occupation form uses frozen-coefficient exponential Euler on the
//! gain/loss split, which keeps `f ≥ 0` for any step. The mass-density form
//! uses explicit Euler on the conservative weak rates; the step is limited so
//! that no node loses more than a `safety` fraction of its mass, and any
//! residual negative value is clipped with the deficit taken from the
//! condensate.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::collision::{
    collision_jacobian_weak_g, collision_rhs_weak_g, gain_loss_split, CollisionRates, Distribution,
    DistributionKind, KernelTables, WeakJacobian,
};
use crate::diagnostics::{blowup_criterion, condensation_criterion, low_mass_check, mass_below, ResolvedDetectors};
use crate::entropy::{dissipation_d, entropy_s};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    StrongF,
    WeakG,
    /// Mass-density form with a linearly implicit Euler step.
    WeakGImplicit,
}

impl Scheme {
    pub fn kind(self) -> DistributionKind {
        match self {
            Scheme::StrongF => DistributionKind::Occupation,
            Scheme::WeakG | Scheme::WeakGImplicit => DistributionKind::MassDensity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControl {
    pub dt: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_change")]
    pub max_relative_change: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub stop_time: f64,
    /// Defaults to `10⁶ ×` the initial `L∞` norm.
    #[serde(default)]
    pub blowup_linf_threshold: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_safety() -> f64 {
    0.5
}

fn default_change() -> f64 {
    0.02
}

fn default_max_steps() -> u64 {
    10_000_000
}

impl StepControl {
    pub fn new(dt: f64, dt_min: f64, dt_max: f64, stop_time: f64) -> Self {
        Self {
            dt,
            safety: default_safety(),
            max_relative_change: default_change(),
            dt_min,
            dt_max,
            stop_time,
            blowup_linf_threshold: None,
            max_steps: default_max_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt <= self.dt_max && self.dt_max.is_finite()) {
            return Err(Error::Config(format!(
                "step sizes must satisfy 0 < dt_min ≤ dt ≤ dt_max, got {} ≤ {} ≤ {}",
                self.dt_min, self.dt, self.dt_max
            )));
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::Config(format!("safety must lie in (0, 1), got {}", self.safety)));
        }
        if !(self.max_relative_change > 0.0 && self.max_relative_change.is_finite()) {
            return Err(Error::Config(format!(
                "max_relative_change must be positive, got {}",
                self.max_relative_change
            )));
        }
        if !(self.stop_time >= 0.0 && self.stop_time.is_finite()) {
            return Err(Error::Config(format!("stop_time must be ≥ 0, got {}", self.stop_time)));
        }
        if let Some(b) = self.blowup_linf_threshold {
            if !(b > 0.0) {
                return Err(Error::Config(format!("blow-up threshold must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

/// Next step size from the measured relative change and the largest loss rate.
pub fn adapt_dt(prev: &StepControl, measured_relative_change: f64, a_max: f64) -> StepControl {
    let mut dt = if measured_relative_change > 0.0 {
        prev.safety * prev.dt * prev.max_relative_change / measured_relative_change
    } else {
        prev.dt_max
    };
    if a_max > 0.0 {
        dt = dt.min(prev.safety / a_max);
    }
    StepControl {
        dt: dt.clamp(prev.dt_min, prev.dt_max),
        ..*prev
    }
}

/// `f e^{−a dt} + (gain/a)(1 − e^{−a dt})` at each node.
pub fn step_exponential(dist: &Distribution, tables: &KernelTables, dt: f64) -> Result<Distribution> {
    let rates = gain_loss_split(dist, tables)?;
    exponential_update(dist, &rates, dt)
}

fn exponential_update(dist: &Distribution, rates: &CollisionRates, dt: f64) -> Result<Distribution> {
    let values = dist
        .values()
        .iter()
        .zip(rates.gain.iter().zip(&rates.loss_rate))
        .map(|(&f, (&gain, &a))| {
            let x = a * dt;
            // (1 − e^{−x})/a = dt · (−expm1(−x))/x, which tends to dt as x → 0
            let phi1 = if x > 1e-12 { -(-x).exp_m1() / x } else { 1.0 - 0.5 * x };
            f * (-x).exp() + gain * dt * phi1
        })
        .collect();
    Distribution::new(dist.grid().clone(), DistributionKind::Occupation, values, 0.0)
}

/// Result of one explicit weak-form step.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakStep {
    pub dist: Distribution,
    /// Mass moved out of the condensate to lift negative nodes to zero.
    pub clipped_mass: f64,
}

/// `g + dt·rates`, `n₀ + dt·dn₀/dt`, then clipping of negative nodes.
pub fn step_weak_g(dist: &Distribution, tables: &KernelTables, dt: f64) -> Result<WeakStep> {
    let rates = collision_rhs_weak_g(dist, tables)?;
    weak_update(dist, &rates.rates, rates.condensate_rate, dt)
}

fn weak_update(dist: &Distribution, rates: &[f64], condensate_rate: f64, dt: f64) -> Result<WeakStep> {
    let values: Vec<f64> = dist.values().iter().zip(rates).map(|(g, r)| g + dt * r).collect();
    let n0 = dist.condensate() + dt * condensate_rate;
    finish_weak(dist, values, n0, dt)
}

/// Solves `(I − dt·J) Δm = dt·dm/dt` on the extended nodes, then clips.
///
/// The columns of `J` carry the conservation identities of the rates, so
/// mass and energy are conserved up to the accuracy of the linear solve.
pub fn step_weak_g_implicit(dist: &Distribution, tables: &KernelTables, dt: f64) -> Result<WeakStep> {
    let jac = collision_jacobian_weak_g(dist, tables)?;
    implicit_update(dist, &jac, dt)
}

fn implicit_update(dist: &Distribution, jac: &WeakJacobian, dt: f64) -> Result<WeakStep> {
    let size = jac.size;
    let matrix = DMatrix::from_fn(size, size, |i, j| {
        let v = -dt * jac.jacobian[i * size + j];
        if i == j {
            1.0 + v
        } else {
            v
        }
    });
    let rhs = DVector::from_iterator(size, jac.mass_rates.iter().map(|r| dt * r));
    let delta = matrix.lu().solve(&rhs).ok_or_else(|| Error::Numerical {
        message: "singular matrix in the implicit weak-form step".into(),
        lo: 0.0,
        hi: dt,
    })?;
    // Every term of the condensate row carries n₀ except the rare direct feed,
    // so solving that row for Δn₀ keeps n₀ accurate relative to itself; the
    // LU value is only accurate relative to the whole state.
    let row = &jac.jacobian[..size];
    let coupled: f64 = (1..size).map(|j| row[j] * delta[j]).sum();
    let delta0 = dt * (jac.mass_rates[0] + coupled) / (1.0 - dt * row[0]);
    let mut delta: Vec<f64> = delta.iter().copied().collect();
    delta[0] = delta0;
    remove_drift(&mut delta, &jac.energies);
    let w = dist.grid().weights();
    let n0 = dist.condensate() + delta[0];
    let values = dist
        .values()
        .iter()
        .zip(w)
        .enumerate()
        .map(|(k, (g, w))| g + delta[k + 1] / w)
        .collect();
    finish_weak(dist, values, n0, dt)
}

/// Removes the round-off mass and energy imbalance of an exactly conservative
/// increment, spreading the correction over the continuum in proportion to `|Δm_k|`.
fn remove_drift(delta: &mut [f64], energies: &[f64]) {
    let mass: f64 = delta.iter().sum();
    let energy: f64 = delta.iter().zip(energies).map(|(d, e)| d * e).sum();
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (d, e) in delta.iter().zip(energies).skip(1) {
        let a = d.abs();
        s0 += a;
        s1 += a * e;
        s2 += a * e * e;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det > 0.0) || !(det.is_finite()) {
        return;
    }
    // Σ|Δ_k|(λ₀ + λ₁e_k)·(1, e_k) = (mass, energy)
    let l0 = (mass * s2 - energy * s1) / det;
    let l1 = (energy * s0 - mass * s1) / det;
    for (d, e) in delta.iter_mut().zip(energies).skip(1) {
        *d -= d.abs() * (l0 + l1 * e);
    }
}

fn finish_weak(dist: &Distribution, mut values: Vec<f64>, mut n0: f64, dt: f64) -> Result<WeakStep> {
    let w = dist.grid().weights();
    if !values.iter().all(|v| v.is_finite()) || !n0.is_finite() {
        return Err(Error::Numerical {
            message: "non-finite value in the weak-form update".into(),
            lo: 0.0,
            hi: dt,
        });
    }
    let mut deficit = 0.0;
    for (v, w) in values.iter_mut().zip(w) {
        if *v < 0.0 {
            deficit -= *v * w;
            *v = 0.0;
        }
    }
    if n0 < 0.0 {
        deficit -= n0;
        n0 = 0.0;
    }
    if deficit > 0.0 {
        // take the deficit from the condensate, then proportionally from the continuum
        let from_condensate = deficit.min(n0);
        n0 -= from_condensate;
        let rest = deficit - from_condensate;
        if rest > 0.0 {
            let continuum: f64 = values.iter().zip(w).map(|(v, w)| v * w).sum();
            if continuum > rest {
                let scale = 1.0 - rest / continuum;
                values.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
    Ok(WeakStep {
        dist: Distribution::new(dist.grid().clone(), DistributionKind::MassDensity, values, n0)?,
        clipped_mass: deficit,
    })
}

/// Clipped mass, relative to the total, above which a step is retried with a smaller `dt`.
pub const CLIP_TOLERANCE: f64 = 1e-12;

/// What the run loop records besides the state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub scheme: Scheme,
    pub detectors: ResolvedDetectors,
    /// Energies `R` for the `mass_below_R` columns.
    pub mass_below_r: Vec<f64>,
    /// Record every n-th accepted step (1 records every step).
    pub record_every: u64,
    /// When set, record the first accepted step at or after each multiple of this interval instead.
    pub record_interval: Option<f64>,
    /// Times at which the state is saved; steps are shortened to land on them.
    pub snapshot_times: Vec<f64>,
    pub log_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub energy: f64,
    pub linf: f64,
    pub entropy: f64,
    pub dissipation: f64,
    pub clamped_fraction: f64,
    pub n0: f64,
    pub mass_below: Vec<f64>,
    pub blowup_value: f64,
    pub condensation_value: f64,
    pub low_mass_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    ReachedEnd { t: f64 },
    BlowupDetected { t: f64 },
    StepUnderflow { t: f64 },
    ReachedNonFinite { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub dist: Distribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<DiagnosticsRow>,
    pub status: RunStatus,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    /// First recorded time with `n₀ > 0`.
    pub first_condensate_time: Option<f64>,
    pub total_clipped_mass: f64,
    pub snapshots: Vec<Snapshot>,
    /// Last finite state.
    pub final_state: Distribution,
}

/// Diagnostics of one state.
pub fn diagnostics_row(
    dist: &Distribution,
    tables: &KernelTables,
    options: &RunOptions,
    t: f64,
    dt: f64,
) -> Result<DiagnosticsRow> {
    let moments = dist.moments();
    let f = dist.continuum_occupation();
    let g = match dist.kind() {
        DistributionKind::MassDensity => dist.clone(),
        DistributionKind::Occupation => dist.to_mass_density()?,
    };
    let (dissipation, clamped_fraction) = match tables.shell() {
        Ok(_) => {
            let d = dissipation_d(&f, tables, options.log_floor)?;
            (d.value, d.clamped_fraction)
        }
        Err(_) => (f64::NAN, f64::NAN),
    };
    let mass_below = options
        .mass_below_r
        .iter()
        .map(|&r| mass_below(&g, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsRow {
        t,
        dt,
        mass: moments.mass,
        energy: moments.energy,
        linf: f.linf(),
        entropy: entropy_s(&f),
        dissipation,
        clamped_fraction,
        n0: g.condensate(),
        mass_below,
        blowup_value: blowup_criterion(&f, &options.detectors)?.value,
        condensation_value: condensation_criterion(&g, &options.detectors)?.value,
        low_mass_margin: low_mass_check(&g, options.detectors.k, options.detectors.rho1)?.margin,
    })
}

enum Proposal {
    Strong(CollisionRates),
    Weak { rates: Vec<f64>, condensate_rate: f64 },
    Implicit(WeakJacobian),
}

/// Runs `initial` to `control.stop_time` or until the run cannot continue.
pub fn run(
    initial: &Distribution,
    tables: &KernelTables,
    control: &StepControl,
    options: &RunOptions,
) -> Result<RunRecord> {
    control.validate()?;
    initial.expect_kind(options.scheme.kind())?;
    if options.record_every == 0 {
        return Err(Error::Config("record_every must be at least 1".into()));
    }
    if let Some(i) = options.record_interval {
        if !(i > 0.0) {
            return Err(Error::Config(format!("record_interval must be positive, got {i}")));
        }
    }

    let mut snapshot_times: Vec<f64> = options
        .snapshot_times
        .iter()
        .copied()
        .filter(|&s| s >= 0.0 && s <= control.stop_time)
        .collect();
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();
    let mut next_snapshot = 0;

    let initial_linf = initial.linf();
    let total_mass = initial.moments().mass;
    let threshold = control
        .blowup_linf_threshold
        .unwrap_or(1e6 * initial_linf.max(f64::MIN_POSITIVE));

    let mut state = initial.clone();
    let mut ctl = *control;
    let mut t = 0.0f64;
    let mut rows = vec![diagnostics_row(&state, tables, options, t, 0.0)?];
    let mut snapshots = Vec::new();
    while next_snapshot < snapshot_times.len() && snapshot_times[next_snapshot] <= 0.0 {
        snapshots.push(Snapshot { t, dist: state.clone() });
        next_snapshot += 1;
    }
    let mut first_condensate_time = (state.condensate() > 0.0).then_some(0.0);
    let mut accepted = 0u64;
    let mut rejected = 0u64;
    let mut clipped_total = 0.0;
    let mut next_record = options.record_interval;
    let mut recorded_last = true;

    let status = loop {
        if t >= control.stop_time {
            break RunStatus::ReachedEnd { t };
        }
        if accepted + rejected >= control.max_steps {
            break RunStatus::StepUnderflow { t };
        }

        let (proposal, a_max) = match options.scheme {
            Scheme::StrongF => {
                let r = gain_loss_split(&state, tables)?;
                let a_max = r.loss_rate.iter().copied().fold(0.0, f64::max);
                (Proposal::Strong(r), a_max)
            }
            Scheme::WeakG => {
                let r = collision_rhs_weak_g(&state, tables)?;
                let w = state.grid().weights();
                let mut a_max: f64 = 0.0;
                for ((&out, &g), &w) in r.outflow.iter().zip(state.values()).zip(w) {
                    let m = g * w;
                    if m > 0.0 {
                        a_max = a_max.max(out / m);
                    }
                }
                if state.condensate() > 0.0 {
                    a_max = a_max.max(r.condensate_outflow / state.condensate());
                }
                (
                    Proposal::Weak {
                        rates: r.rates,
                        condensate_rate: r.condensate_rate,
                    },
                    a_max,
                )
            }
            // no stiffness guard: the implicit step is limited by accuracy only
            Scheme::WeakGImplicit => (Proposal::Implicit(collision_jacobian_weak_g(&state, tables)?), 0.0),
        };
        if a_max > 0.0 {
            ctl.dt = ctl.dt.min(ctl.safety / a_max).max(ctl.dt_min);
        }

        // try the step, shrinking dt while the change exceeds twice the target
        let (new_state, dt_used, measured, clipped) = loop {
            let mut dt = ctl.dt.min(control.stop_time - t);
            if next_snapshot < snapshot_times.len() {
                dt = dt.min(snapshot_times[next_snapshot] - t);
            }
            let (candidate, clipped) = match &proposal {
                Proposal::Strong(r) => (exponential_update(&state, r, dt), 0.0),
                Proposal::Weak { rates, condensate_rate } => match weak_update(&state, rates, *condensate_rate, dt) {
                    Ok(step) => (Ok(step.dist), step.clipped_mass),
                    Err(e) => (Err(e), 0.0),
                },
                Proposal::Implicit(jac) => match implicit_update(&state, jac, dt) {
                    Ok(step) => (Ok(step.dist), step.clipped_mass),
                    Err(e) => (Err(e), 0.0),
                },
            };
            let candidate = match candidate {
                Ok(c) if c.values().iter().all(|v| v.is_finite()) => c,
                _ => {
                    let record = finish(rows, RunStatus::ReachedNonFinite { t }, accepted, rejected, first_condensate_time, clipped_total, snapshots, state);
                    return Ok(record);
                }
            };
            let measured = relative_change(&state, &candidate);
            let over_clipped = clipped > CLIP_TOLERANCE * total_mass;
            if (measured > 2.0 * ctl.max_relative_change || over_clipped) && dt > ctl.dt_min {
                let measured = if over_clipped { measured.max(4.0 * ctl.max_relative_change) } else { measured };
                rejected += 1;
                ctl = adapt_dt(&StepControl { dt, ..ctl }, measured, a_max);
                continue;
            }
            break (candidate, dt, measured, clipped);
        };

        t += dt_used;
        if next_snapshot < snapshot_times.len() && t >= snapshot_times[next_snapshot] {
            t = snapshot_times[next_snapshot];
        }
        if (control.stop_time - t).abs() <= 1e-12 * control.stop_time.max(1.0) {
            t = control.stop_time;
        }
        state = new_state;
        accepted += 1;
        clipped_total += clipped;
        if first_condensate_time.is_none() && state.condensate() > 0.0 {
            first_condensate_time = Some(t);
        }

        let take_snapshot = next_snapshot < snapshot_times.len() && t >= snapshot_times[next_snapshot];
        let record = match next_record {
            Some(at) if t >= at => {
                let interval = options.record_interval.expect("interval set");
                next_record = Some(((t / interval).floor() + 1.0) * interval);
                true
            }
            Some(_) => false,
            None => accepted.is_multiple_of(options.record_every),
        };
        let at_end = t >= control.stop_time;
        recorded_last = record || at_end || take_snapshot;
        if recorded_last {
            rows.push(diagnostics_row(&state, tables, options, t, dt_used)?);
        }
        while next_snapshot < snapshot_times.len() && t >= snapshot_times[next_snapshot] {
            snapshots.push(Snapshot { t, dist: state.clone() });
            next_snapshot += 1;
        }

        let linf = state.linf();
        if linf >= threshold && ctl.dt <= ctl.dt_min {
            if !recorded_last {
                rows.push(diagnostics_row(&state, tables, options, t, dt_used)?);
                recorded_last = true;
            }
            break RunStatus::BlowupDetected { t };
        }
        ctl = adapt_dt(&StepControl { dt: dt_used.max(ctl.dt_min), ..ctl }, measured, a_max);
        if t + ctl.dt == t {
            break RunStatus::StepUnderflow { t };
        }
    };
    if !recorded_last {
        let dt = rows.last().map_or(0.0, |r| r.dt);
        rows.push(diagnostics_row(&state, tables, options, t, dt)?);
    }
    Ok(finish(rows, status, accepted, rejected, first_condensate_time, clipped_total, snapshots, state))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    rows: Vec<DiagnosticsRow>,
    status: RunStatus,
    accepted_steps: u64,
    rejected_steps: u64,
    first_condensate_time: Option<f64>,
    total_clipped_mass: f64,
    snapshots: Vec<Snapshot>,
    final_state: Distribution,
) -> RunRecord {
    RunRecord {
        rows,
        status,
        accepted_steps,
        rejected_steps,
        first_condensate_time,
        total_clipped_mass,
        snapshots,
        final_state,
    }
}

/// Mass-weighted relative `L¹` change between two states of the same kind.
fn relative_change(old: &Distribution, new: &Distribution) -> f64 {
    let grid = old.grid();
    let (a, b) = (old.mass_values(), new.mass_values());
    let mut diff = (old.condensate() - new.condensate()).abs();
    let mut total = old.condensate();
    for ((x, y), w) in a.iter().zip(&b).zip(grid.weights()) {
        diff += (x - y).abs() * w;
        total += x * w;
    }
    if total > 0.0 {
        diff / total
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}
