//! Nordheim collision operator.
//!
//! Two discretizations share one set of precomputed tables:
//!
//! * the strong form for the occupation `f`, integrated over `(ε₃, ε₄)` with
//!   `ε₂ = ε₃ + ε₄ − ε₁` read from the piecewise-linear interpolant, and split
//!   into a gain term and a loss rate for the exponential integrator;
//! * the weak form for the mass density `g`, tested against the hat basis on
//!   the extended node list `{0, ε_1, …, ε_n}`. The continuum is represented
//!   by point masses `m_k = w_k g_k` and the condensate by `m_0 = n₀`. Each
//!   shell triple moves mass from nodes `a`, `b` to node `c` and to the two
//!   hats around `ε₄ = ε_a + ε_b − ε_c`, so total mass and energy are
//!   conserved by every single entry.
//!
//! At a zero energy the ratio `Φ/√(ε₁ε₂ε₃)` is replaced by its limit, in
//! which `Φ/√ε → 1` for the vanishing argument. This is how the condensate
//! couples to the continuum, both through the cubic term and through the
//! quadratic term with one partner at `ε = 0`.

mod distribution;
mod tables;

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use distribution::{density_factor, Distribution, DistributionKind};
pub use tables::{
    KernelTables, ShellEntry, ShellTable, StrongTable, TableSelection, DEFAULT_TABLE_BUDGET,
};

/// `8π²/√2`, prefactor of the strong form.
pub const STRONG_PREFACTOR: f64 = 8.0 * PI * PI / SQRT_2;
/// `1/2^{5/2}`, prefactor of the cubic weak term.
pub const CUBIC_WEAK_PREFACTOR: f64 = 0.176_776_695_296_636_9;
/// `π/2`, prefactor of the quadratic weak term.
pub const QUADRATIC_WEAK_PREFACTOR: f64 = PI / 2.0;

/// `min{√ε₁, √ε₂, √ε₃, √ε₄} / √ε₁`.
pub fn kernel_w(e1: f64, e2: f64, e3: f64, e4: f64) -> Result<f64> {
    if !(e1 > 0.0) {
        return Err(Error::Domain(format!(
            "kernel W needs ε₁ > 0, got {e1}; use the mass-density form at ε = 0"
        )));
    }
    if [e2, e3, e4].iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::Domain(format!(
            "kernel W needs non-negative energies, got ({e2}, {e3}, {e4})"
        )));
    }
    Ok(kernel_w_unchecked(e1, e2, e3, e4))
}

pub(crate) fn kernel_w_unchecked(e1: f64, e2: f64, e3: f64, e4: f64) -> f64 {
    let m = e1.min(e2).min(e3).min(e4);
    (m / e1).sqrt()
}

/// `min{√ε₁, √ε₂, √ε₃, √(ε₁ + ε₂ − ε₃)₊}`.
pub fn kernel_phi(e1: f64, e2: f64, e3: f64) -> f64 {
    let e4 = (e1 + e2 - e3).max(0.0);
    e1.min(e2).min(e3).min(e4).max(0.0).sqrt()
}

/// `Φ(ε₁, ε₂, ε₃) / √(ε₁ε₂ε₃)`, extended continuously to a single zero argument.
pub fn kernel_ratio3(e1: f64, e2: f64, e3: f64) -> f64 {
    let zeros = [e1, e2, e3].iter().filter(|&&e| e == 0.0).count();
    match zeros {
        0 => kernel_phi(e1, e2, e3) / (e1 * e2 * e3).sqrt(),
        1 if e3 == 0.0 => 1.0 / (e1 * e2).sqrt(),
        1 => {
            let other = if e1 == 0.0 { e2 } else { e1 };
            if other > e3 {
                1.0 / (other * e3).sqrt()
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

/// `H_φ = φ(ε₃) + φ(ε₁ + ε₂ − ε₃) − φ(ε₁) − φ(ε₂)`.
pub fn h_phi(phi: impl Fn(f64) -> f64, e1: f64, e2: f64, e3: f64) -> f64 {
    let e4 = (e1 + e2 - e3).max(0.0);
    phi(e3) + phi(e4) - phi(e1) - phi(e2)
}

/// Symmetrization `(1/6) Σ_σ H_φ(σ) Φ(σ)` over the permutations of `(ε₁, ε₂, ε₃)`.
pub fn g_phi(phi: impl Fn(f64) -> f64, e1: f64, e2: f64, e3: f64) -> f64 {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let e = [e1, e2, e3];
    let mut sum = 0.0;
    for s in PERMS {
        let (x, y, z) = (e[s[0]], e[s[1]], e[s[2]]);
        let k = kernel_phi(x, y, z);
        if k > 0.0 {
            sum += h_phi(&phi, x, y, z) * k;
        }
    }
    sum / 6.0
}

/// Gain term and loss rate of the strong form.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionRates {
    pub gain: Vec<f64>,
    pub loss_rate: Vec<f64>,
}

impl CollisionRates {
    /// `gain − a f`.
    pub fn net(&self, f: &[f64]) -> Vec<f64> {
        self.gain
            .iter()
            .zip(&self.loss_rate)
            .zip(f)
            .map(|((g, a), f)| g - a * f)
            .collect()
    }
}

/// Rates of the weak mass-density form.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakRates {
    /// `dg_k/dt` at each continuum node.
    pub rates: Vec<f64>,
    /// `dn₀/dt`.
    pub condensate_rate: f64,
    /// Gross mass leaving each continuum node per unit time.
    pub outflow: Vec<f64>,
    /// Gross mass leaving the condensate per unit time.
    pub condensate_outflow: f64,
}

/// Splits the strong-form operator into `gain ≥ 0` and `a ≥ 0`.
pub fn gain_loss_split(dist: &Distribution, tables: &KernelTables) -> Result<CollisionRates> {
    dist.expect_kind(DistributionKind::Occupation)?;
    tables.check_grid(dist.grid())?;
    let table = tables.strong()?;
    let f = dist.values();
    let n = f.len();
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let fi = f[i];
            let mut gain = 0.0;
            let mut loss = 0.0;
            for j in table.offsets[i]..table.offsets[i + 1] {
                let k = table.k[j] as usize;
                let l = table.l[j] as usize;
                let p = table.p[j] as usize;
                let t = table.t[j];
                let f2 = (1.0 - t) * f[p] + t * f[p + 1];
                let fk = f[k];
                let fl = f[l];
                let w = table.weight[j];
                gain += w * fk * fl * (1.0 + fi + f2);
                loss += w * f2 * (1.0 + fk + fl);
            }
            (gain, loss)
        })
        .collect();
    let (gain, loss_rate) = pairs.into_iter().unzip();
    Ok(CollisionRates { gain, loss_rate })
}

/// `∂_t f` at each node from the strong form.
pub fn collision_rhs_strong(dist: &Distribution, tables: &KernelTables) -> Result<Vec<f64>> {
    let rates = gain_loss_split(dist, tables)?;
    Ok(rates.net(dist.values()))
}

/// `(dg/dt, dn₀/dt)` from the weak form tested on the hat basis.
pub fn collision_rhs_weak_g(dist: &Distribution, tables: &KernelTables) -> Result<WeakRates> {
    dist.expect_kind(DistributionKind::MassDensity)?;
    tables.check_grid(dist.grid())?;
    let table = tables.shell()?;
    let grid = dist.grid();
    let w = grid.weights();
    let e = &table.energies;
    let size = e.len();

    let mut mass = Vec::with_capacity(size);
    mass.push(dist.condensate());
    mass.extend(dist.values().iter().zip(w).map(|(g, w)| g * w));
    let mut bracket = Vec::with_capacity(size);
    bracket.push(CUBIC_WEAK_PREFACTOR * mass[0]);
    for k in 1..size {
        bracket.push(CUBIC_WEAK_PREFACTOR * mass[k] + QUADRATIC_WEAK_PREFACTOR * w[k - 1] * e[k].sqrt());
    }

    let partials: Vec<Option<(Vec<f64>, Vec<f64>)>> = (0..size)
        .into_par_iter()
        .map(|a| {
            let ma = mass[a];
            if ma == 0.0 {
                return None;
            }
            let mut rate = vec![0.0; size];
            let mut out = vec![0.0; size];
            for j in table.offsets[a]..table.offsets[a + 1] {
                let b = table.b[j] as usize;
                let c = table.c[j] as usize;
                let x = table.k3[j] * ma * mass[b] * bracket[c];
                if x == 0.0 {
                    continue;
                }
                let p = table.p[j] as usize;
                let t = table.t[j];
                rate[c] += x;
                rate[p] += (1.0 - t) * x;
                rate[p + 1] += t * x;
                rate[a] -= x;
                rate[b] -= x;
                out[a] += x;
                out[b] += x;
            }
            Some((rate, out))
        })
        .collect();

    let mut rate = vec![0.0; size];
    let mut out = vec![0.0; size];
    for (r, o) in partials.into_iter().flatten() {
        for k in 0..size {
            rate[k] += r[k];
            out[k] += o[k];
        }
    }
    let rates = (1..size).map(|k| rate[k] / w[k - 1]).collect();
    Ok(WeakRates {
        rates,
        condensate_rate: rate[0],
        outflow: out[1..].to_vec(),
        condensate_outflow: out[0],
    })
}

/// Weak-form rates together with their Jacobian in the extended mass
/// variables `m_0 = n₀`, `m_k = w_k g_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakJacobian {
    pub rates: WeakRates,
    /// `dm/dt` on the extended nodes.
    pub mass_rates: Vec<f64>,
    /// Row-major `∂(dm_i/dt)/∂m_j`, size `(n+1)²`.
    pub jacobian: Vec<f64>,
    pub size: usize,
    /// Extended energies `e_0 = 0, e_k = ε_k`.
    pub energies: Vec<f64>,
}

/// Number of consecutive `a` rows assembled into one partial Jacobian.
const JACOBIAN_CHUNK: usize = 8;

/// [`collision_rhs_weak_g`] plus the exact Jacobian of the mass rates.
///
/// Every column of the Jacobian satisfies the same mass and energy identities
/// as the rates, so a linearly implicit step conserves both.
pub fn collision_jacobian_weak_g(dist: &Distribution, tables: &KernelTables) -> Result<WeakJacobian> {
    let rates = collision_rhs_weak_g(dist, tables)?;
    let table = tables.shell()?;
    let w = dist.grid().weights();
    let e = &table.energies;
    let size = e.len();

    let mut mass = Vec::with_capacity(size);
    mass.push(dist.condensate());
    mass.extend(dist.values().iter().zip(w).map(|(g, w)| g * w));
    let mut bracket = Vec::with_capacity(size);
    bracket.push(CUBIC_WEAK_PREFACTOR * mass[0]);
    for k in 1..size {
        bracket.push(CUBIC_WEAK_PREFACTOR * mass[k] + QUADRATIC_WEAK_PREFACTOR * w[k - 1] * e[k].sqrt());
    }

    let chunks: Vec<Vec<f64>> = (0..size.div_ceil(JACOBIAN_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut jac = vec![0.0; size * size];
            let a_end = ((chunk + 1) * JACOBIAN_CHUNK).min(size);
            for a in chunk * JACOBIAN_CHUNK..a_end {
                for j in table.offsets[a]..table.offsets[a + 1] {
                    let b = table.b[j] as usize;
                    let c = table.c[j] as usize;
                    let k3 = table.k3[j];
                    let d_a = k3 * mass[b] * bracket[c];
                    let d_b = k3 * mass[a] * bracket[c];
                    let d_c = k3 * mass[a] * mass[b] * CUBIC_WEAK_PREFACTOR;
                    if d_a == 0.0 && d_b == 0.0 && d_c == 0.0 {
                        continue;
                    }
                    let p = table.p[j] as usize;
                    let t = table.t[j];
                    for (row, coef) in [(c, 1.0), (p, 1.0 - t), (p + 1, t), (a, -1.0), (b, -1.0)] {
                        let r = &mut jac[row * size..(row + 1) * size];
                        r[a] += coef * d_a;
                        r[b] += coef * d_b;
                        r[c] += coef * d_c;
                    }
                }
            }
            jac
        })
        .collect();
    let mut jacobian = vec![0.0; size * size];
    for part in &chunks {
        for (acc, v) in jacobian.iter_mut().zip(part) {
            *acc += v;
        }
    }

    let mut mass_rates = Vec::with_capacity(size);
    mass_rates.push(rates.condensate_rate);
    mass_rates.extend(rates.rates.iter().zip(w).map(|(r, w)| r * w));
    Ok(WeakJacobian {
        rates,
        mass_rates,
        jacobian,
        size,
        energies: e.clone(),
    })
}
