//! Bose–Einstein equilibria, their moments and the critical curve.
//!
//! The isotropic equilibria are `m₀ δ(p) + 1/(exp(β(ε+α)) − 1)` with
//! `α ≥ 0`, `β > 0`, `m₀ ≥ 0` and `α·m₀ = 0`. Moments use the
//! momentum-space normalization: `M = 4π∫ f √(2ε) dε`, `E = 4π∫ f √(2ε³) dε`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{polylog, ZETA_3_2, ZETA_5_2};

/// Default half-width of the `Critical` band in [`classify`].
pub const DEFAULT_CRITICAL_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumParams {
    alpha: f64,
    beta: f64,
    m0: f64,
}

impl EquilibriumParams {
    pub fn new(alpha: f64, beta: f64, m0: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Domain(format!("alpha must be ≥ 0, got {alpha}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!("beta must be > 0, got {beta}")));
        }
        if !(m0.is_finite() && m0 >= 0.0) {
            return Err(Error::Domain(format!("m0 must be ≥ 0, got {m0}")));
        }
        if alpha * m0 != 0.0 {
            return Err(Error::Domain(format!(
                "alpha·m0 must vanish, got alpha = {alpha}, m0 = {m0}"
            )));
        }
        Ok(Self { alpha, beta, m0 })
    }

    /// Planck distribution: `α = 0`, `m₀ = 0`.
    pub fn planck(beta: f64) -> Result<Self> {
        Self::new(0.0, beta, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// Fugacity `z = e^{−βα}`.
    pub fn fugacity(&self) -> f64 {
        (-self.beta * self.alpha).exp()
    }

    /// Occupation density of the continuous part.
    pub fn density(&self, energy: f64) -> Result<f64> {
        bose_einstein_density(energy, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mass: f64,
    pub energy: f64,
}

impl MomentPair {
    pub fn new(mass: f64, energy: f64) -> Self {
        Self { mass, energy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityClass {
    pub class: Criticality,
    /// `M / M_c(E)`.
    pub ratio: f64,
}

/// `1 / (exp(β(ε + α)) − 1)`.
pub fn bose_einstein_density(energy: f64, params: &EquilibriumParams) -> Result<f64> {
    let x = params.beta * (energy + params.alpha);
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "Bose–Einstein density has a pole at β(ε+α) = {x}"
        )));
    }
    if x < 1e-300 {
        return Err(Error::Overflow(format!("β(ε+α) = {x} underflows the guard")));
    }
    Ok(1.0 / x.exp_m1())
}

/// Particle and energy densities of an equilibrium (the condensate carries mass only).
pub fn moments_of_equilibrium(params: &EquilibriumParams) -> MomentPair {
    let z = params.fugacity();
    let y = 2.0 * PI / params.beta;
    let li32 = polylog(1.5, z).expect("fugacity lies in (0, 1]");
    let li52 = polylog(2.5, z).expect("fugacity lies in (0, 1]");
    MomentPair {
        mass: params.m0 + y.powf(1.5) * li32,
        energy: 3.0 / (4.0 * PI) * y.powf(2.5) * li52,
    }
}

/// Largest particle density without a condensate at energy density `E`.
pub fn critical_mass(energy: f64) -> Result<f64> {
    if !(energy >= 0.0) || !energy.is_finite() {
        return Err(Error::Domain(format!("energy must be ≥ 0, got {energy}")));
    }
    Ok(critical_coefficient() * energy.powf(0.6))
}

/// `ζ(3/2) ζ(5/2)^{−3/5} (4π/3)^{3/5}`.
pub fn critical_coefficient() -> f64 {
    ZETA_3_2 * ZETA_5_2.powf(-0.6) * (4.0 * PI / 3.0).powf(0.6)
}

pub fn classify(moments: &MomentPair, tol: f64) -> CriticalityClass {
    let mc = critical_coefficient() * moments.energy.powf(0.6);
    let ratio = moments.mass / mc;
    let class = if moments.mass > (1.0 + tol) * mc {
        Criticality::Supercritical
    } else if moments.mass < (1.0 - tol) * mc {
        Criticality::Subcritical
    } else {
        Criticality::Critical
    };
    CriticalityClass { class, ratio }
}

/// Inverse temperature of the Planck distribution with energy density `E`.
fn planck_beta(energy: f64) -> f64 {
    let y = (4.0 * PI * energy / (3.0 * ZETA_5_2)).powf(0.4);
    2.0 * PI / y
}

/// The unique equilibrium with the given particle and energy densities.
pub fn invert_moments(moments: &MomentPair) -> Result<EquilibriumParams> {
    let (m, e) = (moments.mass, moments.energy);
    if !(m.is_finite() && m > 0.0 && e.is_finite() && e > 0.0) {
        return Err(Error::Domain(format!(
            "moments must be positive, got M = {m}, E = {e}"
        )));
    }
    let mc = critical_mass(e)?;
    if m >= mc {
        return EquilibriumParams::new(0.0, planck_beta(e), m - mc);
    }
    let mu = solve_log_fugacity(3.0 / (4.0 * PI) * m.powf(5.0 / 3.0) / e)?;
    let z = (-mu).exp();
    let li32 = polylog(1.5, z)?;
    let y = (m / li32).powf(2.0 / 3.0);
    let beta = 2.0 * PI / y;
    EquilibriumParams::new(mu / beta, beta, 0.0)
}

/// `Li_{3/2}(z)^{5/3} / Li_{5/2}(z)` as a function of `μ = −ln z`; decreasing.
fn shape_ratio(mu: f64) -> f64 {
    let z = (-mu).exp();
    if z == 0.0 {
        return 0.0;
    }
    let a = polylog(1.5, z).expect("z in (0,1]");
    let b = polylog(2.5, z).expect("z in (0,1]");
    a.powf(5.0 / 3.0) / b
}

fn solve_log_fugacity(target: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = (-1.5 * target.ln()).max(1.0);
    let mut tries = 0;
    while shape_ratio(hi) > target {
        hi *= 2.0;
        tries += 1;
        if tries > 60 || !hi.is_finite() {
            return Err(Error::Numerical {
                message: format!("could not bracket shape ratio {target}"),
                lo,
                hi,
            });
        }
    }
    for _ in 0..400 {
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if shape_ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(hi - lo <= 1e-12 * hi.max(1e-300)) {
        return Err(Error::Numerical {
            message: "bisection stalled".into(),
            lo,
            hi,
        });
    }
    // secant polish inside the final bracket
    let (flo, fhi) = (shape_ratio(lo) - target, shape_ratio(hi) - target);
    let mut mu = 0.5 * (lo + hi);
    if flo != fhi {
        let cand = lo - flo * (hi - lo) / (fhi - flo);
        if cand >= lo && cand <= hi {
            mu = cand;
        }
    }
    Ok(mu)
}

/// Mass and energy of `f_s(ε; −R/2, β)` over `[R, L]`.
pub fn truncated_moments(beta: f64, r: f64, l: f64) -> Result<MomentPair> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!("beta must be > 0, got {beta}")));
    }
    if !(r >= 0.0) || !l.is_finite() || r > l {
        return Err(Error::Domain(format!("need 0 ≤ R ≤ L, got R = {r}, L = {l}")));
    }
    if r == l {
        return Ok(MomentPair::new(0.0, 0.0));
    }
    // ε = R + u²; the integrand in u stays bounded even when R = 0
    let umax = (l - r).sqrt();
    let panels = 256;
    let integrand = |u: f64, power: i32| {
        let eps = r + u * u;
        let occ = 1.0 / (beta * (u * u + 0.5 * r)).exp_m1();
        4.0 * PI * 2.0 * u * (2.0 * eps).sqrt() * eps.powi(power) * occ
    };
    let mass = quad::integrate(|u| integrand(u, 0), 0.0, umax, panels, 16);
    let energy = quad::integrate(|u| integrand(u, 1), 0.0, umax, panels, 16);
    Ok(MomentPair::new(mass, energy))
}
