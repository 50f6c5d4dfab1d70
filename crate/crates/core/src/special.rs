//! Riemann zeta and polylogarithm on the real segment `z ∈ [0, 1]`.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Even-index Bernoulli numbers `B_2, B_4, …, B_24`.
const BERNOULLI_EVEN: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

const EM_TERMS: usize = 20;

/// Riemann zeta function for real `x ≠ 1`.
pub fn zeta(x: f64) -> Result<f64> {
    if x == 1.0 {
        return Err(Error::Divergence("zeta has a pole at 1".into()));
    }
    if !x.is_finite() {
        return Err(Error::Domain(format!("zeta argument {x}")));
    }
    Ok(zeta_unchecked(x))
}

fn zeta_unchecked(x: f64) -> f64 {
    if x == 0.0 {
        return -0.5;
    }
    if x < 0.5 {
        // reflection: ζ(x) = 2^x π^(x−1) sin(πx/2) Γ(1−x) ζ(1−x)
        if x < 0.0 && x.fract() == 0.0 && (x as i64) % 2 == 0 {
            return 0.0;
        }
        let s = 1.0 - x;
        return 2f64.powf(x) * PI.powf(x - 1.0) * (0.5 * PI * x).sin() * gamma(s) * zeta_unchecked(s);
    }
    euler_maclaurin_zeta(x)
}

fn euler_maclaurin_zeta(x: f64) -> f64 {
    let n = EM_TERMS as f64;
    let mut head = 0.0;
    for k in (1..EM_TERMS).rev() {
        head += (k as f64).powf(-x);
    }
    let mut tail = n.powf(1.0 - x) / (x - 1.0) + 0.5 * n.powf(-x);
    // rising product x(x+1)…(x+2j−2) / (2j)! · N^(−x−2j+1)
    let mut rising = x;
    let mut fact = 2.0;
    let mut power = n.powf(-x - 1.0);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * rising * power;
        tail += term;
        let m = 2.0 * (j as f64 + 1.0);
        rising *= (x + m - 1.0) * (x + m);
        fact *= (m + 1.0) * (m + 2.0);
        power /= n * n;
    }
    head + tail
}

/// `Li_s(z) = Σ_{k≥1} z^k / k^s` for `s > 1`, `z ∈ [0, 1]`.
///
/// Away from `z = 1` the series is summed directly with the geometric tail
/// bound `z^{K+1} / ((K+1)^s (1 − z))`. Close to `z = 1` (`μ = −ln z < 1`) the
/// expansion `Γ(1−s) μ^{s−1} + Σ_k ζ(s−k) (−μ)^k / k!` is used instead, with
/// the logarithmic form for integer `s`.
pub fn polylog(s: f64, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("polylog argument z = {z} outside [0, 1]")));
    }
    if !(s.is_finite() && s > 1.0) {
        return Err(if z == 1.0 {
            Error::Divergence(format!("Li_{s}(1) diverges"))
        } else {
            Error::Domain(format!("polylog order s = {s} must exceed 1"))
        });
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == 1.0 {
        return zeta(s);
    }
    let mu = -z.ln();
    if mu >= 1.0 {
        Ok(direct_series(s, z))
    } else {
        Ok(near_one(s, mu))
    }
}

fn direct_series(s: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut zk = 1.0;
    for k in 1..10_000u32 {
        zk *= z;
        let kf = k as f64;
        sum += zk / kf.powf(s);
        let tail = zk * z / ((kf + 1.0).powf(s) * (1.0 - z));
        if tail <= 1e-17 * sum {
            break;
        }
    }
    sum
}

fn near_one(s: f64, mu: f64) -> f64 {
    let n = s.round();
    let integer = (s - n).abs() < 1e-12;
    let mut sum = 0.0;
    let mut coeff = 1.0; // (−μ)^k / k!
    for k in 0..60usize {
        let kf = k as f64;
        if k > 0 {
            coeff *= -mu / kf;
        }
        let arg = s - kf;
        if integer && (arg - 1.0).abs() < 0.5 {
            let harmonic: f64 = (1..k + 1).map(|j| 1.0 / j as f64).sum();
            sum += coeff * (harmonic - mu.ln());
        } else {
            let term = coeff * zeta_unchecked(arg);
            sum += term;
            // ζ vanishes at negative even integers; only stop on a genuinely small term
            if k > 8 && term != 0.0 && term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
    }
    if !integer {
        sum += gamma(1.0 - s) * mu.powf(s - 1.0);
    }
    sum
}

pub const ZETA_3_2: f64 = 2.612_375_348_685_488;
pub const ZETA_5_2: f64 = 1.341_487_257_250_917;
