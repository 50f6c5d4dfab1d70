//! Entropy `S[f] = ∫ [(1+f) ln(1+f) − f ln f] √ε dε` and its dissipation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{Distribution, KernelTables, STRONG_PREFACTOR};
use crate::error::Result;

/// Default floor applied inside the logarithms of the dissipation.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub s: f64,
    pub d: f64,
    pub clamped_fraction: f64,
}

/// `(1+f) ln(1+f) − f ln f`, written as `f ln(1 + 1/f) + ln(1 + f)`.
pub fn entropy_density(f: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    if f < 1e-8 {
        // 1/f overflows for subnormal f
        return (1.0 + f) * f.ln_1p() - f * f.ln();
    }
    f * (1.0 / f).ln_1p() + f.ln_1p()
}

/// `Q = f/(1+f)`.
pub fn q_ratio(f: f64) -> f64 {
    if f.is_infinite() {
        return 1.0;
    }
    f / (1.0 + f)
}

/// Entropy of the continuum part of `dist`.
pub fn entropy_s(dist: &Distribution) -> f64 {
    let f = dist.occupation_values();
    let grid = dist.grid();
    grid.nodes()
        .iter()
        .zip(grid.weights())
        .zip(&f)
        .map(|((&e, &w), &f)| w * e.sqrt() * entropy_density(f))
        .sum()
}

/// Dissipation value and the fraction of shell points where the floor was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    pub value: f64,
    pub clamped_fraction: f64,
}

/// `D = (C/4) Σ w₁w₂w₃ Φ · [F₁F₂(1+F₃)(1+F₄) − F₃F₄(1+F₁)(1+F₂)] · [ln Q₁₂ − ln Q₃₄]`
/// over the continuum shell triples, with `C = 8π²/√2`.
pub fn dissipation_d(dist: &Distribution, tables: &KernelTables, floor: f64) -> Result<Dissipation> {
    tables.check_grid(dist.grid())?;
    let table = tables.shell()?;
    let w = dist.grid().weights();
    let mut f = vec![0.0];
    f.extend(dist.occupation_values());
    // the condensate slot of the extended list carries no occupation; ε₄ below
    // the first node reads the first node's value
    f[0] = f[1];
    let log_q: Vec<f64> = f.iter().map(|&x| x.max(floor).ln() - x.ln_1p()).collect();
    let size = f.len();

    let partials: Vec<(f64, usize, usize)> = (1..size)
        .into_par_iter()
        .map(|a| {
            let mut sum = 0.0;
            let mut clamped = 0usize;
            let mut points = 0usize;
            for j in table.offsets[a]..table.offsets[a + 1] {
                let b = table.b[j] as usize;
                let c = table.c[j] as usize;
                let phi = table.phi[j];
                if c == 0 || phi == 0.0 {
                    continue;
                }
                let p = table.p[j] as usize;
                let t = table.t[j];
                let f4 = (1.0 - t) * f[p] + t * f[p + 1];
                let (f1, f2, f3) = (f[a], f[b], f[c]);
                let x = f1 * f2 * (1.0 + f3) * (1.0 + f4) - f3 * f4 * (1.0 + f1) * (1.0 + f2);
                let y = log_q[a] + log_q[b] - log_q[c] - (f4.max(floor).ln() - f4.ln_1p());
                points += 1;
                if f1 < floor || f2 < floor || f3 < floor || f4 < floor {
                    clamped += 1;
                }
                let mult = if a < b { 2.0 } else { 1.0 };
                let xy = (x * y).max(0.0);
                sum += mult * w[a - 1] * w[b - 1] * w[c - 1] * phi * xy;
            }
            (sum, clamped, points)
        })
        .collect();

    let mut value = 0.0;
    let mut clamped = 0;
    let mut points = 0;
    for (s, c, p) in partials {
        value += s;
        clamped += c;
        points += p;
    }
    Ok(Dissipation {
        value: 0.25 * STRONG_PREFACTOR * value,
        clamped_fraction: if points == 0 { 0.0 } else { clamped as f64 / points as f64 },
    })
}

/// `S`, `D` and the clamped fraction in one report.
pub fn entropy_report(dist: &Distribution, tables: &KernelTables, floor: f64) -> Result<EntropyReport> {
    let d = dissipation_d(dist, tables, floor)?;
    Ok(EntropyReport {
        s: entropy_s(dist),
        d: d.value,
        clamped_fraction: d.clamped_fraction,
    })
}

#[cfg(test)]
mod tests {
    #[test]
    fn entropy_density_is_finite_for_tiny_values() {
        for f in [1e-320, 1e-300, 1e-20, 1e-9] {
            let s = super::entropy_density(f);
            assert!(s.is_finite() && s > 0.0, "{f}: {s}");
            // leading terms f(1 − ln f) + f²/2
            let expect = f * (1.0 - f.ln()) + 0.5 * f * f;
            assert!((s - expect).abs() <= 1e-12 * expect, "{f}: {s} vs {expect}");
        }
        let (a, b) = (super::entropy_density(1e-8 * (1.0 - 1e-15)), super::entropy_density(1e-8));
        assert!((a - b).abs() < 1e-14 * b);
    }

    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::collision::{collision_rhs_strong, TableSelection};
    use crate::equilibrium::EquilibriumParams;
    use crate::grid::{EnergyGrid, GridSpec};
    use crate::quad;

    fn naive_density(f: f64) -> f64 {
        (1.0 + f) * (1.0 + f).ln() - f * f.ln()
    }

    #[test]
    fn density_matches_definition() {
        assert_eq!(entropy_density(0.0), 0.0);
        for f in [1e-3, 0.1, 1.0, 7.5, 1e3] {
            let a = entropy_density(f);
            let b = naive_density(f);
            assert!((a - b).abs() <= 1e-13 * b, "f={f}: {a} vs {b}");
        }
        // small f: s ≈ f(1 − ln f), large f: s ≈ ln f + 1
        for f in [1e-15, 1e-10] {
            let s = entropy_density(f);
            let approx = f * (1.0 - f.ln()) + 0.5 * f * f;
            assert!((s - approx).abs() <= 1e-12 * s);
        }
        for f in [1e10f64, 1e15] {
            let s = entropy_density(f);
            let approx = f.ln() + 1.0 + 0.5 / f;
            assert!((s - approx).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn q_ratio_examples() {
        assert_eq!(q_ratio(0.0), 0.0);
        assert_eq!(q_ratio(1.0), 0.5);
        assert!(q_ratio(1e300) <= 1.0 && q_ratio(1e300) > 0.999);
        assert_eq!(q_ratio(f64::INFINITY), 1.0);
    }

    proptest! {
        #[test]
        fn q_ratio_is_monotone_and_below_f(a in 0.0..1e6f64, b in 0.0..1e6f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(q_ratio(lo) <= q_ratio(hi));
            prop_assert!(q_ratio(a) <= a && q_ratio(a) < 1.0);
        }
    }

    fn grid(n: usize, l: f64, p: f64) -> Arc<EnergyGrid> {
        Arc::new(EnergyGrid::build(&GridSpec::new(n, l, p)).unwrap())
    }

    #[test]
    fn entropy_of_simple_states() {
        let g = grid(64, 4.0, 1.0);
        assert_eq!(entropy_s(&Distribution::zeros(g.clone(), crate::collision::DistributionKind::Occupation)), 0.0);
        let one = Distribution::occupation(g.clone(), vec![1.0; 64]).unwrap();
        let exact = 2.0 * 2f64.ln() * (2.0 / 3.0) * 4f64.powf(1.5);
        assert!((entropy_s(&one) - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn entropy_of_equilibrium_matches_fine_quadrature() {
        let params = EquilibriumParams::new(0.5, 1.0, 0.0).unwrap();
        let l: f64 = 20.0;
        // substitution ε = u² removes the √ε endpoint singularity
        let exact = quad::integrate(
            |u| {
                let e = u * u;
                2.0 * u * u * entropy_density(params.density(e).unwrap())
            },
            0.0,
            l.sqrt(),
            200,
            16,
        );
        let mut last = f64::INFINITY;
        for n in [2000, 8000] {
            let g = grid(n, l, 2.0);
            let s = entropy_s(&Distribution::bose_einstein(g, &params).unwrap());
            let rel = (s - exact).abs() / exact;
            assert!(rel < last);
            last = rel;
        }
        assert!(last < 1e-6, "relative error {last}");
    }

    #[test]
    fn dissipation_at_equilibrium_vanishes_under_refinement() {
        // on graded grids only the interpolated f₄ breaks detailed balance
        for (alpha, beta) in [(0.5, 1.0), (0.0, 2.0), (1.3, 0.7)] {
            let params = EquilibriumParams::new(alpha, beta, 0.0).unwrap();
            let mut values = Vec::new();
            for n in [24, 48] {
                let g = grid(n, 10.0, 2.0);
                let tables = KernelTables::build_with(g.clone(), TableSelection::SHELL, u64::MAX).unwrap();
                let f = Distribution::bose_einstein(g.clone(), &params).unwrap();
                let d = dissipation_d(&f, &tables, DEFAULT_LOG_FLOOR).unwrap();
                assert_eq!(d.clamped_fraction, 0.0);
                let off = Distribution::from_occupation_fn(g, |e| 2.0 * (-(e - 2.0f64).powi(2)).exp()).unwrap();
                let d_off = dissipation_d(&off, &tables, DEFAULT_LOG_FLOOR).unwrap();
                values.push(d.value / d_off.value);
            }
            assert!(values[1] < 1e-3 && values[1] < 0.5 * values[0], "{values:?}");
        }
    }

    #[test]
    fn constant_occupation_has_no_dissipation() {
        let g = grid(40, 10.0, 2.0);
        let tables = KernelTables::build_with(g.clone(), TableSelection::SHELL, u64::MAX).unwrap();
        let c = Distribution::occupation(g, vec![0.7; 40]).unwrap();
        assert!(dissipation_d(&c, &tables, DEFAULT_LOG_FLOOR).unwrap().value < 1e-12);
    }

    #[test]
    fn equilibrium_dissipation_is_exact_on_uniform_grid() {
        let g = grid(32, 8.0, 1.0);
        let tables = KernelTables::build_with(g.clone(), TableSelection::SHELL, u64::MAX).unwrap();
        let params = EquilibriumParams::new(0.5, 1.0, 0.0).unwrap();
        let f = Distribution::bose_einstein(g, &params).unwrap();
        let d = dissipation_d(&f, &tables, DEFAULT_LOG_FLOOR).unwrap();
        assert!(d.value.abs() < 1e-12, "{}", d.value);
    }

    #[test]
    fn dissipation_equals_entropy_production_on_uniform_grid() {
        // dS/dt = Σ w √ε ln((1+f)/f) ∂_t f when every quadruple lies on nodes
        let g = grid(48, 10.0, 1.0);
        let tables = KernelTables::build(g.clone()).unwrap();
        let f = Distribution::from_occupation_fn(g.clone(), |e| 0.4 * (-e).exp() + 0.8 * (-(e - 3.0f64).powi(2)).exp())
            .unwrap();
        let rhs = collision_rhs_strong(&f, &tables).unwrap();
        let ds: f64 = g
            .nodes()
            .iter()
            .zip(g.weights())
            .zip(f.values().iter().zip(&rhs))
            .map(|((&e, &w), (&f, &r))| w * e.sqrt() * (1.0 / f).ln_1p() * r)
            .sum();
        let d = dissipation_d(&f, &tables, DEFAULT_LOG_FLOOR).unwrap().value;
        assert!(d > 0.0);
        assert!((ds - d).abs() <= 1e-10 * d, "dS/dt = {ds}, D = {d}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn dissipation_is_nonnegative(values in proptest::collection::vec(0.0..3.0f64, 16), zeros in proptest::collection::vec(any::<bool>(), 16)) {
            let g = grid(16, 5.0, 2.0);
            let tables = KernelTables::build_with(g.clone(), TableSelection::SHELL, u64::MAX).unwrap();
            let v: Vec<f64> = values.iter().zip(&zeros).map(|(&v, &z)| if z { 0.0 } else { v }).collect();
            let f = Distribution::occupation(g, v).unwrap();
            let d = dissipation_d(&f, &tables, DEFAULT_LOG_FLOOR).unwrap();
            prop_assert!(d.value >= 0.0);
            prop_assert!((0.0..=1.0).contains(&d.clamped_fraction));
        }
    }
}
