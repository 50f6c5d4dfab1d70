use std::sync::Arc;

use nordheim::collision::{collision_rhs_weak_g, Distribution, KernelTables, TableSelection};
use nordheim::diagnostics::{mass_below, DetectorParams};
use nordheim::entropy::{dissipation_d, entropy_s};
use nordheim::equilibrium::{
    classify, critical_mass, invert_moments, moments_of_equilibrium, Criticality, EquilibriumParams,
};
use nordheim::grid::{EnergyGrid, GridSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_weights_are_positive_and_sum_to_cutoff(n in 8usize..300, l in 0.5f64..200.0, p in 1.0f64..5.0) {
        let g = EnergyGrid::build(&GridSpec::new(n, l, p)).unwrap();
        prop_assert!(g.weights().iter().all(|w| *w > 0.0));
        let total: f64 = g.weights().iter().sum();
        prop_assert!(rel(total, l) < 1e-12);
        prop_assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn inversion_round_trips(beta in 0.05f64..20.0, z in 0.0f64..1.0, m0 in 0.0f64..10.0, branch in any::<bool>()) {
        let params = if branch {
            EquilibriumParams::new(0.0, beta, m0).unwrap()
        } else {
            // fugacity in (e^{-10}, 1) maps to α = −ln z / β
            let alpha = -(z * (1.0 - (-10f64).exp()) + (-10f64).exp()).ln() / beta;
            EquilibriumParams::new(alpha, beta, 0.0).unwrap()
        };
        let back = invert_moments(&moments_of_equilibrium(&params)).unwrap();
        prop_assert!(rel(back.beta(), params.beta()) < 1e-8);
        prop_assert!((back.alpha() - params.alpha()).abs() <= 1e-8 * params.alpha().max(1.0 / params.beta()));
        prop_assert!((back.m0() - params.m0()).abs() <= 1e-8 * moments_of_equilibrium(&params).mass);
    }

    #[test]
    fn classification_is_ordered_along_the_critical_curve(e in 1e-3f64..1e3, s in 0.01f64..0.9) {
        let mc = critical_mass(e).unwrap();
        let m = nordheim::equilibrium::MomentPair::new;
        prop_assert_eq!(classify(&m(mc * (1.0 - s), e), 1e-6).class, Criticality::Subcritical);
        prop_assert_eq!(classify(&m(mc * (1.0 + s), e), 1e-6).class, Criticality::Supercritical);
        prop_assert_eq!(classify(&m(mc, e), 1e-6).class, Criticality::Critical);
    }

    #[test]
    fn mass_below_is_monotone_and_ends_at_the_total(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(EnergyGrid::build(&GridSpec::new(40, 10.0, 2.0)).unwrap());
        let values = (0..40).map(|_| rng.gen_range(0.0..3.0)).collect();
        let d = Distribution::mass_density(g, values, rng.gen_range(0.0..1.0)).unwrap();
        let mut prev = 0.0;
        for k in 1..=50 {
            let r = 10.0 * k as f64 / 50.0;
            let m = mass_below(&d, r).unwrap();
            prop_assert!(m >= prev - 1e-12);
            prev = m;
        }
        prop_assert!(rel(prev, d.moments().mass) < 1e-12);
    }
}

/// Random non-negative states keep mass and energy under the weak-form rates
/// and have non-negative dissipation.
#[test]
fn weak_rates_conserve_and_dissipation_is_non_negative() {
    let g = Arc::new(EnergyGrid::build(&GridSpec::new(24, 8.0, 2.0)).unwrap());
    let tables = KernelTables::build_with(g.clone(), TableSelection::SHELL, u64::MAX).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let values: Vec<f64> = (0..24).map(|_| rng.gen_range(0.0..5.0)).collect();
        let n0 = if rng.gen_bool(0.5) { rng.gen_range(0.0..2.0) } else { 0.0 };
        let d = Distribution::mass_density(g.clone(), values, n0).unwrap();
        let r = collision_rhs_weak_g(&d, &tables).unwrap();
        let (mut dm, mut de) = (r.condensate_rate, 0.0);
        let mut scale = r.condensate_rate.abs();
        for ((rate, w), e) in r.rates.iter().zip(g.weights()).zip(g.nodes()) {
            dm += rate * w;
            de += rate * w * e;
            scale += (rate * w).abs() * (1.0 + e);
        }
        assert!(dm.abs() <= 1e-12 * scale, "mass rate {dm} vs {scale}");
        assert!(de.abs() <= 1e-12 * scale, "energy rate {de} vs {scale}");
        let f = d.continuum_occupation();
        let diss = dissipation_d(&f, &tables, 1e-30).unwrap();
        assert!(diss.value >= 0.0);
        assert!(entropy_s(&f).is_finite());
    }
}

#[test]
fn default_detectors_resolve_relative_to_the_cutoff() {
    let r = DetectorParams::default().resolve(20.0).unwrap();
    assert_eq!((r.rho0, r.rho1), (2.0, 1.0));
    assert!(DetectorParams { theta_star: 1.5, ..Default::default() }.resolve(20.0).is_err());
}
