mod common;

use common::Draws;
use mmc_core::energy::discrete_energy;
use mmc_core::grid::norm_inf;
use mmc_core::{init_random, Fallback, step, GridSpec, ModelParams, PhaseState, SolverConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn steps_conserve_mass_and_dissipate(
        seed in any::<u64>(),
        dt in prop::sample::select(vec![1e-3, 1e-1, 1.0, 10.0]),
        independent in any::<bool>(),
    ) {
        let p = ModelParams::reference();
        let cfg = SolverConfig::default();
        let prev = init_random(GridSpec::new(16, 64.0).unwrap(), 0.1, 0.5, 0.01, seed, independent).unwrap();
        let r = step(&prev, dt, &p, &cfg).unwrap();
        let next = &r.next;
        prop_assert!(r.final_residual <= cfg.nonlinear_tol);
        prop_assert!((next.phi1().mean() - prev.phi1().mean()).abs() <= 1e-13);
        prop_assert!((next.phi2().mean() - prev.phi2().mean()).abs() <= 1e-13);
        prop_assert!(next.phi1().min() > 0.0 && next.phi2().min() > 0.0 && next.phi3().min() > 0.0);
        let (g0, g1) = (discrete_energy(&prev, &p).unwrap(), discrete_energy(next, &p).unwrap());
        prop_assert!(g1 <= g0 + 1e-10 * g0.abs());
        prop_assert_eq!(r.energy_before, g0);
        prop_assert_eq!(r.energy_after, g1);
    }
}

#[test]
fn far_from_equilibrium_states_stay_admissible() {
    // Grid-scale roughness defeats the coarse-grid correction; the global
    // Newton path finishes those solves.
    let p = ModelParams::reference();
    let cfg = SolverConfig { max_vcycles: 40, fallback: Fallback::GlobalNewton, ..Default::default() };
    let mut d = Draws::new(21);
    for dt in [1e-2, 1.0, 10.0] {
        let mut st = d.state(16, 16.0);
        for _ in 0..5 {
            let r = step(&st, dt, &p, &cfg).unwrap();
            assert!(r.energy_after <= r.energy_before + 1e-10 * r.energy_before.abs());
            st = r.next;
            assert!(st.phi1().min() > 0.0 && st.phi2().min() > 0.0 && st.phi3().min() > 0.0);
        }
    }
}

#[test]
fn exchanging_components_commutes_with_stepping() {
    let p = ModelParams::reference();
    let cfg = SolverConfig { nonlinear_tol: 1e-12, ..Default::default() };
    let prev = Draws::new(22).state(16, 32.0);
    let a = step(&prev, 0.5, &p, &cfg).unwrap().next;
    let b = step(&prev.swapped(), 0.5, &p.swapped(), &cfg).unwrap().next;
    assert!(norm_inf(&(a.phi1() - b.phi2())) <= 1e-10);
    assert!(norm_inf(&(a.phi2() - b.phi1())) <= 1e-10);
}

#[test]
fn long_steps_approach_a_stationary_state() {
    let p = ModelParams::reference();
    let cfg = SolverConfig::default();
    let mut st: PhaseState = init_random(GridSpec::new(16, 64.0).unwrap(), 0.1, 0.5, 0.01, 3, false).unwrap();
    let mut energies = Vec::new();
    for _ in 0..10 {
        let r = step(&st, 10.0, &p, &cfg).unwrap();
        energies.push(r.energy_after);
        st = r.next;
    }
    assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].abs()));
    assert!(energies[9] < energies[0]);
}
