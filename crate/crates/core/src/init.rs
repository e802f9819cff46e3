//! Initial data: a smooth cosine perturbation and a seeded uniform one.

use std::f64::consts::PI;

use crate::energy::PhaseState;
use crate::error::{Error, Result};
use crate::grid::{CellField, GridSpec};
use crate::rng;

/// Rejects base values and amplitudes whose perturbed data could leave the
/// Gibbs triangle.
pub fn check_bounds(phi10: f64, phi20: f64, amplitude: f64) -> Result<()> {
    let ok = amplitude >= 0.0
        && phi10 - amplitude > 0.0
        && phi20 - amplitude > 0.0
        && phi10 + phi20 + 2.0 * amplitude < 1.0;
    if !ok {
        return Err(Error::InvalidArgument(format!(
            "phi10 = {phi10}, phi20 = {phi20}, amplitude = {amplitude} can leave the Gibbs triangle"
        )));
    }
    Ok(())
}

/// `phi_a = phi_a0 + A cos(3 pi x / 32) cos(3 pi y / 32)` at cell centers.
pub fn init_cosine(spec: GridSpec, phi10: f64, phi20: f64, amplitude: f64) -> Result<PhaseState> {
    check_bounds(phi10, phi20, amplitude)?;
    let w = 3.0 * PI / 32.0;
    let c: Vec<f64> = (0..spec.n()).map(|i| (w * spec.center(i)).cos()).collect();
    let bump = CellField::from_fn(spec, |i, j| amplitude * c[i] * c[j]);
    PhaseState::new(bump.map(|b| phi10 + b), bump.map(|b| phi20 + b))
}

/// `phi_a = phi_a0 + r` with `r` uniform in `[-A, A)`, drawn per cell from
/// SplitMix64 with the row-major cell index as counter. Both phases share
/// one draw unless `independent`, in which case the second phase uses
/// counters offset by `N^2`.
pub fn init_random(
    spec: GridSpec,
    phi10: f64,
    phi20: f64,
    amplitude: f64,
    seed: u64,
    independent: bool,
) -> Result<PhaseState> {
    check_bounds(phi10, phi20, amplitude)?;
    let len = spec.len() as u64;
    let draw = |i: usize, j: usize, offset: u64| rng::symmetric(seed, offset + spec.idx(i, j) as u64, amplitude);
    let phi1 = CellField::from_fn(spec, |i, j| phi10 + draw(i, j, 0));
    let offset = if independent { len } else { 0 };
    let phi2 = CellField::from_fn(spec, |i, j| phi20 + draw(i, j, offset));
    PhaseState::new(phi1, phi2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_constant() {
        let s = GridSpec::new(16, 64.0).unwrap();
        let a = init_cosine(s, 0.1, 0.5, 0.0).unwrap();
        let b = init_random(s, 0.1, 0.5, 0.0, 99, false).unwrap();
        for st in [a, b] {
            assert!(st.phi1().values().iter().all(|&v| v == 0.1));
            assert!(st.phi2().values().iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn cosine_extrema_and_mean() {
        let s = GridSpec::new(64, 64.0).unwrap();
        let st = init_cosine(s, 0.1, 0.5, 0.01).unwrap();
        assert!((st.phi1().min() - 0.09).abs() < 1e-3);
        assert!((st.phi1().max() - 0.11).abs() < 1e-3);
        assert!((st.phi1().mean() - 0.1).abs() < 1e-15);
        assert!((st.phi2().mean() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn random_is_reproducible_and_shared() {
        let s = GridSpec::new(32, 64.0).unwrap();
        let a = init_random(s, 0.1, 0.5, 0.01, 7, false).unwrap();
        let b = init_random(s, 0.1, 0.5, 0.01, 7, false).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.phi1().values().iter().zip(a.phi2().values()) {
            assert!(((x - 0.1) - (y - 0.5)).abs() < 1e-15);
        }
        let c = init_random(s, 0.1, 0.5, 0.01, 7, true).unwrap();
        assert_eq!(c.phi1(), a.phi1());
        assert_ne!(c.phi2(), a.phi2());
        let d = init_random(s, 0.1, 0.5, 0.01, 8, false).unwrap();
        assert_ne!(d.phi1(), a.phi1());
    }

    #[test]
    fn random_mean_within_clt_bound() {
        let n = 256;
        let s = GridSpec::new(n, 64.0).unwrap();
        let amp = 0.01;
        let st = init_random(s, 0.1, 0.5, amp, 2024, false).unwrap();
        let m = st.phi1().mean() - 0.1;
        assert!(m.abs() <= 3.0 * (amp / 3f64.sqrt()) / n as f64, "{m}");
        assert!(st.phi1().min() >= 0.1 - amp && st.phi1().max() < 0.1 + amp);
    }

    #[test]
    fn bounds_are_enforced() {
        let s = GridSpec::new(8, 1.0).unwrap();
        assert!(init_cosine(s, 0.005, 0.5, 0.01).is_err());
        assert!(init_random(s, 0.1, 0.89, 0.01, 0, false).is_err());
        assert!(init_cosine(s, 0.1, 0.5, -0.01).is_err());
    }
}
