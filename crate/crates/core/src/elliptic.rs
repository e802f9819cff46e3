//! Periodic Poisson solves on mean-zero cell fields and the discrete
//! `H^{-1}` inner product built on them.
//!
//! The constant-coefficient operator `-Delta_h` is diagonalized by the 2-D
//! discrete Fourier transform with symbol
//! `(4/h^2)(sin^2(pi k/N) + sin^2(pi l/N))`. Variable coefficients
//! `-div(D grad .)` are handled by conjugate gradients preconditioned with
//! the constant-coefficient inverse.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{cell_inner, laplacian, norm2, norm_inf, weighted_laplacian, CellField, EdgeVectorWeights, GridSpec};

pub const DEFAULT_TOL: f64 = 1e-11;
const MAX_CG_ITERS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub psi: CellField,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Spectral inverse of `-Delta_h` for one grid size.
pub struct PeriodicPoisson {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<f64>,
}

impl std::fmt::Debug for PeriodicPoisson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicPoisson").field("spec", &self.spec).finish()
    }
}

type PlanCache = Mutex<HashMap<(usize, u64), Arc<PeriodicPoisson>>>;

impl PeriodicPoisson {
    pub fn new(spec: GridSpec) -> Self {
        let n = spec.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let inv_h2 = 1.0 / (spec.h() * spec.h());
        let s2: Vec<f64> = (0..n).map(|k| (PI * k as f64 / n as f64).sin().powi(2)).collect();
        let mut symbol = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                symbol[k * n + l] = 4.0 * inv_h2 * (s2[k] + s2[l]);
            }
        }
        Self { spec, forward, inverse, symbol }
    }

    /// Shared solver for `spec`, planned once per grid size.
    pub fn shared(spec: GridSpec) -> Arc<PeriodicPoisson> {
        static CACHE: OnceLock<PlanCache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("plan cache poisoned");
        map.entry((spec.n(), spec.l().to_bits()))
            .or_insert_with(|| Arc::new(PeriodicPoisson::new(spec)))
            .clone()
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Smallest nonzero eigenvalue of `-Delta_h`.
    pub fn smallest_eigenvalue(&self) -> f64 {
        self.symbol[1]
    }

    fn transform_2d(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.spec.n();
        fft.process(buf);
        transpose(buf, n);
        fft.process(buf);
        transpose(buf, n);
    }

    /// Zero-mean `psi` with `-Delta_h psi = f - mean(f)`.
    pub fn apply_inverse(&self, f: &CellField) -> CellField {
        self.apply_spectral(f, |s| 1.0 / s)
    }

    /// Applies the Fourier multiplier `m(lambda)` to the mean-free part of
    /// `f`, where `lambda` runs over the nonzero eigenvalues of `-Delta_h`.
    pub fn apply_spectral(&self, f: &CellField, m: impl Fn(f64) -> f64) -> CellField {
        let n = self.spec.n();
        let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_2d(&mut buf, &self.forward);
        buf[0] = Complex64::new(0.0, 0.0);
        for (c, &s) in buf.iter_mut().zip(&self.symbol).skip(1) {
            *c *= m(s);
        }
        self.transform_2d(&mut buf, &self.inverse);
        let scale = 1.0 / (n * n) as f64;
        let values = buf.iter().map(|c| c.re * scale).collect();
        let psi = CellField::from_vec(self.spec, values).expect("same size");
        psi.subtract_mean()
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// `||-Delta_h psi - (f - mean f)||_2`.
fn constant_residual(psi: &CellField, f0: &CellField) -> f64 {
    let lap = laplacian(psi);
    norm2(&(&lap + f0))
}

pub fn poisson_solve(f: &CellField, tol: f64) -> Result<PoissonSolution> {
    check_tol(tol)?;
    let solver = PeriodicPoisson::shared(*f.spec());
    let f0 = f.subtract_mean();
    let scale = norm2(&f0);
    let mut psi = solver.apply_inverse(&f0);
    let mut res = constant_residual(&psi, &f0);
    let mut history = vec![res];
    let mut iterations = 1;
    // The transform solve is exact up to roundoff; refine in the rare case it is not enough.
    while res > tol * scale && iterations < 4 {
        let r = &f0 + &laplacian(&psi);
        psi = &psi + &solver.apply_inverse(&r);
        res = constant_residual(&psi, &f0);
        history.push(res);
        iterations += 1;
    }
    if res > tol * scale {
        return Err(Error::ConvergenceFailure { what: "transform Poisson solve".into(), history });
    }
    Ok(PoissonSolution { psi, residual_norm: res, iterations })
}

/// `-div(D grad psi) = f - mean(f)` by preconditioned conjugate gradients.
pub fn weighted_poisson_solve(d: &EdgeVectorWeights, f: &CellField, tol: f64) -> Result<PoissonSolution> {
    check_tol(tol)?;
    let spec = *f.spec();
    // Validates positivity and grid agreement.
    weighted_laplacian(d, &CellField::zeros(spec))?;
    let apply = |v: &CellField| weighted_laplacian(d, v).expect("validated").scale(-1.0);
    let pre = PeriodicPoisson::shared(spec);

    let b = f.subtract_mean();
    let bnorm = norm2(&b);
    let mut x = CellField::zeros(spec);
    if bnorm == 0.0 {
        return Ok(PoissonSolution { psi: x, residual_norm: 0.0, iterations: 0 });
    }
    let mut r = b.clone();
    let mut z = pre.apply_inverse(&r);
    let mut p = z.clone();
    let mut rz = cell_inner(&r, &z)?;
    let mut history = vec![bnorm];
    for it in 1..=MAX_CG_ITERS {
        let ap = apply(&p);
        let alpha = rz / cell_inner(&p, &ap)?;
        x = &x + &p.scale(alpha);
        r = &r - &ap.scale(alpha);
        let rn = norm2(&r);
        history.push(rn);
        if rn <= tol * bnorm {
            let psi = x.subtract_mean();
            let residual_norm = norm2(&(&b - &apply(&psi)));
            return Ok(PoissonSolution { psi, residual_norm, iterations: it });
        }
        z = pre.apply_inverse(&r);
        let rz_new = cell_inner(&r, &z)?;
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p.scale(beta);
    }
    Err(Error::ConvergenceFailure { what: "weighted Poisson conjugate gradients".into(), history })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanHandling {
    /// Subtract the means of both arguments before pairing.
    Project,
    /// Reject arguments whose mean is not zero to roundoff.
    Strict,
}

fn prepare(f: &CellField, mode: MeanHandling) -> Result<CellField> {
    match mode {
        MeanHandling::Project => Ok(f.subtract_mean()),
        MeanHandling::Strict => {
            let m = f.mean();
            if m.abs() > 1e-12 * norm_inf(f).max(f64::MIN_POSITIVE) {
                return Err(Error::NonzeroMean { mean: m });
            }
            Ok(f.clone())
        }
    }
}

/// `<f, g>_{L_D^{-1}} = <f, L_D^{-1} g>`; `D = 1` when `weights` is `None`.
pub fn hminus1_inner(
    f: &CellField,
    g: &CellField,
    weights: Option<&EdgeVectorWeights>,
    mode: MeanHandling,
) -> Result<f64> {
    let f = prepare(f, mode)?;
    let g = prepare(g, mode)?;
    let psi = match weights {
        None => poisson_solve(&g, DEFAULT_TOL)?.psi,
        Some(d) => weighted_poisson_solve(d, &g, DEFAULT_TOL)?.psi,
    };
    cell_inner(&f, &psi)
}

pub fn hminus1_norm(f: &CellField, weights: Option<&EdgeVectorWeights>, mode: MeanHandling) -> Result<f64> {
    Ok(hminus1_inner(f, f, weights, mode)?.max(0.0).sqrt())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::testutil::TestRng;
    use crate::grid::{gradient, vector_inner, EdgeVectorField};

    fn spec(n: usize, l: f64) -> GridSpec {
        GridSpec::new(n, l).unwrap()
    }

    #[test]
    fn constant_rhs_gives_zero() {
        let sol = poisson_solve(&CellField::constant(spec(16, 2.0), 3.0), DEFAULT_TOL).unwrap();
        assert!(norm_inf(&sol.psi) < 1e-14);
    }

    #[test]
    fn single_mode_division() {
        let s = spec(32, 5.0);
        let f = CellField::from_fn(s, |i, _| (2.0 * PI * s.center(i) / s.l()).cos());
        let lam = (4.0 / (s.h() * s.h())) * (PI * s.h() / s.l()).sin().powi(2);
        let sol = poisson_solve(&f, DEFAULT_TOL).unwrap();
        for (a, b) in sol.psi.values().iter().zip(f.values()) {
            assert!((a - b / lam).abs() < 1e-12 / lam);
        }
        let solver = PeriodicPoisson::new(s);
        assert!((solver.smallest_eigenvalue() - lam).abs() < 1e-15 * lam);
    }

    #[test]
    fn random_residual_and_zero_mean() {
        let mut rng = TestRng::new(21);
        let s = spec(64, 64.0);
        let f = rng.cell(s, -1.0, 2.0);
        let sol = poisson_solve(&f, DEFAULT_TOL).unwrap();
        let r = &laplacian(&sol.psi) + &f.subtract_mean();
        assert!(norm2(&r) <= 1e-11 * norm2(&f));
        assert!(sol.psi.mean().abs() <= 1e-13 * norm_inf(&sol.psi));
        assert!(sol.residual_norm <= DEFAULT_TOL * norm2(&f));
        assert!(poisson_solve(&f, 0.0).is_err());
    }

    #[test]
    fn weighted_matches_constant_cases() {
        let mut rng = TestRng::new(22);
        let s = spec(16, 3.0);
        let f = rng.cell(s, -1.0, 1.0);
        let direct = poisson_solve(&f, DEFAULT_TOL).unwrap().psi;
        let one = EdgeVectorField::constant(s, 1.0);
        let cg = weighted_poisson_solve(&one, &f, DEFAULT_TOL).unwrap();
        for (a, b) in cg.psi.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-10);
        }
        let c = EdgeVectorField::constant(s, 2.5);
        let scaled = weighted_poisson_solve(&c, &f, DEFAULT_TOL).unwrap();
        for (a, b) in scaled.psi.values().iter().zip(direct.values()) {
            assert!((a - b / 2.5).abs() < 1e-10);
        }
    }

    #[test]
    fn weighted_random_coefficients() {
        let mut rng = TestRng::new(23);
        let s = spec(16, 1.0);
        let d = rng.edge_vec(s, 0.2, 3.0);
        let f = rng.cell(s, -1.0, 1.0);
        let tol = 1e-10;
        let sol = weighted_poisson_solve(&d, &f, tol).unwrap();
        let r = &weighted_laplacian(&d, &sol.psi).unwrap() + &f.subtract_mean();
        assert!(norm2(&r) <= tol * norm2(&f.subtract_mean()) * 1.0001);
        assert!(sol.iterations > 1);
        let bad = EdgeVectorField::constant(s, -1.0);
        assert!(weighted_poisson_solve(&bad, &f, tol).is_err());
    }

    #[test]
    fn hminus1_properties() {
        let mut rng = TestRng::new(24);
        for n in [8, 16, 32] {
            let s = spec(n, 4.0);
            let f = rng.cell(s, -1.0, 1.0).subtract_mean();
            let g = rng.cell(s, -1.0, 1.0).subtract_mean();
            let fg = hminus1_inner(&f, &g, None, MeanHandling::Strict).unwrap();
            let gf = hminus1_inner(&g, &f, None, MeanHandling::Strict).unwrap();
            assert!((fg - gf).abs() <= 1e-12 * fg.abs().max(1e-300));
            // [grad psi_f, grad psi_g] form
            let pf = poisson_solve(&f, DEFAULT_TOL).unwrap().psi;
            let pg = poisson_solve(&g, DEFAULT_TOL).unwrap().psi;
            let bracket = vector_inner(&gradient(&pf), &gradient(&pg)).unwrap();
            let lf = cell_inner(&pf, &g).unwrap();
            assert!((bracket - fg).abs() <= 1e-11 * fg.abs());
            assert!((lf - fg).abs() <= 1e-11 * fg.abs());
            assert!(hminus1_inner(&f, &f, None, MeanHandling::Strict).unwrap() > 0.0);
        }
        let s = spec(16, 4.0);
        let z = CellField::zeros(s);
        assert_eq!(hminus1_norm(&z, None, MeanHandling::Strict).unwrap(), 0.0);
        let shifted = CellField::constant(s, 1.0);
        assert!(matches!(
            hminus1_inner(&shifted, &shifted, None, MeanHandling::Strict),
            Err(Error::NonzeroMean { .. })
        ));
        assert!(hminus1_inner(&shifted, &shifted, None, MeanHandling::Project).unwrap().abs() < 1e-20);
    }

    #[test]
    fn hminus1_single_mode() {
        let s = spec(32, 6.0);
        let f = CellField::from_fn(s, |_, j| (2.0 * PI * s.center(j) / s.l()).cos());
        let lam = (4.0 / (s.h() * s.h())) * (PI * s.h() / s.l()).sin().powi(2);
        let n2 = hminus1_norm(&f, None, MeanHandling::Strict).unwrap().powi(2);
        let expect = norm2(&f).powi(2) / lam;
        assert!((n2 - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn weighted_hminus1_is_symmetric() {
        let mut rng = TestRng::new(25);
        let s = spec(16, 2.0);
        let d = rng.edge_vec(s, 0.5, 2.0);
        let f = rng.cell(s, -1.0, 1.0);
        let g = rng.cell(s, -1.0, 1.0);
        let a = hminus1_inner(&f, &g, Some(&d), MeanHandling::Project).unwrap();
        let b = hminus1_inner(&g, &f, Some(&d), MeanHandling::Project).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs());
    }

    #[test]
    fn shared_plans_are_reused() {
        let s = spec(8, 1.0);
        let a = PeriodicPoisson::shared(s);
        let b = PeriodicPoisson::shared(s);
        assert!(Arc::ptr_eq(&a, &b));
    }
}
