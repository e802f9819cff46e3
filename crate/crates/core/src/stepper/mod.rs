//! One implicit step of the convex-splitting scheme.
//!
//! Given `phi^n`, the step solves for `phi^{n+1}`
//!
//! ```text
//! (phi_a - phi_a^n) / dt = M_a Delta_h mu_a,
//! mu_a = dGc_a(phi) + dH_a(phi^n),        a = 1, 2,
//! ```
//!
//! written as a coupled system in `(phi, mu)` and solved by nonlinear
//! full-approximation-storage multigrid. A global Newton solver on the
//! equivalent convex minimization is kept as a cross-check and fallback for
//! small grids.

mod fas;
mod newton;
mod transfer;

pub use fas::{fas_vcycle, mixed_residual, smooth, SmootherStats};
pub use newton::{solve_global_newton, MAX_NEWTON_N};
pub use transfer::{prolong, restrict};

use crate::elliptic::{hminus1_inner, MeanHandling};
use crate::energy::{
    chemical_potential, convex_energy, dgc_fused, discrete_energy, entropy_grad_unchecked, entropy_hess_unchecked,
    kernels, mixing_grad, Component, ModelParams, PhaseState,
};
use crate::error::{Error, Result};
use crate::grid::{cell_inner, laplacian, CellField, GridSpec};

/// What to do when multigrid exhausts its cycle budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    None,
    /// Restart from the last iterate with global Newton (grids up to 64 cells per side).
    GlobalNewton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop when `||r||_2 / (||phi^n||_2 / dt + 1)` drops below this.
    pub nonlinear_tol: f64,
    pub max_vcycles: usize,
    /// Pre- and post-smoothing sweeps per level.
    pub smoother_sweeps: usize,
    pub newton_iters_per_point: usize,
    /// Fraction of the distance to the Gibbs boundary a single update may cover.
    pub boundary_fraction: f64,
    /// Coarsening stops before the grid drops below this many cells per side.
    pub coarsest_n: usize,
    /// Sweep budget on the coarsest level.
    pub coarse_sweeps: usize,
    pub fallback: Fallback,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nonlinear_tol: 1e-9,
            max_vcycles: 200,
            smoother_sweeps: 2,
            newton_iters_per_point: 2,
            boundary_fraction: 0.9,
            coarsest_n: 4,
            coarse_sweeps: 100,
            fallback: Fallback::None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.nonlinear_tol > 0.0 && self.nonlinear_tol.is_finite()) {
            return bad(format!("nonlinear_tol = {} must be positive", self.nonlinear_tol));
        }
        if self.max_vcycles == 0 || self.smoother_sweeps == 0 || self.newton_iters_per_point == 0 {
            return bad("cycle, sweep and Newton counts must be positive".into());
        }
        if self.coarse_sweeps == 0 {
            return bad("coarse_sweeps must be positive".into());
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction < 1.0) {
            return bad(format!("boundary_fraction = {} must lie in (0, 1)", self.boundary_fraction));
        }
        if self.coarsest_n < 4 {
            return bad(format!("coarsest_n = {} must be at least 4", self.coarsest_n));
        }
        Ok(())
    }
}

/// Iterate or right-hand side of the coupled `(phi, mu)` system.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedFields {
    pub phi: [CellField; 2],
    pub mu: [CellField; 2],
}

impl MixedFields {
    pub fn zeros(spec: GridSpec) -> Self {
        let z = CellField::zeros(spec);
        Self { phi: [z.clone(), z.clone()], mu: [z.clone(), z] }
    }

    pub fn spec(&self) -> &GridSpec {
        self.phi[0].spec()
    }

    /// Combined discrete `l^2` norm of all four fields.
    pub fn norm2(&self) -> f64 {
        self.phi.iter().chain(&self.mu).map(|f| crate::grid::norm2(f).powi(2)).sum::<f64>().sqrt()
    }

    fn check(&self) -> Result<()> {
        let s = self.spec();
        for f in self.phi.iter().chain(&self.mu).skip(1) {
            if f.spec() != s {
                return Err(Error::GridMismatch("mixed fields on different grids".into()));
            }
        }
        Ok(())
    }
}

/// Data fixed for one time step.
#[derive(Debug, Clone, Copy)]
pub struct StepProblem<'a> {
    pub prev: &'a PhaseState,
    pub dt: f64,
    pub params: &'a ModelParams,
}

impl<'a> StepProblem<'a> {
    pub fn new(prev: &'a PhaseState, dt: f64, params: &'a ModelParams) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step dt = {dt} must be positive")));
        }
        Ok(Self { prev, dt, params })
    }

    pub fn spec(&self) -> &GridSpec {
        self.prev.spec()
    }

    /// Right-hand side: `phi^n / dt` in the transport rows and `dH(phi^n)` in
    /// the potential rows.
    pub fn rhs(&self) -> MixedFields {
        let (p1, p2) = (self.prev.phi1(), self.prev.phi2());
        let p = self.params;
        MixedFields {
            phi: [p1.scale(1.0 / self.dt), p2.scale(1.0 / self.dt)],
            mu: [p1.zip_map(p2, |a, b| mixing_grad(a, b, p).0), p1.zip_map(p2, |a, b| mixing_grad(a, b, p).1)],
        }
    }

    /// `(phi, mu)` with `phi` from `guess` and `mu` consistent with it.
    pub fn iterate_at(&self, guess: &PhaseState) -> MixedFields {
        let spec = *guess.spec();
        let rhs = self.rhs();
        let mut d1 = vec![0.0; spec.len()];
        let mut d2 = vec![0.0; spec.len()];
        dgc_fused(guess.phi1().values(), guess.phi2().values(), &spec, self.params, &mut d1, &mut d2);
        let mu1: Vec<f64> = d1.iter().zip(rhs.mu[0].values()).map(|(a, b)| a + b).collect();
        let mu2: Vec<f64> = d2.iter().zip(rhs.mu[1].values()).map(|(a, b)| a + b).collect();
        MixedFields {
            phi: [guess.phi1().clone(), guess.phi2().clone()],
            mu: [CellField::from_vec(spec, mu1).expect("size"), CellField::from_vec(spec, mu2).expect("size")],
        }
    }

    /// Denominator of the scaled stopping residual.
    pub fn residual_scale(&self) -> f64 {
        let n1 = crate::grid::norm2(self.prev.phi1());
        let n2 = crate::grid::norm2(self.prev.phi2());
        (n1 * n1 + n2 * n2).sqrt() / self.dt + 1.0
    }

    /// Scaled residual of the scheme at `phi`, with `mu` eliminated.
    pub(crate) fn scaled_residual(&self, phi1: &[f64], phi2: &[f64]) -> f64 {
        let spec = *self.spec();
        let rhs = self.rhs();
        let r = reduced_residual(phi1, phi2, &rhs, &spec, self.dt, self.params);
        let h2 = spec.h() * spec.h();
        let ss: f64 = r[0].iter().chain(&r[1]).map(|x| x * x).sum();
        (h2 * ss).sqrt() / self.residual_scale()
    }
}

/// `f_phi - phi/dt + M Delta_h (dGc(phi) + f_mu)` for both components.
pub(crate) fn reduced_residual(
    phi1: &[f64],
    phi2: &[f64],
    rhs: &MixedFields,
    spec: &GridSpec,
    dt: f64,
    p: &ModelParams,
) -> [Vec<f64>; 2] {
    let len = spec.len();
    let mut d = [vec![0.0; len], vec![0.0; len]];
    {
        let [d1, d2] = &mut d;
        dgc_fused(phi1, phi2, spec, p, d1, d2);
    }
    let inv_h2 = 1.0 / (spec.h() * spec.h());
    let phi = [phi1, phi2];
    let mut out = [vec![0.0; len], vec![0.0; len]];
    for (a, c) in Component::BOTH.into_iter().enumerate() {
        let m = p.mobility(c);
        let mu: Vec<f64> = d[a].iter().zip(rhs.mu[a].values()).map(|(x, y)| x + y).collect();
        let fphi = rhs.phi[a].values();
        for i in 0..spec.n() {
            let (ip, im) = (spec.next(i), spec.prev(i));
            for j in 0..spec.n() {
                let (jp, jm) = (spec.next(j), spec.prev(j));
                let k = spec.idx(i, j);
                let lap = (mu[spec.idx(ip, j)] + mu[spec.idx(im, j)] + mu[spec.idx(i, jp)] + mu[spec.idx(i, jm)]
                    - 4.0 * mu[k])
                    * inv_h2;
                out[a][k] = fphi[k] - phi[a][k] / dt + m * lap;
            }
        }
    }
    out
}

/// Local first and second derivatives of `G_c` at one cell with its four
/// neighbors frozen. Returns `(dGc_1, dGc_2)` and the Hessian `(K11, K12, K22)`.
#[inline]
pub(crate) fn local_terms(
    x1: f64,
    x2: f64,
    nb: &[(f64, f64); 4],
    p: &ModelParams,
    inv_h2: f64,
) -> ([f64; 2], [f64; 3]) {
    use kernels::{edge_grad, edge_hess};
    let x3 = 1.0 - x1 - x2;
    let (s1, s2) = entropy_grad_unchecked(x1, x2, p);
    let (h11, h12, h22) = entropy_hess_unchecked(x1, x2, p);
    let (mut g1, mut g2, mut g3) = (0.0, 0.0, 0.0);
    let (mut q1, mut q2, mut q3) = (0.0, 0.0, 0.0);
    for &(u, v) in nb {
        let w = 1.0 - u - v;
        g1 += edge_grad(x1, u, inv_h2);
        g2 += edge_grad(x2, v, inv_h2);
        g3 += edge_grad(x3, w, inv_h2);
        q1 += edge_hess(x1, u, inv_h2);
        q2 += edge_hess(x2, v, inv_h2);
        q3 += edge_hess(x3, w, inv_h2);
    }
    let e1 = p.eps2(Component::One);
    let e2 = p.eps2(Component::Two);
    let e3 = p.eps3_sq();
    (
        [s1 + e1 * g1 - e3 * g3, s2 + e2 * g2 - e3 * g3],
        [h11 + e1 * q1 + e3 * q3, h12 + e3 * q3, h22 + e2 * q2 + e3 * q3],
    )
}

/// Largest `theta <= 1` with `x + theta d` keeping at least `1 - tau` of each
/// phase fraction.
#[inline]
pub(crate) fn boundary_step(x1: f64, x2: f64, d1: f64, d2: f64, tau: f64) -> f64 {
    let floor = [(1.0 - tau) * x1, (1.0 - tau) * x2, (1.0 - tau) * (1.0 - x1 - x2)];
    step_to_floor(x1, x2, d1, d2, floor)
}

/// Largest `theta <= 1` with every phase fraction of `x + theta d` at or
/// above the matching entry of `floor`.
#[inline]
pub(crate) fn step_to_floor(x1: f64, x2: f64, d1: f64, d2: f64, floor: [f64; 3]) -> f64 {
    let mut t: f64 = 1.0;
    for ((v, dv), lb) in [(x1, d1), (x2, d2), (1.0 - x1 - x2, -d1 - d2)].into_iter().zip(floor) {
        if dv < 0.0 {
            t = t.min(((v - lb) / -dv).max(0.0));
        }
    }
    t
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: PhaseState,
    pub mu1: CellField,
    pub mu2: CellField,
    pub vcycles: usize,
    pub final_residual: f64,
    /// Scaled residual before the first cycle and after each cycle.
    pub residual_history: Vec<f64>,
    /// Points whose local Jacobian was singular and were left untouched.
    pub skipped_points: usize,
    /// Global Newton produced the accepted iterate.
    pub used_newton: bool,
    pub energy_before: f64,
    pub energy_after: f64,
}

/// Residual of the scheme at a candidate `next`, assembled from the operator
/// definitions: `(next - prev)/dt - M Delta_h mu`.
pub fn residual(next: &PhaseState, prev: &PhaseState, dt: f64, p: &ModelParams) -> Result<(CellField, CellField)> {
    if next.spec() != prev.spec() {
        return Err(Error::GridMismatch("next and prev live on different grids".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step dt = {dt} must be positive")));
    }
    let mut out = Vec::with_capacity(2);
    for c in Component::BOTH {
        let mu = chemical_potential(next, prev, p, c)?;
        let rate = (next.phi(c) - prev.phi(c)).scale(1.0 / dt);
        out.push(&rate - &laplacian(&mu).scale(p.mobility(c)));
    }
    let r2 = out.pop().expect("two");
    let r1 = out.pop().expect("two");
    Ok((r1, r2))
}

/// Advances `prev` by one step starting the nonlinear solve from `prev`.
pub fn step(prev: &PhaseState, dt: f64, p: &ModelParams, cfg: &SolverConfig) -> Result<StepResult> {
    step_from(prev, prev, dt, p, cfg)
}

/// Advances `prev` by one step starting the nonlinear solve from `guess`.
pub fn step_from(
    prev: &PhaseState,
    guess: &PhaseState,
    dt: f64,
    p: &ModelParams,
    cfg: &SolverConfig,
) -> Result<StepResult> {
    cfg.validate()?;
    if guess.spec() != prev.spec() {
        return Err(Error::GridMismatch("initial guess and prev live on different grids".into()));
    }
    let problem = StepProblem::new(prev, dt, p)?;
    let spec = *prev.spec();
    let rhs = problem.rhs();
    let targets = [prev.phi1().mean(), prev.phi2().mean()];

    let mut hier = fas::Hierarchy::new(&problem.iterate_at(guess), &rhs, cfg.coarsest_n);
    let mut history = vec![problem.scaled_residual(hier.phi(0), hier.phi(1))];
    let mut skipped = 0;
    let mut cycles = 0;
    let mut converged = history[0] <= cfg.nonlinear_tol;
    while !converged && cycles < cfg.max_vcycles {
        skipped += hier.vcycle(dt, p, cfg).skipped_points;
        cycles += 1;
        hier.project_mass(targets);
        let r = problem.scaled_residual(hier.phi(0), hier.phi(1));
        history.push(r);
        if !r.is_finite() {
            break;
        }
        converged = r <= cfg.nonlinear_tol;
    }

    let mut used_newton = false;
    let (phi1, phi2) = if converged {
        let (a, b) = hier.into_phi();
        (CellField::from_vec(spec, a)?, CellField::from_vec(spec, b)?)
    } else if cfg.fallback == Fallback::GlobalNewton && history.last().is_some_and(|r| r.is_finite()) {
        used_newton = true;
        let (a, b) = hier.into_phi();
        let start = PhaseState::new(CellField::from_vec(spec, a)?, CellField::from_vec(spec, b)?)?;
        let out = newton::newton_from(&problem, &start, cfg)?;
        history.extend(out.history);
        out.phi
    } else {
        return Err(Error::ConvergenceFailure { what: "FAS multigrid".into(), history });
    };

    finish(&problem, phi1, phi2, cycles, history, skipped, used_newton)
}

fn finish(
    problem: &StepProblem,
    phi1: CellField,
    phi2: CellField,
    vcycles: usize,
    residual_history: Vec<f64>,
    skipped_points: usize,
    used_newton: bool,
) -> Result<StepResult> {
    let next = PhaseState::new(phi1, phi2)?;
    let p = problem.params;
    let energy_before = discrete_energy(problem.prev, p)?;
    let energy_after = discrete_energy(&next, p)?;
    if energy_after > energy_before + 1e-10 * energy_before.abs() {
        return Err(Error::EnergyIncrease { before: energy_before, after: energy_after });
    }
    let mu1 = chemical_potential(&next, problem.prev, p, Component::One)?;
    let mu2 = chemical_potential(&next, problem.prev, p, Component::Two)?;
    let final_residual = *residual_history.last().expect("nonempty");
    Ok(StepResult {
        next,
        mu1,
        mu2,
        vcycles,
        final_residual,
        residual_history,
        skipped_points,
        used_newton,
        energy_before,
        energy_after,
    })
}

/// `sum_a ||phi_a - phi_a^n||^2_{-1} / (2 M_a dt) + G_c(phi) + <dH(phi^n), phi>`.
///
/// Its minimizer over the mass-preserving Gibbs interior is the step solution.
pub fn minimizer_functional(candidate: &PhaseState, prev: &PhaseState, dt: f64, p: &ModelParams) -> Result<f64> {
    if candidate.spec() != prev.spec() {
        return Err(Error::GridMismatch("candidate and prev live on different grids".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step dt = {dt} must be positive")));
    }
    let problem = StepProblem::new(prev, dt, p)?;
    let rhs = problem.rhs();
    let mut total = convex_energy(candidate, p)?;
    for (a, c) in Component::BOTH.into_iter().enumerate() {
        let diff = candidate.phi(c) - prev.phi(c);
        let drift = diff.mean();
        if drift.abs() > 1e-11 {
            return Err(Error::NonzeroMean { mean: drift });
        }
        let diff = diff.subtract_mean();
        let hm1 = hminus1_inner(&diff, &diff, None, MeanHandling::Project)?;
        total += hm1 / (2.0 * p.mobility(c) * dt) + cell_inner(&rhs.mu[a], candidate.phi(c))?;
    }
    Ok(total)
}
