//! Full-approximation-storage multigrid for the coupled `(phi, mu)` system
//!
//! ```text
//! phi_a / dt - M_a Delta_h mu_a = f_phi_a
//! mu_a - dGc_a(phi)            = f_mu_a
//! ```
//!
//! Every level rediscretizes the same operator. The smoother is lexicographic
//! nonlinear Gauss-Seidel: at each cell `mu` is eliminated, a damped 2x2
//! Newton solve in `(phi_1, phi_2)` is taken, and `mu` is reset to match.

use super::transfer::{prolong_into, restrict_into};
use super::{boundary_step, local_terms, step_to_floor, MixedFields, SolverConfig};
use crate::energy::{check_gibbs, dgc_fused, Component, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{CellField, GridSpec};

/// Work counters reported by the smoother.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SmootherStats {
    pub sweeps: usize,
    /// Point updates skipped because the local Jacobian was singular.
    pub skipped_points: usize,
}

impl SmootherStats {
    fn add(&mut self, other: SmootherStats) {
        self.sweeps += other.sweeps;
        self.skipped_points += other.skipped_points;
    }
}

type Quad = [Vec<f64>; 4];

pub(crate) struct Level {
    spec: GridSpec,
    /// `phi_1, phi_2, mu_1, mu_2`.
    u: Quad,
    /// Right-hand sides in the same order.
    f: Quad,
    nbrs: Vec<[usize; 4]>,
}

impl Level {
    fn new(spec: GridSpec) -> Self {
        let z = || vec![0.0; spec.len()];
        let mut nbrs = Vec::with_capacity(spec.len());
        for i in 0..spec.n() {
            for j in 0..spec.n() {
                nbrs.push([
                    spec.idx(spec.next(i), j),
                    spec.idx(spec.prev(i), j),
                    spec.idx(i, spec.next(j)),
                    spec.idx(i, spec.prev(j)),
                ]);
            }
        }
        Self { spec, u: [z(), z(), z(), z()], f: [z(), z(), z(), z()], nbrs }
    }

    fn from_fields(u: &MixedFields, f: &MixedFields) -> Self {
        let mut lv = Level::new(*u.spec());
        lv.u = quad(u);
        lv.f = quad(f);
        lv
    }

    fn to_fields(&self) -> MixedFields {
        let cf = |v: &Vec<f64>| CellField::from_vec(self.spec, v.clone()).expect("size");
        MixedFields { phi: [cf(&self.u[0]), cf(&self.u[1])], mu: [cf(&self.u[2]), cf(&self.u[3])] }
    }

    /// One lexicographic Gauss-Seidel sweep; returns the number of skipped points.
    fn sweep(&mut self, dt: f64, p: &ModelParams, cfg: &SolverConfig) -> usize {
        let inv_h2 = 1.0 / (self.spec.h() * self.spec.h());
        let inv_dt = 1.0 / dt;
        let m = [p.mobility(Component::One), p.mobility(Component::Two)];
        let c = [4.0 * m[0] * inv_h2, 4.0 * m[1] * inv_h2];
        let tau = cfg.boundary_fraction;
        let [phi1, phi2, mu1, mu2] = &mut self.u;
        let [fp1, fp2, fm1, fm2] = &self.f;
        let mut skipped = 0;
        for (k, nb) in self.nbrs.iter().enumerate() {
            let nbv = nb.map(|q| (phi1[q], phi2[q]));
            let g1 = fp1[k] + m[0] * inv_h2 * nb.iter().map(|&q| mu1[q]).sum::<f64>();
            let g2 = fp2[k] + m[1] * inv_h2 * nb.iter().map(|&q| mu2[q]).sum::<f64>();
            let (mut x1, mut x2) = (phi1[k], phi2[k]);
            // The whole point update covers at most `tau` of the distance to the boundary.
            let floor = [(1.0 - tau) * x1, (1.0 - tau) * x2, (1.0 - tau) * (1.0 - x1 - x2)];
            let mut singular = false;
            for _ in 0..cfg.newton_iters_per_point {
                let (d, kk) = local_terms(x1, x2, &nbv, p, inv_h2);
                let r1 = x1 * inv_dt + c[0] * (d[0] + fm1[k]) - g1;
                let r2 = x2 * inv_dt + c[1] * (d[1] + fm2[k]) - g2;
                let j11 = inv_dt + c[0] * kk[0];
                let j12 = c[0] * kk[1];
                let j21 = c[1] * kk[1];
                let j22 = inv_dt + c[1] * kk[2];
                let det = j11 * j22 - j12 * j21;
                if !(det > 0.0 && det.is_finite()) {
                    singular = true;
                    break;
                }
                let d1 = -(j22 * r1 - j12 * r2) / det;
                let d2 = -(j11 * r2 - j21 * r1) / det;
                let t = step_to_floor(x1, x2, d1, d2, floor);
                x1 += t * d1;
                x2 += t * d2;
                if d1.abs() + d2.abs() <= 1e-16 {
                    break;
                }
            }
            if singular {
                skipped += 1;
                continue;
            }
            let (d, _) = local_terms(x1, x2, &nbv, p, inv_h2);
            phi1[k] = x1;
            phi2[k] = x2;
            mu1[k] = d[0] + fm1[k];
            mu2[k] = d[1] + fm2[k];
        }
        skipped
    }

    fn smooth(&mut self, sweeps: usize, dt: f64, p: &ModelParams, cfg: &SolverConfig) -> SmootherStats {
        let mut st = SmootherStats::default();
        for _ in 0..sweeps {
            st.skipped_points += self.sweep(dt, p, cfg);
            st.sweeps += 1;
        }
        st
    }

    /// `N(u)` in the layout of `u`.
    fn operator(&self, dt: f64, p: &ModelParams) -> Quad {
        let len = self.spec.len();
        let inv_h2 = 1.0 / (self.spec.h() * self.spec.h());
        let mut d1 = vec![0.0; len];
        let mut d2 = vec![0.0; len];
        dgc_fused(&self.u[0], &self.u[1], &self.spec, p, &mut d1, &mut d2);
        let mut out: Quad = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        for (a, c) in Component::BOTH.into_iter().enumerate() {
            let m = p.mobility(c);
            let (phi, mu) = (&self.u[a], &self.u[a + 2]);
            for (k, nb) in self.nbrs.iter().enumerate() {
                let lap = (nb.iter().map(|&q| mu[q]).sum::<f64>() - 4.0 * mu[k]) * inv_h2;
                out[a][k] = phi[k] / dt - m * lap;
            }
        }
        for k in 0..len {
            out[2][k] = self.u[2][k] - d1[k];
            out[3][k] = self.u[3][k] - d2[k];
        }
        out
    }

    fn residual(&self, dt: f64, p: &ModelParams) -> Quad {
        let mut r = self.operator(dt, p);
        for (rv, fv) in r.iter_mut().zip(&self.f) {
            for (x, y) in rv.iter_mut().zip(fv) {
                *x = y - *x;
            }
        }
        r
    }

    fn residual_norm(&self, dt: f64, p: &ModelParams) -> f64 {
        let h2 = self.spec.h() * self.spec.h();
        let r = self.residual(dt, p);
        (h2 * r.iter().flatten().map(|x| x * x).sum::<f64>()).sqrt()
    }

    /// Smooths until the residual has dropped by `1e-8` or the sweep budget is spent.
    fn solve_coarsest(&mut self, dt: f64, p: &ModelParams, cfg: &SolverConfig) -> SmootherStats {
        let r0 = self.residual_norm(dt, p);
        let mut st = SmootherStats::default();
        if r0 == 0.0 {
            return st;
        }
        for _ in 0..cfg.coarse_sweeps {
            st.add(self.smooth(1, dt, p, cfg));
            if self.residual_norm(dt, p) <= 1e-8 * r0 {
                break;
            }
        }
        st
    }
}

fn quad(m: &MixedFields) -> Quad {
    [m.phi[0].values().to_vec(), m.phi[1].values().to_vec(), m.mu[0].values().to_vec(), m.mu[1].values().to_vec()]
}

fn cycle(levels: &mut [Level], dt: f64, p: &ModelParams, cfg: &SolverConfig) -> SmootherStats {
    let (fine, rest) = levels.split_first_mut().expect("at least one level");
    if rest.is_empty() {
        return fine.solve_coarsest(dt, p, cfg);
    }
    let mut st = fine.smooth(cfg.smoother_sweeps, dt, p, cfg);

    let res = fine.residual(dt, p);
    let coarse = &mut rest[0];
    let (fs, cs) = (fine.spec, coarse.spec);
    for (uf, uc) in fine.u.iter().zip(coarse.u.iter_mut()) {
        restrict_into(uf, &fs, uc, &cs);
    }
    let saved = coarse.u.clone();
    let nc = coarse.operator(dt, p);
    for ((rf, fc), n) in res.iter().zip(coarse.f.iter_mut()).zip(&nc) {
        restrict_into(rf, &fs, fc, &cs);
        for (x, y) in fc.iter_mut().zip(n) {
            *x += y;
        }
    }

    st.add(cycle(rest, dt, p, cfg));

    let coarse = &rest[0];
    let mut corr: Quad = std::array::from_fn(|_| vec![0.0; fs.len()]);
    for ((uc, s), e) in coarse.u.iter().zip(&saved).zip(corr.iter_mut()) {
        let diff: Vec<f64> = uc.iter().zip(s).map(|(a, b)| a - b).collect();
        prolong_into(&diff, &cs, e, &fs);
    }
    // One factor for the whole increment: pointwise factors would break the
    // mass balance of the correction and stall the cycle.
    let tau = cfg.boundary_fraction;
    let t = (0..fs.len())
        .map(|k| boundary_step(fine.u[0][k], fine.u[1][k], corr[0][k], corr[1][k], tau))
        .fold(1.0_f64, f64::min);
    for (u, e) in fine.u.iter_mut().zip(&corr) {
        for (x, d) in u.iter_mut().zip(e) {
            *x += t * d;
        }
    }

    st.add(fine.smooth(cfg.smoother_sweeps, dt, p, cfg));
    st
}

/// Level stack reused across the cycles of one step.
pub(crate) struct Hierarchy {
    levels: Vec<Level>,
}

impl Hierarchy {
    pub(crate) fn new(u: &MixedFields, rhs: &MixedFields, coarsest_n: usize) -> Self {
        let mut levels = vec![Level::from_fields(u, rhs)];
        let mut spec = *u.spec();
        while let Some(c) = spec.coarsen().filter(|c| c.n() >= coarsest_n) {
            levels.push(Level::new(c));
            spec = c;
        }
        Self { levels }
    }

    pub(crate) fn phi(&self, a: usize) -> &[f64] {
        &self.levels[0].u[a]
    }

    pub(crate) fn vcycle(&mut self, dt: f64, p: &ModelParams, cfg: &SolverConfig) -> SmootherStats {
        cycle(&mut self.levels, dt, p, cfg)
    }

    /// Shifts each `phi_a` by a constant to restore its target mean, unless
    /// the shift would leave the Gibbs interior.
    pub(crate) fn project_mass(&mut self, targets: [f64; 2]) {
        let fine = &mut self.levels[0];
        let len = fine.spec.len() as f64;
        let shift: [f64; 2] = std::array::from_fn(|a| targets[a] - fine.u[a].iter().sum::<f64>() / len);
        let ok = fine.u[0].iter().zip(&fine.u[1]).all(|(&a, &b)| {
            let (a, b) = (a + shift[0], b + shift[1]);
            a > 0.0 && b > 0.0 && a + b < 1.0
        });
        if ok {
            for (u, s) in fine.u.iter_mut().zip(shift) {
                u.iter_mut().for_each(|x| *x += s);
            }
        }
    }

    pub(crate) fn into_phi(mut self) -> (Vec<f64>, Vec<f64>) {
        let fine = self.levels.swap_remove(0);
        let [a, b, _, _] = fine.u;
        (a, b)
    }
}

fn check_inputs(u: &MixedFields, rhs: &MixedFields, dt: f64) -> Result<()> {
    u.check()?;
    rhs.check()?;
    if u.spec() != rhs.spec() {
        return Err(Error::GridMismatch("iterate and right-hand side live on different grids".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step dt = {dt} must be positive")));
    }
    check_gibbs(&u.phi[0], &u.phi[1])
}

/// `rhs - N(u)` for the coupled system.
pub fn mixed_residual(u: &MixedFields, rhs: &MixedFields, dt: f64, p: &ModelParams) -> Result<MixedFields> {
    check_inputs(u, rhs, dt)?;
    let mut lv = Level::from_fields(u, rhs);
    lv.u = lv.residual(dt, p);
    Ok(lv.to_fields())
}

/// One nonlinear Gauss-Seidel sweep on `u` in place.
pub fn smooth(
    u: &mut MixedFields,
    rhs: &MixedFields,
    dt: f64,
    p: &ModelParams,
    cfg: &SolverConfig,
) -> Result<SmootherStats> {
    cfg.validate()?;
    check_inputs(u, rhs, dt)?;
    let mut lv = Level::from_fields(u, rhs);
    let st = lv.smooth(1, dt, p, cfg);
    *u = lv.to_fields();
    Ok(st)
}

/// One FAS V-cycle on `u` in place.
pub fn fas_vcycle(
    u: &mut MixedFields,
    rhs: &MixedFields,
    dt: f64,
    p: &ModelParams,
    cfg: &SolverConfig,
) -> Result<SmootherStats> {
    cfg.validate()?;
    check_inputs(u, rhs, dt)?;
    let mut h = Hierarchy::new(u, rhs, cfg.coarsest_n);
    let st = h.vcycle(dt, p, cfg);
    *u = h.levels[0].to_fields();
    Ok(st)
}
