//! Damped global Newton on the step functional over the mass-preserving
//! affine space. Linear systems are solved by conjugate gradients on the
//! mean-zero subspace with a Fourier preconditioner.

use super::{boundary_step, finish, local_terms, SolverConfig, StepProblem, StepResult};
use crate::elliptic::PeriodicPoisson;
use crate::energy::{convex_energy, dgc_fused, kernels, Component, ModelParams, PhaseState};
use crate::error::{Error, Result};
use crate::grid::{CellField, GridSpec};

/// Largest grid side accepted by the global Newton path.
pub const MAX_NEWTON_N: usize = 64;
const MAX_ITERS: usize = 60;
const MAX_CG: usize = 2000;
const CG_RTOL: f64 = 1e-11;
const ARMIJO: f64 = 1e-4;

pub(crate) struct NewtonOutcome {
    pub phi: (CellField, CellField),
    pub history: Vec<f64>,
}

/// Solves one step by global Newton from `prev`.
pub fn solve_global_newton(prev: &PhaseState, dt: f64, p: &ModelParams, cfg: &SolverConfig) -> Result<StepResult> {
    cfg.validate()?;
    let problem = StepProblem::new(prev, dt, p)?;
    let out = newton_from(&problem, prev, cfg)?;
    finish(&problem, out.phi.0, out.phi.1, 0, out.history, 0, true)
}

/// Symmetric block stencil of the `G_c` Hessian: a 2x2 block per cell and
/// one per neighbor, each stored as `(a11, a12, a22)`.
struct Hessian {
    diag: Vec<[f64; 3]>,
    cross: Vec<[[f64; 3]; 4]>,
    nbrs: Vec<[usize; 4]>,
}

impl Hessian {
    fn assemble(phi: &[Vec<f64>; 2], spec: &GridSpec, p: &ModelParams) -> Self {
        use kernels::edge_cross;
        let inv_h2 = 1.0 / (spec.h() * spec.h());
        let e1 = p.eps2(Component::One);
        let e2 = p.eps2(Component::Two);
        let e3 = p.eps3_sq();
        let mut diag = Vec::with_capacity(spec.len());
        let mut cross = Vec::with_capacity(spec.len());
        let mut nbrs = Vec::with_capacity(spec.len());
        for i in 0..spec.n() {
            for j in 0..spec.n() {
                let k = spec.idx(i, j);
                let nb = [
                    spec.idx(spec.next(i), j),
                    spec.idx(spec.prev(i), j),
                    spec.idx(i, spec.next(j)),
                    spec.idx(i, spec.prev(j)),
                ];
                let (x1, x2) = (phi[0][k], phi[1][k]);
                let nbv = nb.map(|q| (phi[0][q], phi[1][q]));
                diag.push(local_terms(x1, x2, &nbv, p, inv_h2).1);
                cross.push(nbv.map(|(u, v)| {
                    let c3 = e3 * edge_cross(1.0 - x1 - x2, 1.0 - u - v, inv_h2);
                    [e1 * edge_cross(x1, u, inv_h2) + c3, c3, e2 * edge_cross(x2, v, inv_h2) + c3]
                }));
                nbrs.push(nb);
            }
        }
        Self { diag, cross, nbrs }
    }

    fn apply(&self, x: &[Vec<f64>; 2], y: &mut [Vec<f64>; 2]) {
        for (k, nb) in self.nbrs.iter().enumerate() {
            let d = self.diag[k];
            let mut y1 = d[0] * x[0][k] + d[1] * x[1][k];
            let mut y2 = d[1] * x[0][k] + d[2] * x[1][k];
            for (c, &q) in self.cross[k].iter().zip(nb) {
                y1 += c[0] * x[0][q] + c[1] * x[1][q];
                y2 += c[1] * x[0][q] + c[2] * x[1][q];
            }
            y[0][k] = y1;
            y[1][k] = y2;
        }
    }
}

fn project(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn dot(a: &[Vec<f64>; 2], b: &[Vec<f64>; 2]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>()).sum()
}

struct Context<'a> {
    spec: GridSpec,
    poisson: std::sync::Arc<PeriodicPoisson>,
    problem: &'a StepProblem<'a>,
    prev: [&'a [f64]; 2],
    fmu: [Vec<f64>; 2],
    mob: [f64; 2],
}

impl Context<'_> {
    fn field(&self, v: &[f64]) -> CellField {
        CellField::from_vec(self.spec, v.to_vec()).expect("size")
    }

    fn inverse_laplacian(&self, v: &[f64]) -> Vec<f64> {
        self.poisson.apply_inverse(&self.field(v)).into_vec()
    }

    /// Per-cell gradient of the functional, projected to mean zero.
    fn gradient(&self, phi: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let len = self.spec.len();
        let mut d = [vec![0.0; len], vec![0.0; len]];
        {
            let [d1, d2] = &mut d;
            dgc_fused(&phi[0], &phi[1], &self.spec, self.problem.params, d1, d2);
        }
        let dt = self.problem.dt;
        std::array::from_fn(|a| {
            let diff: Vec<f64> = phi[a].iter().zip(self.prev[a]).map(|(x, y)| x - y).collect();
            let w = self.inverse_laplacian(&diff);
            let mut g: Vec<f64> = (0..len).map(|k| w[k] / (self.mob[a] * dt) + d[a][k] + self.fmu[a][k]).collect();
            project(&mut g);
            g
        })
    }

    fn functional(&self, phi: &[Vec<f64>; 2]) -> Result<f64> {
        let h2 = self.spec.h() * self.spec.h();
        let state = PhaseState::new(self.field(&phi[0]), self.field(&phi[1]))?;
        let mut total = convex_energy(&state, self.problem.params)?;
        for a in 0..2 {
            let mut diff: Vec<f64> = phi[a].iter().zip(self.prev[a]).map(|(x, y)| x - y).collect();
            project(&mut diff);
            let w = self.inverse_laplacian(&diff);
            let hm1: f64 = diff.iter().zip(&w).map(|(x, y)| x * y).sum();
            let lin: f64 = self.fmu[a].iter().zip(&phi[a]).map(|(x, y)| x * y).sum();
            total += h2 * (hm1 / (2.0 * self.mob[a] * self.problem.dt) + lin);
        }
        Ok(total)
    }

    /// Solves `(L^{-1}/(M dt) + H) x = b` on the mean-zero subspace.
    fn solve_linear(&self, hess: &Hessian, b: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let len = self.spec.len();
        let dt = self.problem.dt;
        let apply = |x: &[Vec<f64>; 2]| -> [Vec<f64>; 2] {
            let mut y = [vec![0.0; len], vec![0.0; len]];
            hess.apply(x, &mut y);
            for a in 0..2 {
                let w = self.inverse_laplacian(&x[a]);
                for k in 0..len {
                    y[a][k] += w[k] / (self.mob[a] * dt);
                }
                project(&mut y[a]);
            }
            y
        };
        let shift: [f64; 2] = [
            hess.diag.iter().map(|d| d[0]).sum::<f64>() / len as f64,
            hess.diag.iter().map(|d| d[2]).sum::<f64>() / len as f64,
        ];
        let precond = |r: &[Vec<f64>; 2]| -> [Vec<f64>; 2] {
            std::array::from_fn(|a| {
                let md = self.mob[a] * dt;
                let c = shift[a];
                self.poisson.apply_spectral(&self.field(&r[a]), |s| md * s / (1.0 + c * md * s)).into_vec()
            })
        };

        let bnorm = dot(b, b).sqrt();
        let mut x = [vec![0.0; len], vec![0.0; len]];
        if bnorm == 0.0 {
            return x;
        }
        let mut r = b.clone();
        let mut z = precond(&r);
        let mut dir = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..MAX_CG {
            let q = apply(&dir);
            let alpha = rz / dot(&dir, &q);
            for a in 0..2 {
                for k in 0..len {
                    x[a][k] += alpha * dir[a][k];
                    r[a][k] -= alpha * q[a][k];
                }
            }
            if dot(&r, &r).sqrt() <= CG_RTOL * bnorm {
                break;
            }
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for a in 0..2 {
                for k in 0..len {
                    dir[a][k] = z[a][k] + beta * dir[a][k];
                }
            }
        }
        for v in x.iter_mut() {
            project(v);
        }
        x
    }
}

pub(crate) fn newton_from(problem: &StepProblem, start: &PhaseState, cfg: &SolverConfig) -> Result<NewtonOutcome> {
    let spec = *problem.spec();
    if spec.n() > MAX_NEWTON_N {
        return Err(Error::InvalidArgument(format!(
            "global Newton supports N <= {MAX_NEWTON_N}, got N = {}",
            spec.n()
        )));
    }
    if start.spec() != &spec {
        return Err(Error::GridMismatch("Newton start and prev live on different grids".into()));
    }
    let p = problem.params;
    let rhs = problem.rhs();
    let ctx = Context {
        spec,
        poisson: PeriodicPoisson::shared(spec),
        problem,
        prev: [problem.prev.phi1().values(), problem.prev.phi2().values()],
        fmu: [rhs.mu[0].values().to_vec(), rhs.mu[1].values().to_vec()],
        mob: [p.mobility(Component::One), p.mobility(Component::Two)],
    };
    let h2 = spec.h() * spec.h();
    let mut phi = [start.phi1().values().to_vec(), start.phi2().values().to_vec()];
    let mut history = Vec::new();
    for _ in 0..MAX_ITERS {
        let res = problem.scaled_residual(&phi[0], &phi[1]);
        history.push(res);
        if res <= cfg.nonlinear_tol {
            return Ok(NewtonOutcome { phi: (ctx.field(&phi[0]), ctx.field(&phi[1])), history });
        }
        if !res.is_finite() {
            break;
        }
        let g = ctx.gradient(&phi);
        let hess = Hessian::assemble(&phi, &spec, p);
        let neg_g: [Vec<f64>; 2] = std::array::from_fn(|a| g[a].iter().map(|x| -x).collect());
        let delta = ctx.solve_linear(&hess, &neg_g);

        let mut theta = (0..spec.len())
            .map(|k| boundary_step(phi[0][k], phi[1][k], delta[0][k], delta[1][k], cfg.boundary_fraction))
            .fold(1.0_f64, f64::min);
        let j0 = ctx.functional(&phi)?;
        let slope = h2 * dot(&g, &delta);
        let mut accepted = None;
        for _ in 0..50 {
            let trial: [Vec<f64>; 2] =
                std::array::from_fn(|a| phi[a].iter().zip(&delta[a]).map(|(x, d)| x + theta * d).collect());
            if let Ok(j1) = ctx.functional(&trial) {
                // Slack absorbs roundoff in the functional once steps are tiny.
                if j1 <= j0 + ARMIJO * theta * slope + 1e-14 * j0.abs() {
                    accepted = Some(trial);
                    break;
                }
            }
            theta *= 0.5;
        }
        match accepted {
            Some(t) => phi = t,
            None => break,
        }
    }
    Err(Error::ConvergenceFailure { what: "global Newton".into(), history })
}
