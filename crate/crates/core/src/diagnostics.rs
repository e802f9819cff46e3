//! Per-step observables, trace invariants and the time-step convergence study.

use rayon::prelude::*;

use crate::energy::{discrete_energy, ModelParams, PhaseState};
use crate::error::{Error, Result};
use crate::grid::{norm2, norm_inf, CellField};
use crate::stepper::{step, SolverConfig};

/// Relative slack allowed on energy increases between consecutive records.
pub const ENERGY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: u64,
    pub time: f64,
    pub energy: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub min1: f64,
    pub max1: f64,
    pub min2: f64,
    pub max2: f64,
    pub min_sum: f64,
    pub max_sum: f64,
    pub vcycles: usize,
    pub residual: f64,
}

/// Records the observables of `state`; `vcycles` and `residual` describe the
/// solve that produced it.
pub fn observe(
    state: &PhaseState,
    p: &ModelParams,
    step: u64,
    time: f64,
    vcycles: usize,
    residual: f64,
) -> Result<StepDiagnostics> {
    let sum = state.phi1() + state.phi2();
    Ok(StepDiagnostics {
        step,
        time,
        energy: discrete_energy(state, p)?,
        mass1: state.phi1().mean(),
        mass2: state.phi2().mean(),
        min1: state.phi1().min(),
        max1: state.phi1().max(),
        min2: state.phi2().min(),
        max2: state.phi2().max(),
        min_sum: sum.min(),
        max_sum: sum.max(),
        vcycles,
        residual,
    })
}

/// Checks positivity on every record and energy decay between consecutive ones.
pub fn validate_trace(records: &[StepDiagnostics]) -> Result<()> {
    for r in records {
        let ok = r.min1 > 0.0
            && r.min1 <= r.max1
            && r.max1 < 1.0
            && r.min2 > 0.0
            && r.min2 <= r.max2
            && r.max2 < 1.0
            && r.min_sum > 0.0
            && r.min_sum <= r.max_sum
            && r.max_sum < 1.0;
        if !ok {
            return Err(Error::InvalidArgument(format!("record at step {} leaves the Gibbs triangle", r.step)));
        }
    }
    for w in records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.energy > a.energy + ENERGY_SLACK * a.energy.abs() {
            return Err(Error::EnergyIncrease { before: a.energy, after: b.energy });
        }
    }
    Ok(())
}

/// Largest `|mass_a(t) - mass_a(t_0)|` over the trace, per phase.
pub fn mass_drift(records: &[StepDiagnostics]) -> [f64; 2] {
    let Some(first) = records.first() else {
        return [0.0, 0.0];
    };
    records.iter().fold([0.0, 0.0], |[d1, d2], r| {
        [d1.max((r.mass1 - first.mass1).abs()), d2.max((r.mass2 - first.mass2).abs())]
    })
}

/// Number of steps of size `dt` in `t_final`, if it divides evenly.
pub fn steps_for(t_final: f64, dt: f64) -> Result<u64> {
    if !(dt > 0.0 && t_final > 0.0 && dt.is_finite() && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt = {dt} and T = {t_final} must be positive")));
    }
    let q = t_final / dt;
    let n = q.round();
    if (q - n).abs() > 1e-9 * q || n < 1.0 {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not divide T = {t_final}")));
    }
    Ok(n as u64)
}

/// Takes `steps` steps of size `dt` from `initial`.
pub fn integrate(
    initial: &PhaseState,
    p: &ModelParams,
    dt: f64,
    steps: u64,
    cfg: &SolverConfig,
) -> Result<PhaseState> {
    let mut state = initial.clone();
    for _ in 0..steps {
        state = step(&state, dt, p, cfg)?.next;
    }
    Ok(state)
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub initial: PhaseState,
    pub params: ModelParams,
    pub t_final: f64,
    /// Strictly decreasing time steps.
    pub ladder: Vec<f64>,
    pub reference_dt: f64,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub l2_err_1: f64,
    pub l2_err_2: f64,
    pub linf_err_1: f64,
    pub linf_err_2: f64,
    pub rate_l2_1: Option<f64>,
    pub rate_l2_2: Option<f64>,
    pub rate_linf_1: Option<f64>,
    pub rate_linf_2: Option<f64>,
}

impl ConvergenceRow {
    /// The four rates, when present.
    pub fn rates(&self) -> Option<[f64; 4]> {
        Some([self.rate_l2_1?, self.rate_l2_2?, self.rate_linf_1?, self.rate_linf_2?])
    }
}

impl ConvergenceStudy {
    fn validate(&self) -> Result<Vec<u64>> {
        if self.ladder.is_empty() {
            return Err(Error::InvalidArgument("empty time-step ladder".into()));
        }
        if self.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidArgument("time-step ladder must be strictly decreasing".into()));
        }
        let finest = *self.ladder.last().expect("nonempty");
        if !(self.reference_dt < finest) {
            return Err(Error::InvalidArgument(format!(
                "reference dt = {} must be below the finest ladder entry {finest}",
                self.reference_dt
            )));
        }
        self.ladder.iter().chain([&self.reference_dt]).map(|&dt| steps_for(self.t_final, dt)).collect()
    }
}

/// `log2(coarse / fine)` when both errors are positive.
fn rate(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0).then(|| (coarse / fine).log2())
}

/// Runs every ladder entry and the reference to the final time and reports
/// errors against the reference. Rates are filled only between consecutive
/// entries that differ by exactly a factor of two.
pub fn convergence_study(study: &ConvergenceStudy) -> Result<Vec<ConvergenceRow>> {
    let steps = study.validate()?;
    let dts: Vec<f64> = study.ladder.iter().copied().chain([study.reference_dt]).collect();
    let finals: Vec<PhaseState> = dts
        .par_iter()
        .zip(&steps)
        .map(|(&dt, &n)| {
            integrate(&study.initial, &study.params, dt, n, &study.solver)
                .map_err(|e| Error::StudyFailed { dt, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let (reference, runs) = finals.split_last().expect("nonempty");

    let errs: Vec<[f64; 4]> = runs
        .iter()
        .map(|s| {
            let e1: CellField = s.phi1() - reference.phi1();
            let e2: CellField = s.phi2() - reference.phi2();
            [norm2(&e1), norm2(&e2), norm_inf(&e1), norm_inf(&e2)]
        })
        .collect();

    let mut rows = Vec::with_capacity(runs.len());
    for (k, e) in errs.iter().enumerate() {
        let halving = k > 0 && (study.ladder[k - 1] / study.ladder[k] - 2.0).abs() <= 1e-12;
        let r = |c: usize| if halving { rate(errs[k - 1][c], e[c]) } else { None };
        rows.push(ConvergenceRow {
            dt: study.ladder[k],
            l2_err_1: e[0],
            l2_err_2: e[1],
            linf_err_1: e[2],
            linf_err_2: e[3],
            rate_l2_1: r(0),
            rate_l2_2: r(1),
            rate_linf_1: r(2),
            rate_linf_2: r(3),
        });
    }
    Ok(rows)
}
