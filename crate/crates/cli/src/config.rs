//! Experiment configuration as flat `section.key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; missing keys keep the defaults of [`ExperimentConfig::default`].
//! Lists are comma separated. Floats are written in Rust's shortest
//! round-trip form, so `parse(serialize(cfg)) == cfg`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use mmc_core::diagnostics::steps_for;
use mmc_core::init::check_bounds;
use mmc_core::{Fallback, GridSpec, ModelParams, ModelSettings, SolverConfig};

use crate::error::{CliError, Result};

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "MMC_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Cosine,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub kind: InitKind,
    pub phi10: f64,
    pub phi20: f64,
    pub amplitude: f64,
    pub seed: u64,
    /// Draw the second phase's perturbation independently of the first.
    pub independent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// A trace row is written every this many steps, and at the last step.
    pub trace_every: u64,
    pub snapshot_times: Vec<f64>,
    /// Steps between checkpoints; 0 disables them.
    pub checkpoint_every: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub final_time: f64,
    pub ladder: Vec<f64>,
    pub reference_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub n: usize,
    pub length: f64,
    pub model: ModelSettings,
    pub dt: f64,
    pub final_time: f64,
    pub init: InitConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub convergence: ConvergenceConfig,
}

impl Default for ExperimentConfig {
    /// Smooth-data run on a 64 x 64 grid over `[0, 64]^2`.
    fn default() -> Self {
        Self {
            name: "example1".into(),
            n: 64,
            length: 64.0,
            model: ModelSettings::default(),
            dt: 1e-4,
            final_time: 1.0,
            init: InitConfig {
                kind: InitKind::Cosine,
                phi10: 0.1,
                phi20: 0.5,
                amplitude: 0.01,
                seed: 0,
                independent: false,
            },
            solver: SolverConfig::default(),
            output: OutputConfig {
                dir: PathBuf::from("out"),
                trace_every: 1,
                snapshot_times: Vec::new(),
                checkpoint_every: 0,
            },
            convergence: ConvergenceConfig {
                final_time: 0.05,
                ladder: vec![4e-4, 2e-4, 1e-4, 5e-5],
                reference_dt: 1e-5,
            },
        }
    }
}

/// Every recognized key, in serialization order.
pub const KEYS: &[&str] = &[
    "run.name",
    "grid.n",
    "grid.length",
    "model.m0",
    "model.n0",
    "model.chi12",
    "model.chi13",
    "model.chi23",
    "model.eps1",
    "model.eps2",
    "model.eps3",
    "model.mobility1",
    "model.mobility2",
    "time.dt",
    "time.final",
    "init.kind",
    "init.phi10",
    "init.phi20",
    "init.amplitude",
    "init.seed",
    "init.independent",
    "solver.tol",
    "solver.max_vcycles",
    "solver.smoother_sweeps",
    "solver.newton_iters",
    "solver.boundary_fraction",
    "solver.coarsest_n",
    "solver.coarse_sweeps",
    "solver.fallback",
    "output.dir",
    "output.trace_every",
    "output.snapshot_times",
    "output.checkpoint_every",
    "converge.final",
    "converge.ladder",
    "converge.reference_dt",
];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(key, x.trim())).collect()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            cfg.set(key, value.trim())?;
        }
        Ok(cfg)
    }

    /// Assigns one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let m = &mut self.model;
        let s = &mut self.solver;
        match key {
            "run.name" => self.name = v.to_string(),
            "grid.n" => self.n = num(key, v)?,
            "grid.length" => self.length = num(key, v)?,
            "model.m0" => m.m0 = num(key, v)?,
            "model.n0" => m.n0 = num(key, v)?,
            "model.chi12" => m.chi12 = num(key, v)?,
            "model.chi13" => m.chi13 = num(key, v)?,
            "model.chi23" => m.chi23 = num(key, v)?,
            "model.eps1" => m.eps1 = num(key, v)?,
            "model.eps2" => m.eps2 = num(key, v)?,
            "model.eps3" => m.eps3 = num(key, v)?,
            "model.mobility1" => m.mob1 = num(key, v)?,
            "model.mobility2" => m.mob2 = num(key, v)?,
            "time.dt" => self.dt = num(key, v)?,
            "time.final" => self.final_time = num(key, v)?,
            "init.kind" => {
                self.init.kind = match v {
                    "cosine" => InitKind::Cosine,
                    "random" => InitKind::Random,
                    _ => return Err(CliError::Config(format!("{key}: expected cosine or random, got {v:?}"))),
                }
            }
            "init.phi10" => self.init.phi10 = num(key, v)?,
            "init.phi20" => self.init.phi20 = num(key, v)?,
            "init.amplitude" => self.init.amplitude = num(key, v)?,
            "init.seed" => self.init.seed = num(key, v)?,
            "init.independent" => self.init.independent = num(key, v)?,
            "solver.tol" => s.nonlinear_tol = num(key, v)?,
            "solver.max_vcycles" => s.max_vcycles = num(key, v)?,
            "solver.smoother_sweeps" => s.smoother_sweeps = num(key, v)?,
            "solver.newton_iters" => s.newton_iters_per_point = num(key, v)?,
            "solver.boundary_fraction" => s.boundary_fraction = num(key, v)?,
            "solver.coarsest_n" => s.coarsest_n = num(key, v)?,
            "solver.coarse_sweeps" => s.coarse_sweeps = num(key, v)?,
            "solver.fallback" => {
                s.fallback = match v {
                    "none" => Fallback::None,
                    "newton" => Fallback::GlobalNewton,
                    _ => return Err(CliError::Config(format!("{key}: expected none or newton, got {v:?}"))),
                }
            }
            "output.dir" => self.output.dir = PathBuf::from(v),
            "output.trace_every" => self.output.trace_every = num(key, v)?,
            "output.snapshot_times" => self.output.snapshot_times = list(key, v)?,
            "output.checkpoint_every" => self.output.checkpoint_every = num(key, v)?,
            "converge.final" => self.convergence.final_time = num(key, v)?,
            "converge.ladder" => self.convergence.ladder = list(key, v)?,
            "converge.reference_dt" => self.convergence.reference_dt = num(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    /// Replaces `output.dir` with the environment override, when set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output.dir = PathBuf::from(dir);
        }
    }

    fn value(&self, key: &str) -> String {
        let m = &self.model;
        let s = &self.solver;
        match key {
            "run.name" => self.name.clone(),
            "grid.n" => self.n.to_string(),
            "grid.length" => self.length.to_string(),
            "model.m0" => m.m0.to_string(),
            "model.n0" => m.n0.to_string(),
            "model.chi12" => m.chi12.to_string(),
            "model.chi13" => m.chi13.to_string(),
            "model.chi23" => m.chi23.to_string(),
            "model.eps1" => m.eps1.to_string(),
            "model.eps2" => m.eps2.to_string(),
            "model.eps3" => m.eps3.to_string(),
            "model.mobility1" => m.mob1.to_string(),
            "model.mobility2" => m.mob2.to_string(),
            "time.dt" => self.dt.to_string(),
            "time.final" => self.final_time.to_string(),
            "init.kind" => match self.init.kind {
                InitKind::Cosine => "cosine".into(),
                InitKind::Random => "random".into(),
            },
            "init.phi10" => self.init.phi10.to_string(),
            "init.phi20" => self.init.phi20.to_string(),
            "init.amplitude" => self.init.amplitude.to_string(),
            "init.seed" => self.init.seed.to_string(),
            "init.independent" => self.init.independent.to_string(),
            "solver.tol" => s.nonlinear_tol.to_string(),
            "solver.max_vcycles" => s.max_vcycles.to_string(),
            "solver.smoother_sweeps" => s.smoother_sweeps.to_string(),
            "solver.newton_iters" => s.newton_iters_per_point.to_string(),
            "solver.boundary_fraction" => s.boundary_fraction.to_string(),
            "solver.coarsest_n" => s.coarsest_n.to_string(),
            "solver.coarse_sweeps" => s.coarse_sweeps.to_string(),
            "solver.fallback" => match s.fallback {
                Fallback::None => "none".into(),
                Fallback::GlobalNewton => "newton".into(),
            },
            "output.dir" => self.output.dir.display().to_string(),
            "output.trace_every" => self.output.trace_every.to_string(),
            "output.snapshot_times" => join(&self.output.snapshot_times),
            "output.checkpoint_every" => self.output.checkpoint_every.to_string(),
            "converge.final" => self.convergence.final_time.to_string(),
            "converge.ladder" => join(&self.convergence.ladder),
            "converge.reference_dt" => self.convergence.reference_dt.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            writeln!(out, "{key} = {}", self.value(key)).expect("write to string");
        }
        out
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.length).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Number of steps to the final time.
    pub fn total_steps(&self) -> Result<u64> {
        steps_for(self.final_time, self.dt).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Step indices at which snapshots are written, ascending.
    pub fn snapshot_steps(&self) -> Result<Vec<u64>> {
        let total = self.total_steps()?;
        let mut steps = Vec::with_capacity(self.output.snapshot_times.len());
        for &t in &self.output.snapshot_times {
            let k = if t == 0.0 {
                0
            } else {
                steps_for(t, self.dt)
                    .map_err(|_| CliError::Config(format!("snapshot time {t} is not a multiple of dt = {}", self.dt)))?
            };
            if k > total {
                return Err(CliError::Config(format!("snapshot time {t} is past the final time {}", self.final_time)));
            }
            steps.push(k);
        }
        steps.sort_unstable();
        steps.dedup();
        Ok(steps)
    }

    /// Checks every invariant that does not need the solver.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.name.is_empty() || self.name.contains(['\n', '\r']) || self.name.trim() != self.name {
            return bad("run.name must be a nonempty single line without surrounding blanks".into());
        }
        self.grid()?;
        self.params()?;
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        check_bounds(self.init.phi10, self.init.phi20, self.init.amplitude)
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.total_steps()?;
        self.snapshot_steps()?;
        if self.output.trace_every == 0 {
            return bad("output.trace_every must be positive".into());
        }
        let c = &self.convergence;
        if c.ladder.is_empty() {
            return bad("converge.ladder must not be empty".into());
        }
        for &dt in c.ladder.iter().chain([&c.reference_dt]) {
            steps_for(c.final_time, dt).map_err(|e| CliError::Config(format!("converge: {e}")))?;
        }
        if c.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("converge.ladder must be strictly decreasing".into());
        }
        if !(c.reference_dt < *c.ladder.last().expect("nonempty")) {
            return bad("converge.reference_dt must be below every ladder entry".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn parses_comments_lists_and_overrides() {
        let text = "# smooth data\n\ngrid.n = 32\noutput.snapshot_times = 0, 0.5 ,1\ninit.kind = random\n";
        let mut cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.n, 32);
        assert_eq!(cfg.output.snapshot_times, vec![0.0, 0.5, 1.0]);
        assert_eq!(cfg.init.kind, InitKind::Random);
        cfg.apply_override("solver.fallback=newton").unwrap();
        assert_eq!(cfg.solver.fallback, Fallback::GlobalNewton);
        assert_eq!(cfg.snapshot_steps().unwrap(), vec![0, 5000, 10000]);
    }

    #[test]
    fn rejects_malformed_text() {
        for text in ["grid.n 32", "grid.n = x", "grid.size = 4", "grid.n = 8\ngrid.n = 16", "init.kind = square"] {
            assert!(matches!(ExperimentConfig::parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn rejects_invalid_values() {
        let cases = [
            "init.phi10 = 0.005",
            "init.phi20 = 0.89",
            "model.chi12 = 40",
            "model.m0 = -1",
            "time.dt = 0.3",
            "grid.n = 2",
            "solver.boundary_fraction = 1",
            "output.trace_every = 0",
            "output.snapshot_times = 2.0",
            "output.snapshot_times = 0.00015",
            "converge.ladder = 1e-4, 2e-4",
            "converge.reference_dt = 5e-5",
            "run.name = ",
        ];
        for text in cases {
            let cfg = ExperimentConfig::parse(text).unwrap();
            assert!(matches!(cfg.validate(), Err(CliError::Config(_))), "{text}");
        }
        let padded = ExperimentConfig { name: " x".into(), ..Default::default() };
        assert!(padded.validate().is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = ExperimentConfig::default();
        for key in KEYS {
            let mut other = ExperimentConfig::default();
            other.set(key, &cfg.value(key)).unwrap();
            assert_eq!(other, cfg, "{key}");
        }
    }
}
