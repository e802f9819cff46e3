//! Runs experiments and writes their artifacts.
//!
//! An output directory holds `config.txt`, `trace.csv`, snapshots named
//! `snapshot_<step>.mmc`, the latest `checkpoint.mmck` and `final.mmc`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mmc_core::diagnostics::{convergence_study, observe, ConvergenceStudy};
use mmc_core::{init_cosine, init_random, step, ConvergenceRow, PhaseState};

use crate::config::{ExperimentConfig, InitKind};
use crate::error::{CliError, Result};
use crate::formats::{
    convergence_table, encode_checkpoint, parse_trace, read_checkpoint, trace_row, write_atomic, write_snapshot,
    Checkpoint, TRACE_HEADER,
};

pub const TRACE_FILE: &str = "trace.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.mmck";
pub const FINAL_FILE: &str = "final.mmc";
pub const CONFIG_FILE: &str = "config.txt";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

pub fn snapshot_name(step: u64) -> String {
    format!("snapshot_{step:010}.mmc")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    /// Last completed step.
    pub step: u64,
    /// False when the run stopped early on request.
    pub completed: bool,
    pub state: PhaseState,
}

pub fn initial_state(cfg: &ExperimentConfig) -> Result<PhaseState> {
    let spec = cfg.grid()?;
    let i = &cfg.init;
    let st = match i.kind {
        InitKind::Cosine => init_cosine(spec, i.phi10, i.phi20, i.amplitude),
        InitKind::Random => init_random(spec, i.phi10, i.phi20, i.amplitude, i.seed, i.independent),
    };
    st.map_err(|e| CliError::Config(e.to_string()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

struct Trace {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Trace {
    fn write(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(CliError::io(&self.path))
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(CliError::io(&self.path))
    }
}

/// Runs `cfg` from its initial data into `cfg.output.dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    run_until(cfg, None)
}

/// Like [`run_experiment`] but stops after step `stop_after` if given.
pub fn run_until(cfg: &ExperimentConfig, stop_after: Option<u64>) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    create_dir(&dir)?;
    let conf = dir.join(CONFIG_FILE);
    fs::write(&conf, cfg.serialize()).map_err(CliError::io(&conf))?;
    let state = initial_state(cfg)?;
    let path = dir.join(TRACE_FILE);
    let file = File::create(&path).map_err(CliError::io(&path))?;
    let mut trace = Trace { path, out: BufWriter::new(file) };
    trace.write(TRACE_HEADER)?;
    let p = cfg.params()?;
    let d0 = observe(&state, &p, 0, 0.0, 0, 0.0).map_err(|e| CliError::Solver { step: 0, source: e })?;
    trace.write(&trace_row(&d0))?;
    if cfg.snapshot_steps()?.first() == Some(&0) {
        write_snapshot(&dir.join(snapshot_name(0)), &state, 0.0)?;
    }
    drive(cfg, &dir, 0, state, &mut trace, stop_after)
}

/// Continues the run saved in `checkpoint`, writing into its directory.
///
/// Trace rows past the checkpoint are discarded first, so the finished trace
/// matches an uninterrupted run byte for byte.
pub fn resume(checkpoint: &Path, stop_after: Option<u64>) -> Result<RunSummary> {
    let Checkpoint { mut config, step, state } = read_checkpoint(checkpoint)?;
    let dir = checkpoint.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    config.output.dir = dir.clone();
    config.validate()?;
    if state.spec() != &config.grid()? {
        return Err(CliError::format(checkpoint, "state grid does not match the embedded config"));
    }

    let path = dir.join(TRACE_FILE);
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let rows = parse_trace(&text, &path)?;
    if !rows.iter().any(|r| r.step == step) {
        return Err(CliError::format(&path, format!("no trace row for checkpoint step {step}")));
    }
    let keep = rows.iter().take_while(|r| r.step <= step).count();
    let kept: String = text.lines().take(keep + 1).flat_map(|l| [l, "\n"]).collect();
    write_atomic(&path, kept.as_bytes())?;
    let file = OpenOptions::new().append(true).open(&path).map_err(CliError::io(&path))?;
    let mut trace = Trace { path, out: BufWriter::new(file) };
    drive(&config, &dir, step, state, &mut trace, stop_after)
}

fn drive(
    cfg: &ExperimentConfig,
    dir: &Path,
    start: u64,
    mut state: PhaseState,
    trace: &mut Trace,
    stop_after: Option<u64>,
) -> Result<RunSummary> {
    let p = cfg.params()?;
    let total = cfg.total_steps()?;
    let snaps = cfg.snapshot_steps()?;
    let every = cfg.output.trace_every;
    let ckpt_every = cfg.output.checkpoint_every;
    for k in start + 1..=total {
        let r = match step(&state, cfg.dt, &p, &cfg.solver) {
            Ok(r) => r,
            Err(source) => {
                trace.flush()?;
                return Err(CliError::Solver { step: k, source });
            }
        };
        state = r.next;
        let time = k as f64 * cfg.dt;
        if k % every == 0 || k == total {
            let d = observe(&state, &p, k, time, r.vcycles, r.final_residual)
                .map_err(|source| CliError::Solver { step: k, source })?;
            trace.write(&trace_row(&d))?;
        }
        if snaps.binary_search(&k).is_ok() {
            write_snapshot(&dir.join(snapshot_name(k)), &state, time)?;
        }
        if ckpt_every > 0 && k % ckpt_every == 0 && k < total {
            trace.flush()?;
            let c = Checkpoint { config: cfg.clone(), step: k, state: state.clone() };
            write_atomic(&dir.join(CHECKPOINT_FILE), &encode_checkpoint(&c))?;
        }
        if stop_after == Some(k) && k < total {
            trace.flush()?;
            return Ok(RunSummary { dir: dir.to_path_buf(), step: k, completed: false, state });
        }
    }
    trace.flush()?;
    write_snapshot(&dir.join(FINAL_FILE), &state, total as f64 * cfg.dt)?;
    Ok(RunSummary { dir: dir.to_path_buf(), step: total, completed: true, state })
}

/// Runs the time-step ladder of `cfg.convergence` and writes the table to
/// `convergence.csv` in the output directory.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let c = &cfg.convergence;
    let study = ConvergenceStudy {
        initial: initial_state(cfg)?,
        params: cfg.params()?,
        t_final: c.final_time,
        ladder: c.ladder.clone(),
        reference_dt: c.reference_dt,
        solver: cfg.solver.clone(),
    };
    let rows = convergence_study(&study).map_err(|source| CliError::Solver { step: 0, source })?;
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let path = dir.join(CONVERGENCE_FILE);
    fs::write(&path, convergence_table(&rows)).map_err(CliError::io(&path))?;
    Ok(rows)
}
