//! Ready-made configurations for the three reference experiments at desk
//! scale (64 x 64 cells). The sweep values of the second experiment are
//! choices of this tool.

use crate::config::{ExperimentConfig, InitKind};

const EPS_SWEEP: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
const PHI10_SWEEP: [f64; 4] = [0.05, 0.1, 0.15, 0.2];
const PHI20_SWEEP: [f64; 4] = [0.3, 0.4, 0.5, 0.6];

/// Names accepted by [`preset`].
pub fn names() -> Vec<String> {
    let mut out = vec!["example1".to_string()];
    out.extend(EPS_SWEEP.iter().map(|v| format!("example2-eps-{v}")));
    out.extend(PHI10_SWEEP.iter().map(|v| format!("example2-phi10-{v}")));
    out.extend(PHI20_SWEEP.iter().map(|v| format!("example2-phi20-{v}")));
    out.push("example3".into());
    out
}

fn random(name: &str, final_time: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig { name: name.into(), final_time, ..Default::default() };
    c.init.kind = InitKind::Random;
    c.init.seed = 1;
    c.output.trace_every = 100;
    c.output.snapshot_times = vec![final_time];
    c.output.checkpoint_every = 10_000;
    c
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    if name == "example1" {
        let mut c = ExperimentConfig::default();
        c.output.snapshot_times = vec![0.5, 1.0];
        c.output.checkpoint_every = 2_000;
        return Some(c);
    }
    if name == "example3" {
        let mut c = random(name, 100.0);
        c.output.snapshot_times = vec![2.0, 30.0, 100.0];
        return Some(c);
    }
    let (sweep, value) = name.strip_prefix("example2-")?.split_once('-')?;
    let v: f64 = value.parse().ok()?;
    let has = |xs: &[f64]| xs.contains(&v);
    match sweep {
        "eps" if has(&EPS_SWEEP) => {
            let mut c = random(name, 40.0);
            c.model.eps1 = v;
            c.model.eps2 = v;
            c.model.eps3 = v;
            Some(c)
        }
        "phi10" if has(&PHI10_SWEEP) => {
            let mut c = random(name, 40.0);
            c.init.phi10 = v;
            Some(c)
        }
        "phi20" if has(&PHI20_SWEEP) => {
            let mut c = random(name, 20.0);
            c.init.phi20 = v;
            Some(c)
        }
        _ => None,
    }
}
