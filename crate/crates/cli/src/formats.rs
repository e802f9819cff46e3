//! On-disk formats: the CSV trace, binary snapshots and checkpoints, and the
//! convergence table.
//!
//! Snapshot (`MMC1`), little-endian throughout:
//!
//! ```text
//! b"MMC1" | u32 version = 1 | u32 N | f64 L | f64 time | N^2 f64 phi1 | N^2 f64 phi2
//! ```
//!
//! Checkpoint (`MMCK`):
//!
//! ```text
//! b"MMCK" | u32 version = 1 | u64 step | u64 config length | config text | snapshot
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use mmc_core::{CellField, ConvergenceRow, GridSpec, PhaseState, StepDiagnostics};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const TRACE_HEADER: &str = "step,time,energy,mass1,mass2,min1,max1,min2,max2,min_sum,max_sum,vcycles,residual";

pub const CONVERGENCE_HEADER: &str =
    "dt,l2_err_1,rate_l2_1,l2_err_2,rate_l2_2,linf_err_1,rate_linf_1,linf_err_2,rate_linf_2";

const SNAPSHOT_MAGIC: &[u8; 4] = b"MMC1";
const CHECKPOINT_MAGIC: &[u8; 4] = b"MMCK";
const VERSION: u32 = 1;

/// One trace row, floats with 17 significant digits.
pub fn trace_row(d: &StepDiagnostics) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
        d.step,
        d.time,
        d.energy,
        d.mass1,
        d.mass2,
        d.min1,
        d.max1,
        d.min2,
        d.max2,
        d.min_sum,
        d.max_sum,
        d.vcycles,
        d.residual
    )
}

fn parse_row(line: &str) -> Option<StepDiagnostics> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 13 {
        return None;
    }
    let x = |k: usize| f[k].parse::<f64>().ok();
    Some(StepDiagnostics {
        step: f[0].parse().ok()?,
        time: x(1)?,
        energy: x(2)?,
        mass1: x(3)?,
        mass2: x(4)?,
        min1: x(5)?,
        max1: x(6)?,
        min2: x(7)?,
        max2: x(8)?,
        min_sum: x(9)?,
        max_sum: x(10)?,
        vcycles: f[11].parse().ok()?,
        residual: x(12)?,
    })
}

/// Parses trace text; rows must be in increasing step order.
pub fn parse_trace(text: &str, path: &Path) -> Result<Vec<StepDiagnostics>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(CliError::format(path, "missing or wrong trace header"));
    }
    let mut rows: Vec<StepDiagnostics> = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = parse_row(line).ok_or_else(|| CliError::format(path, format!("bad trace row {}", k + 2)))?;
        if rows.last().is_some_and(|r| r.step >= row.step) {
            return Err(CliError::format(path, format!("trace row {} is out of order", k + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a trace and checks positivity and energy decay on every row.
pub fn read_trace(path: &Path) -> Result<Vec<StepDiagnostics>> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let rows = parse_trace(&text, path)?;
    mmc_core::diagnostics::validate_trace(&rows).map_err(|e| CliError::format(path, e.to_string()))?;
    Ok(rows)
}

fn put_state(out: &mut Vec<u8>, state: &PhaseState, time: f64) {
    let s = state.spec();
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(s.n() as u32).to_le_bytes());
    out.extend_from_slice(&s.l().to_le_bytes());
    out.extend_from_slice(&time.to_le_bytes());
    for v in state.phi1().values().iter().chain(state.phi2().values()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_snapshot(state: &PhaseState, time: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + 16 * state.spec().len());
    put_state(&mut out, state, time);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(CliError::format(self.path, "truncated file"));
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(CliError::format(self.path, format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(CliError::format(self.path, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn state(&mut self) -> Result<(PhaseState, f64)> {
        self.header(SNAPSHOT_MAGIC)?;
        let n = self.u32()? as usize;
        let l = self.f64()?;
        let time = self.f64()?;
        let spec = GridSpec::new(n, l).map_err(|e| CliError::format(self.path, e.to_string()))?;
        let mut field = || -> Result<CellField> {
            let raw = self.take(8 * spec.len())?;
            let v = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            CellField::from_vec(spec, v).map_err(|e| CliError::format(self.path, e.to_string()))
        };
        let (a, b) = (field()?, field()?);
        let state = PhaseState::new(a, b).map_err(|e| CliError::format(self.path, e.to_string()))?;
        Ok((state, time))
    }

    fn finish(&self) -> Result<()> {
        if !self.buf.is_empty() {
            return Err(CliError::format(self.path, "trailing bytes"));
        }
        Ok(())
    }
}

/// Decodes a snapshot into the state and its time.
pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<(PhaseState, f64)> {
    let mut r = Reader { buf: bytes, path };
    let out = r.state()?;
    r.finish()?;
    Ok(out)
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(CliError::io(&tmp))?;
    f.write_all(bytes).map_err(CliError::io(&tmp))?;
    f.sync_all().map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

pub fn write_snapshot(path: &Path, state: &PhaseState, time: f64) -> Result<()> {
    write_atomic(path, &encode_snapshot(state, time))
}

pub fn read_snapshot(path: &Path) -> Result<(PhaseState, f64)> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    decode_snapshot(&bytes, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    /// Number of completed steps.
    pub step: u64,
    pub state: PhaseState,
}

pub fn encode_checkpoint(c: &Checkpoint) -> Vec<u8> {
    let text = c.config.serialize();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&c.step.to_le_bytes());
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    put_state(&mut out, &c.state, c.step as f64 * c.config.dt);
    out
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, path };
    r.header(CHECKPOINT_MAGIC)?;
    let step = r.u64()?;
    let len = r.u64()? as usize;
    let text = std::str::from_utf8(r.take(len)?).map_err(|_| CliError::format(path, "config is not UTF-8"))?;
    let config = ExperimentConfig::parse(text)?;
    let (state, _) = r.state()?;
    r.finish()?;
    Ok(Checkpoint { config, step, state })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    decode_checkpoint(&bytes, path)
}

fn rate_cell(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |v| format!("{v:.16e}"))
}

/// The convergence table as CSV, missing rates written as `-`.
pub fn convergence_table(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{},{:.16e},{},{:.16e},{},{:.16e},{}\n",
            r.dt,
            r.l2_err_1,
            rate_cell(r.rate_l2_1),
            r.l2_err_2,
            rate_cell(r.rate_l2_2),
            r.linf_err_1,
            rate_cell(r.rate_linf_1),
            r.linf_err_2,
            rate_cell(r.rate_linf_2),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmc_core::{init_random, ModelParams};

    fn state() -> PhaseState {
        init_random(GridSpec::new(8, 3.5).unwrap(), 0.1, 0.5, 0.01, 9, true).unwrap()
    }

    #[test]
    fn snapshot_layout() {
        let st = state();
        let bytes = encode_snapshot(&st, 0.25);
        assert_eq!(bytes.len(), 28 + 16 * 64);
        assert_eq!(&bytes[..4], b"MMC1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 3.5);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 0.25);
        assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), st.phi1().get(0, 0));
        let second = 28 + 8 * 64 + 8;
        assert_eq!(f64::from_le_bytes(bytes[second..second + 8].try_into().unwrap()), st.phi2().get(0, 1));
    }

    #[test]
    fn corrupted_snapshots_are_rejected() {
        let p = Path::new("x.mmc");
        let bytes = encode_snapshot(&state(), 0.0);
        assert!(decode_snapshot(&bytes[..bytes.len() - 1], p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_snapshot(&extra, p).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode_snapshot(&magic, p).is_err());
        let mut version = bytes.clone();
        version[4] = 2;
        assert!(decode_snapshot(&version, p).is_err());
        let mut outside = bytes;
        outside[28..36].copy_from_slice(&1.5f64.to_le_bytes());
        assert!(decode_snapshot(&outside, p).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = Checkpoint { config: ExperimentConfig::default(), step: 17, state: state() };
        let bytes = encode_checkpoint(&c);
        assert_eq!(decode_checkpoint(&bytes, Path::new("c")).unwrap(), c);
        assert!(decode_checkpoint(&encode_snapshot(&c.state, 0.0), Path::new("c")).is_err());
    }

    #[test]
    fn trace_rows_parse_back_exactly() {
        let st = state();
        let d = mmc_core::observe(&st, &ModelParams::reference(), 3, 3e-4, 2, 1.5e-10).unwrap();
        let text = format!("{TRACE_HEADER}\n{}\n", trace_row(&d));
        let rows = parse_trace(&text, Path::new("t")).unwrap();
        assert_eq!(rows, vec![d]);
    }

    #[test]
    fn trace_rejects_bad_input() {
        let p = Path::new("t");
        assert!(parse_trace("step,time\n", p).is_err());
        let row = "1,0,1,0.1,0.5,0.09,0.11,0.49,0.51,0.58,0.62,1,0";
        assert!(parse_trace(&format!("{TRACE_HEADER}\n{row}\n{row}\n"), p).is_err());
        assert!(parse_trace(&format!("{TRACE_HEADER}\n1,2,3\n"), p).is_err());
    }

    #[test]
    fn convergence_table_marks_missing_rates() {
        let row = ConvergenceRow {
            dt: 4e-4,
            l2_err_1: 1.0,
            l2_err_2: 2.0,
            linf_err_1: 3.0,
            linf_err_2: 4.0,
            rate_l2_1: None,
            rate_l2_2: None,
            rate_linf_1: None,
            rate_linf_2: None,
        };
        let t = convergence_table(&[row]);
        let line = t.lines().nth(1).unwrap();
        assert_eq!(line.split(',').filter(|c| *c == "-").count(), 4);
    }
}
