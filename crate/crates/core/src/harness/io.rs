//! CSV and checkpoint formats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::TracePoint;
use crate::error::{Error, Result};
use crate::rl::{EvalPoint, TrainerState};
use crate::stats::EstimatorMode;

/// One plot-data row: a trace point tagged with the tracker label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub iteration: usize,
    pub mode: String,
    pub true_mu: f64,
    pub est_mu: f64,
    pub true_var: f64,
    pub est_var: f64,
}

/// Writes `iteration,mode,true_mu,est_mu,true_var,est_var`. An empty trace
/// still gets the header.
pub fn write_plotdata(path: &Path, mode: &str, trace: &[TracePoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["iteration", "mode", "true_mu", "est_mu", "true_var", "est_var"])?;
    for p in trace {
        w.serialize(PlotRow {
            iteration: p.iteration,
            mode: mode.to_string(),
            true_mu: p.true_mu,
            est_mu: p.est_mu,
            true_var: p.true_var,
            est_var: p.est_var,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plotdata(path: &Path) -> Result<Vec<PlotRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    step: u64,
    eval_return: f64,
}

pub fn write_curve(path: &Path, curve: &[EvalPoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["step", "eval_return"])?;
    for p in curve {
        w.serialize(CurveRow { step: p.step, eval_return: p.mean_return })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<EvalPoint>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize::<CurveRow>()
        .map(|r| Ok(r.map(|c| EvalPoint { step: c.step, mean_return: c.eval_return })?))
        .collect()
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// A resumable RL run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub experiment: String,
    pub mode: EstimatorMode,
    pub seed: u64,
    pub checkpoint_interval: u64,
    pub trainer: TrainerState,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        // Write then rename so an interrupted save never leaves a torn file.
        let tmp = path.with_extension("json.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer(&mut w, self)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        Ok(c)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
