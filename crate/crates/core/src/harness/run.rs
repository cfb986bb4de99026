//! Experiment execution and result aggregation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task};
use super::io::{write_curve, write_json, write_plotdata, Checkpoint, CHECKPOINT_VERSION};
use crate::envs::{tracking_benchmark, DriftStream, Tracker};
use crate::error::{Error, Result};
use crate::rl::{EvalPoint, Trainer};
use crate::stats::EstimatorMode;

/// Environment variable naming the directory relative output paths resolve against.
pub const OUTPUT_ROOT_ENV: &str = "CAREBN_OUTPUT_ROOT";

/// `$CAREBN_OUTPUT_ROOT`, or the working directory when unset.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Mean and sample standard deviation (`n − 1`; zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// One row of the RL summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlSummaryRow {
    pub mode: String,
    pub seeds: usize,
    pub final_mean: f64,
    pub final_std: f64,
    pub final_median: f64,
    /// Maximum over evaluation points of the cross-seed mean return.
    pub max_average: f64,
    /// Sample std across seeds at the `max_average` point.
    pub max_average_std: f64,
    pub max_average_step: u64,
}

/// Aggregates the learning curves of one mode. Only evaluation steps present in
/// every curve count towards the max average.
pub fn summarize_curves(mode: &str, curves: &[Vec<EvalPoint>]) -> RlSummaryRow {
    let finals: Vec<f64> = curves.iter().filter_map(|c| c.last().map(|p| p.mean_return)).collect();
    let (final_mean, final_std) = mean_std(&finals);
    let mut best: Option<(f64, f64, u64)> = None;
    if let Some(first) = curves.first() {
        for p in first {
            let at: Option<Vec<f64>> = curves
                .iter()
                .map(|c| c.iter().find(|q| q.step == p.step).map(|q| q.mean_return))
                .collect();
            if let Some(at) = at {
                let (m, s) = mean_std(&at);
                if best.is_none_or(|b| m > b.0) {
                    best = Some((m, s, p.step));
                }
            }
        }
    }
    let (max_average, max_average_std, max_average_step) = best.unwrap_or((f64::NAN, f64::NAN, 0));
    RlSummaryRow {
        mode: mode.to_string(),
        seeds: curves.len(),
        final_mean,
        final_std,
        final_median: median(&finals),
        max_average,
        max_average_std,
        max_average_step,
    }
}

/// One row of the tracking summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummaryRow {
    pub mode: String,
    pub seeds: usize,
    pub mse_mu_mean: f64,
    pub mse_mu_std: f64,
    pub mse_var_mean: f64,
    pub mse_var_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FinalReturnRow {
    mode: String,
    seed: u64,
    final_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ErrorRow {
    iteration: usize,
    mu_sq_err: f64,
    var_sq_err: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub rl: Vec<RlSummaryRow>,
    pub track: Vec<TrackSummaryRow>,
}

/// Runs every `(mode, seed)` pair and writes results under
/// `cfg.output_path(root)`. `log` receives one line per finished run.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path, log: &mut dyn FnMut(String)) -> Result<ExperimentReport> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let dir = cfg.output_path(root);
    std::fs::create_dir_all(&dir)?;
    let mut report = ExperimentReport { output_dir: dir.clone(), ..Default::default() };
    match cfg.task {
        Task::Rl => run_rl(cfg, &dir, &mut report, log)?,
        Task::Track => run_track(cfg, &dir, &mut report, log)?,
    }
    let resolved = dir.join("config.resolved.json");
    write_json(&resolved, cfg)?;
    report.files.push(resolved);
    Ok(report)
}

fn run_dir(dir: &Path, mode: EstimatorMode, seed: u64) -> PathBuf {
    dir.join(mode.as_str()).join(format!("seed{seed}"))
}

fn run_rl(cfg: &ExperimentConfig, dir: &Path, report: &mut ExperimentReport, log: &mut dyn FnMut(String)) -> Result<()> {
    let mut finals = Vec::new();
    for mode in cfg.effective_modes() {
        let mut curves = Vec::with_capacity(cfg.seeds.len());
        for &seed in &cfg.seeds {
            let rd = run_dir(dir, mode, seed);
            std::fs::create_dir_all(&rd)?;
            let trainer = Trainer::new(cfg.agent_for(mode), cfg.env, seed)?;
            let ckpt = Checkpoint {
                version: CHECKPOINT_VERSION,
                experiment: cfg.name.clone(),
                mode,
                seed,
                checkpoint_interval: cfg.checkpoint_interval,
                trainer: trainer.state(),
            };
            let (ckpt_path, curve_path) = (rd.join("checkpoint.json"), rd.join("curve.csv"));
            let curve = drive(trainer, ckpt, &ckpt_path, &curve_path)?;
            report.files.extend([curve_path, ckpt_path]);
            if let Some(last) = curve.last() {
                finals.push(FinalReturnRow { mode: mode.to_string(), seed, final_return: last.mean_return });
                log(format!("{mode} seed {seed}: final eval return {:.2} at step {}", last.mean_return, last.step));
            } else {
                log(format!("{mode} seed {seed}: no evaluation points"));
            }
            curves.push(curve);
        }
        report.rl.push(summarize_curves(mode.as_str(), &curves));
    }
    let path = dir.join("summary.csv");
    write_rows(&path, &report.rl)?;
    report.files.push(path);
    let path = dir.join("final_returns.csv");
    write_rows(&path, &finals)?;
    report.files.push(path);
    Ok(())
}

/// Runs `trainer` to completion, checkpointing every `ckpt.checkpoint_interval`
/// steps into `ckpt_path`, and writes the learning curve to `curve_path`.
fn drive(mut trainer: Trainer, mut ckpt: Checkpoint, ckpt_path: &Path, curve_path: &Path) -> Result<Vec<EvalPoint>> {
    let interval = ckpt.checkpoint_interval;
    while !trainer.is_done() {
        let until = trainer.step_count().checked_div(interval).map_or(u64::MAX, |k| (k + 1) * interval);
        trainer.run_until(until)?;
        if interval > 0 && !trainer.is_done() {
            ckpt.trainer = trainer.state();
            ckpt.save(ckpt_path)?;
        }
    }
    ckpt.trainer = trainer.state();
    ckpt.save(ckpt_path)?;
    write_curve(curve_path, trainer.curve())?;
    Ok(trainer.curve().to_vec())
}

/// Continues the run stored at `path` to its configured end, rewriting the
/// checkpoint in place and `curve.csv` next to it. Returns the checkpoint as
/// loaded and the complete learning curve.
pub fn resume(path: &Path) -> Result<(Checkpoint, Vec<EvalPoint>)> {
    let ckpt = Checkpoint::load(path)?;
    let trainer = Trainer::from_state(ckpt.trainer.clone())?;
    let curve_path = path.parent().unwrap_or(Path::new(".")).join("curve.csv");
    let curve = drive(trainer, ckpt.clone(), path, &curve_path)?;
    Ok((ckpt, curve))
}

fn run_track(cfg: &ExperimentConfig, dir: &Path, report: &mut ExperimentReport, log: &mut dyn FnMut(String)) -> Result<()> {
    let stream_cfg = cfg.stream.clone().ok_or_else(|| Error::Config("stream is required".into()))?;
    let modes = cfg.effective_modes();
    let trackers: Vec<Tracker> = modes.iter().map(|m| Tracker::Estimator(cfg.estimator_for(*m))).collect();
    let mut mse: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); modes.len()];
    let mut labels = Vec::new();
    for &seed in &cfg.seeds {
        let stream = DriftStream::new(stream_cfg.clone(), seed)?;
        let results = tracking_benchmark(&trackers, &stream)?;
        let sd = dir.join(format!("seed{seed}"));
        std::fs::create_dir_all(&sd)?;
        labels = results.iter().map(|r| r.label.clone()).collect();
        for ((mode, res), acc) in modes.iter().zip(&results).zip(&mut mse) {
            let trace = sd.join(format!("trace_{}.csv", mode.as_str()));
            write_plotdata(&trace, &res.label, &res.trace)?;
            let errors = sd.join(format!("errors_{}.csv", mode.as_str()));
            let rows: Vec<ErrorRow> = (0..res.mu_sq_err.len())
                .map(|i| ErrorRow { iteration: i, mu_sq_err: res.mu_sq_err[i], var_sq_err: res.var_sq_err[i] })
                .collect();
            write_rows(&errors, &rows)?;
            report.files.extend([trace, errors]);
            acc.0.push(res.mse_mu(cfg.burn_in));
            acc.1.push(res.mse_var(cfg.burn_in));
            log(format!(
                "{} seed {seed}: mean MSE {:.3e}, variance MSE {:.3e}",
                res.label,
                res.mse_mu(cfg.burn_in),
                res.mse_var(cfg.burn_in)
            ));
        }
    }
    for (label, (mu, var)) in labels.iter().zip(&mse) {
        let (mse_mu_mean, mse_mu_std) = mean_std(mu);
        let (mse_var_mean, mse_var_std) = mean_std(var);
        report.track.push(TrackSummaryRow {
            mode: label.clone(),
            seeds: cfg.seeds.len(),
            mse_mu_mean,
            mse_mu_std,
            mse_var_mean,
            mse_var_std,
        });
    }
    let path = dir.join("summary.csv");
    write_rows(&path, &report.track)?;
    report.files.push(path);
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
