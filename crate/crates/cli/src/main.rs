//! `carebn`: run experiments, resume checkpoints, compute APG.
//!
//! Failures print `error[<category>]: <message>` on stderr and exit with a
//! nonzero code per category (2 usage, 3 validation/config, 4 io, 5 format,
//! 6 precondition/state, 7 argument/numeric).

use std::path::PathBuf;
use std::process::ExitCode;

use carebn::harness::{self, ExperimentConfig};
use carebn::Error;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "carebn", version, about = "Batch-norm statistic estimators for spiking actor-critic agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Directory relative output paths resolve against. Defaults to
        /// $CAREBN_OUTPUT_ROOT, then the working directory.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Average performance gain of RESULTS over BASELINE, both `env,return` CSVs.
    Apg { results: PathBuf, baseline: PathBuf },
    /// Continue an RL run from its checkpoint to the configured step count.
    Resume { checkpoint: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn report(e: &Error) {
    match e {
        Error::Validation(fields) => {
            eprintln!("error[validation]: {} invalid field(s)", fields.len());
            for f in fields {
                eprintln!("  - {f}");
            }
        }
        other => eprintln!("error[{}]: {other}", other.category()),
    }
}

fn execute(cmd: Command) -> carebn::Result<()> {
    match cmd {
        Command::Run { config, output_root } => {
            let cfg = ExperimentConfig::load(&config)?;
            let root = output_root.unwrap_or_else(harness::output_root);
            let report = harness::run_experiment(&cfg, &root, &mut |line| eprintln!("{line}"))?;
            for r in &report.rl {
                println!(
                    "{}: final {:.2} ± {:.2} (median {:.2}), max average {:.2} ± {:.2} at step {} over {} seed(s)",
                    r.mode,
                    r.final_mean,
                    r.final_std,
                    r.final_median,
                    r.max_average,
                    r.max_average_std,
                    r.max_average_step,
                    r.seeds
                );
            }
            for r in &report.track {
                println!(
                    "{}: mean MSE {:.4e} ± {:.1e}, variance MSE {:.4e} ± {:.1e} over {} seed(s)",
                    r.mode, r.mse_mu_mean, r.mse_mu_std, r.mse_var_mean, r.mse_var_std, r.seeds
                );
            }
            println!("results in {}", report.output_dir.display());
        }
        Command::Apg { results, baseline } => {
            let r = harness::read_returns(&results)?;
            let b = harness::read_returns(&baseline)?;
            println!("{:.4}", harness::compute_apg(&r, &b)?);
        }
        Command::Resume { checkpoint } => {
            let (ckpt, curve) = harness::resume(&checkpoint)?;
            match curve.last() {
                Some(p) => println!(
                    "{} seed {}: final eval return {:.2} at step {}",
                    ckpt.mode, ckpt.seed, p.mean_return, p.step
                ),
                None => println!("{} seed {}: no evaluation points", ckpt.mode, ckpt.seed),
            }
        }
    }
    Ok(())
}
