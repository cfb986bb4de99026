//! Experiment configuration, execution and result files.

pub mod apg;
pub mod config;
pub mod io;
pub mod run;

pub use apg::{compute_apg, read_returns, write_returns};
pub use config::{ExperimentConfig, Task};
pub use io::{read_curve, read_plotdata, write_curve, write_plotdata, Checkpoint, PlotRow};
pub use run::{
    mean_std, median, output_root, resume, run_experiment, summarize_curves, ExperimentReport, RlSummaryRow,
    TrackSummaryRow, OUTPUT_ROOT_ENV,
};
