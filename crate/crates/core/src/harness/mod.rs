//! Experiment configuration, replication runner, trace files, rate fitting
//! and step-size sweeps.

mod config;
mod experiment;
mod fit;
mod trace;

pub use config::{
    CheckpointKind, CheckpointSpec, CompliantSchedule, ExperimentConfig, MdpSource, Mode, ScheduleSpec,
    SweepConfig,
};
pub use experiment::{
    experiment_paths, run_experiment, run_with_schedule, sweep_stepsizes, with_workers, write_experiment,
    write_sweep, ExperimentOutcome, Prepared, SweepOutcome, SweepRow, TraceMeta, QSTAR_TOL,
};
pub use fit::{default_window, fit_rate, RateFit};
pub use trace::{ErrorTrace, TraceRow, TRACE_HEADER};
