//! Experiment orchestration: configuration, the train/evaluate schedule,
//! reference policies, generalization and transfer runs, CSV output.

pub mod config;
pub mod env;
pub mod metrics;
pub mod reference;
pub mod run;

pub use config::{EvalEpsilon, ExperimentConfig, GridConfig, RunConfig, ScheduleConfig};
pub use env::{TrafficEnv, Transition};
pub use metrics::{mean_of, read_csv, write_csv, LossRecord, Manifest, MetricRecord, METRIC_COLUMNS};
pub use reference::ReferencePolicy;
pub use run::{
    build_learner, final_cycle, load_learner, run_evaluation, run_generalization, run_program, run_reference, run_training,
    run_transfer, seeded, sweep_dir, transfer_learner, Controller, Session, TrainingOutcome,
};
