//! Experiment orchestration: stream generators, schedule builders, configs and report emission.

pub mod config;
pub mod experiment;
pub mod generators;
pub mod schedules;

pub use config::{parse_config, AlgorithmKind, ExperimentConfig, RateSpec, ResolvedRun};
pub use experiment::{
    regret_report, regret_report_from_dir, run_algorithm, run_experiment, run_sweep, ExperimentSummary, Mode, RunOptions,
    SweepConfig,
};
pub use generators::{gen_stream, GenParams, GeneratedStream, GeneratorSpec, LipschitzPolicy};
pub use schedules::{build_schedule, ScheduleSpec};
