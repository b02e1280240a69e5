//! Experiment driver: configuration, seed fan-out, CSV output and the
//! identity-check suite.

pub mod config;
pub mod experiment;
pub mod report;
pub mod verify;

pub use config::{AlgorithmKind, Behavior, ExperimentConfig, ExperimentKind};
pub use experiment::{run_experiment, run_seed, AggregateResult, BuiltEnv, CurvePoint, SeedResult};
pub use report::{emit_csv, read_csv, write_csv, CsvRow, ParsedCsv};
pub use verify::{verify_suite, CheckResult, Scale};
