//! Configuration, experiment pipelines and result emission for the command
//! line tool.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{DisorderMode, ExperimentConfig, ExperimentKind};
pub use experiments::{locality_transitions, run_experiment, threads_from_env, with_thread_pool};
pub use output::{emit_results, read_records, write_records, OutputFormat, ResultRecord};
