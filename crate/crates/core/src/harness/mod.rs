//! Episode engine, experiment runner, replay and reporting.

mod episode;
mod experiment;
mod report;

use std::path::PathBuf;

pub use episode::{run_episode, EpisodeError, EpisodeOptions, EpisodeRun};
pub use experiment::{
    aggregate_file_name, episode_seed, load_aggregate, load_traces, replay, run_experiment,
    run_experiment_with, traces_file_name, AbortedEpisode, AggregateFile, ConditionOutcome,
    EpisodeRecord, InfrastructureReport, RunConfig, TraceHeader, INFRASTRUCTURE_FILE,
    SCHEMA_VERSION,
};
pub use report::{
    baseline_note, build_tables, core_cells, extended_cells, format_summary, render_csv,
    render_grid, report, ConditionTable, ReportRow, CORE_COLUMNS, EXTENDED_COLUMNS, UNDEFINED,
};

use crate::agents::BackendError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("schema version mismatch: file has {found}, this build reads {expected}")]
    SchemaMismatch { found: String, expected: u32 },
    #[error("malformed record on line {line}: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}
