//! Seeded experiment runner, CSV output and summaries.

mod aggregate;
mod config;
mod run;
pub mod selftest;

pub use aggregate::{
    aggregate, episode_returns, mean_stderr, summary_csv, sweep, sweep_csv, EpisodeReturn, SummaryRow, SweepRow,
    SUMMARY_HEADER, SWEEP_HEADER,
};
pub use config::ExperimentConfig;
pub use run::{
    resolve_domain, run_experiment, run_trial, strip_wall_ms, tabular_agent, to_csv_string, write_csv, wumpus_agent,
    TrialRecord, CSV_HEADER, TABULAR_AGENTS, WUMPUS_AGENTS,
};
