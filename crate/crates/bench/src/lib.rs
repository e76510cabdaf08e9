//! Reproducible Monte-Carlo experiments for the `blockcs` detection scheme
//! and its access-protocol baselines.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod summary;

pub use config::{ExperimentConfig, Scheme, Sweep, SweepVar};
pub use error::BenchError;
pub use experiment::{run_experiment, TrialRecord};
pub use summary::{iteration_cdf, summarize, wilson, PointSummary};

/// Runs `cfg` and renders the summary CSV.
pub fn summary_csv(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<String, BenchError> {
    let records = run_experiment(cfg, threads)?;
    let rows = summarize(&records)?;
    let mut buf = Vec::new();
    output::write_summary(&mut buf, cfg.sweep.as_ref().map(|s| s.var), &rows)?;
    String::from_utf8(buf).map_err(|e| BenchError::Runtime(e.to_string()))
}
