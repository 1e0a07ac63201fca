//! Fidelity metrics, report tables, run configuration and benchmark sweeps.

mod bench;
mod config;
mod metrics;
mod report;

pub use bench::{bench, BenchmarkSpec, NamedProfile};
pub use config::{LinkMode, ModelPreset, Paths, RunConfig, Seeds, SEED_ENV};
pub use metrics::{loss_mae_mse, ssim, ssim_contrast_structure, SsimParams};
pub use report::{
    sample_rows, summarize, write_csv, write_json, SampleRow, SummaryRow, SAMPLE_HEADER, SUMMARY_HEADER,
};

use thiserror::Error;

use crate::{epicnet, physics, runtime};

#[derive(Debug, Error)]
pub enum ToolkitError {
    #[error("metric error: {0}")]
    Metric(String),
    #[error("config error at {}: {message}", if pointer.is_empty() { "<root>" } else { pointer.as_str() })]
    Config { pointer: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Runtime(#[from] runtime::RuntimeError),
    #[error(transparent)]
    Model(#[from] epicnet::Error),
    #[error(transparent)]
    Physics(#[from] physics::Error),
}

pub type Result<T> = std::result::Result<T, ToolkitError>;
