//! Files, experiments and the command-line tool around `ldprepr-core`.
//!
//! ```no_run
//! use ldprepr::config::ExperimentConfig;
//! use ldprepr::pipeline::run_experiment;
//!
//! let cfg = ExperimentConfig::load("experiments/ome.cfg")?;
//! let report = run_experiment(&cfg)?;
//! println!("{:.4}", report.mean_accuracy());
//! # Ok::<(), ldprepr::PipelineError>(())
//! ```

pub mod cli;
pub mod config;
mod error;
pub mod formats;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use error::{PipelineError, Result};
