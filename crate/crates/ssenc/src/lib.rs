//! Std companion of `ssenc-core`: CSV datasets, versioned JSON model files,
//! run configuration, rayon-parallel section evaluation, the residual error
//! spectrum and the `ssenc` command-line tool.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod modelfile;
pub mod parallel;
pub mod report;
pub mod spectrum;
pub mod system;
pub mod trainlog;

pub use error::{Error, Result};
