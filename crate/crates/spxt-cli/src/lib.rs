//! Command-line driver for single-pixel X-ray transform experiments: config
//! handling, file formats, parallel transform evaluation, and the commands
//! wired together by the `spxt` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod par;

pub use error::CliError;
