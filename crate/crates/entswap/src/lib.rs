//! File formats, embedding providers, run configuration and the command
//! line for `entswap-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod provider;
pub mod rules;

pub use cli::run;
pub use error::{AppError, Result};
