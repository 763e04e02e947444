//! File formats, exports and the command-line front end for the
//! `specquant-core` algorithms.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod formats;
pub mod report_json;

pub use error::AppError;

pub type Result<T> = std::result::Result<T, AppError>;
