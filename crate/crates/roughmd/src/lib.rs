//! Command-line experiments on top of `roughmd-core`: flat JSON
//! configuration, a thread-pool executor and reproducible CSV output.

mod cli;
pub mod config;
pub mod exec;
pub mod output;

pub use cli::{run, run_with};
