//! Configuration and file formats of the `vhip` command-line tool.

pub mod config;
pub mod output;
pub mod selftest;

pub use config::{OutputConfig, OutputFormat, RunConfig};
