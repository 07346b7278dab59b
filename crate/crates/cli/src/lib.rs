//! Experiment runner: TOML configs, parameter sweeps, persisted runs and
//! their analysis.

pub mod analyze;
pub mod config;
pub mod report;
pub mod runner;
pub mod solve;
