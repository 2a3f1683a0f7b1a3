//! Batch front end: scenario registry, config validation, output writers and run manifests.

pub mod app;
pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;
