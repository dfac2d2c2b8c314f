//! Configuration, snapshots, reports and pipelines for the `entrosc` binary.

pub mod config;
pub mod error;
pub mod pipelines;
pub mod report;
pub mod snapshot;
