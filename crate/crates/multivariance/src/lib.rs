//! File formats, parallel drivers and the command-line interface for
//! distance multivariance.
//!
//! The estimators themselves live in `multivariance-core` and are
//! re-exported as [`core`].

pub use multivariance_core as core;

pub mod cli;
pub mod ingest;
pub mod parallel;
pub mod report;

pub use ingest::{ingest_csv, ingest_reader, GroupSpec};
pub use report::{parse_graph, to_json, Metadata};
