//! Distance multivariance: sample estimators, independence tests and
//! dependence structure detection.
//!
//! The crate is `no_std` and needs only `alloc`. File formats and the
//! command-line interface live in the `multivariance` crate.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod centering;
pub mod dataset;
pub mod error;
pub mod independence;
pub mod measures;
pub mod psi;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod streaming;
pub mod structure;

pub use centering::{CenteredMatrix, Matrix, Scaling};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use independence::{Method, StatKind, StatisticEvaluator, TestOutcome};
pub use measures::{Correlation, MMethod, MeasureKind, MeasureValue};
pub use psi::Psi;
pub use rng::RngState;
pub use simulate::{Scenario, ScenarioKind};
pub use streaming::StreamedStatistics;
pub use structure::{DependencyGraph, DetectionOptions};
