//! Online learning with local permutations under delayed feedback.
//!
//! The learner may reorder the adversary's losses inside windows of `M`
//! rounds and observes each loss `tau` rounds after playing it. This crate
//! provides the mirror-map geometry, the Delayed Permuted Mirror Descent
//! learner ([`dpmd::Dpmd`]) and a delayed OGD baseline, the block-sign
//! adversaries behind the lower bound, and a seeded Monte-Carlo harness with
//! CSV output and a command line front end ([`cli::cli_main`]).

pub mod adversary;
pub mod cli;
pub mod dpmd;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod losses;
pub mod rng;
pub mod scheduling;
pub mod validate;

pub use error::{Error, Result};
pub use geometry::{DualPoint, Geometry, GeometryBounds, MirrorMap, Point};
pub use harness::{run_experiment, run_single, AggregateRow, ExperimentConfig, ExperimentKind};
